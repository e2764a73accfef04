#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdice/mdp.hpp"

namespace bdice {

// One logged experience tuple. init_state is an independent draw from the
// initial distribution paired with the tuple (it is not the state the
// trajectory started from).
struct Transition {
  int init_state = 0;
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;

  bool operator==(const Transition&) const = default;
};

struct TrajectoryStep {
  int state = 0;
  int action = 0;
  double reward = 0.0;

  bool operator==(const TrajectoryStep&) const = default;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  int final_state = 0;  // state after the last step, closes the tuple view

  bool operator==(const Trajectory&) const = default;
};

struct DatasetMeta {
  std::string env;
  std::string behavior;
  double gamma = 0.99;
  std::uint64_t seed = 0;
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;

  bool operator==(const DatasetMeta&) const = default;
};

// Offline dataset with both views: the flat tuple list consumed by the ratio
// estimator and the trajectory list consumed by the importance-sampling
// baselines. The tuple list is exactly the flattening of the trajectories.
struct TupleDataset {
  std::vector<Transition> tuples;
  std::vector<Trajectory> trajectories;
  DatasetMeta meta;

  std::size_t size() const { return tuples.size(); }
  bool operator==(const TupleDataset&) const = default;

  // Throws std::invalid_argument if ids are out of range or the tuple list is
  // not the flattening of the trajectory list.
  void validate() const;
};

TupleDataset sample_dataset(const TabularMDP& mdp, const TabularPolicy& behavior,
                            int num_trajectories, int horizon, std::uint64_t seed,
                            const std::string& behavior_label = "");

// JSON-lines persistence: one header object, then one object per transition.
void save_dataset(const TupleDataset& ds, const std::string& path);
TupleDataset load_dataset(const std::string& path);

}  // namespace bdice
