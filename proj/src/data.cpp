#include "bdice/data.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "bdice/rng.hpp"

namespace bdice {

using nlohmann::json;

void TupleDataset::validate() const {
  const int S = meta.num_states;
  const int A = meta.num_actions;
  auto check_state = [&](int s, const char* what) {
    if (s < 0 || (S > 0 && s >= S))
      throw std::invalid_argument(std::string("dataset references invalid ") + what);
  };
  std::size_t flat = 0;
  for (const auto& traj : trajectories) {
    check_state(traj.final_state, "state");
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const auto& step = traj.steps[t];
      check_state(step.state, "state");
      if (step.action < 0 || (A > 0 && step.action >= A))
        throw std::invalid_argument("dataset references invalid action");
      if (flat >= tuples.size())
        throw std::invalid_argument("tuple list shorter than trajectory flattening");
      const Transition& tup = tuples[flat++];
      const int expected_next =
          t + 1 < traj.steps.size() ? traj.steps[t + 1].state : traj.final_state;
      if (tup.state != step.state || tup.action != step.action ||
          tup.reward != step.reward || tup.next_state != expected_next)
        throw std::invalid_argument("tuple list is not the flattening of trajectories");
      check_state(tup.init_state, "init state");
    }
  }
  if (flat != tuples.size())
    throw std::invalid_argument("tuple list longer than trajectory flattening");
}

TupleDataset sample_dataset(const TabularMDP& mdp, const TabularPolicy& behavior,
                            int num_trajectories, int horizon, std::uint64_t seed,
                            const std::string& behavior_label) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (num_trajectories < 0) throw std::invalid_argument("num_trajectories must be >= 0");
  if (behavior.num_states != mdp.num_states || behavior.num_actions != mdp.num_actions)
    throw std::invalid_argument("behavior policy does not match the MDP");

  Rng rng(seed);
  TupleDataset ds;
  ds.meta = {mdp.id,  behavior_label, mdp.gamma,      seed,
             horizon, mdp.num_states, mdp.num_actions};
  ds.trajectories.reserve(num_trajectories);
  const std::span<const double> mu0(mdp.initial_dist);

  for (int j = 0; j < num_trajectories; ++j) {
    Trajectory traj;
    traj.steps.reserve(horizon);
    int s = rng.categorical(mu0);
    for (int t = 0; t < horizon; ++t) {
      const int a = rng.categorical(behavior.row(s));
      double r = mdp.reward(s, a);
      if (mdp.reward_kind == RewardKind::bernoulli) r = rng.uniform01() < r ? 1.0 : 0.0;
      traj.steps.push_back({s, a, r});
      s = rng.categorical(mdp.trans_row(s, a));
    }
    traj.final_state = s;
    ds.trajectories.push_back(std::move(traj));
  }

  // flatten, then pair every tuple with an independent initial-state draw
  ds.tuples.reserve(static_cast<std::size_t>(num_trajectories) * horizon);
  for (const auto& traj : ds.trajectories)
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const auto& step = traj.steps[t];
      const int next =
          t + 1 < traj.steps.size() ? traj.steps[t + 1].state : traj.final_state;
      ds.tuples.push_back({0, step.state, step.action, step.reward, next});
    }
  for (auto& tup : ds.tuples) tup.init_state = rng.categorical(mu0);
  return ds;
}

void save_dataset(const TupleDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  json header = {{"env", ds.meta.env},
                 {"behavior", ds.meta.behavior},
                 {"gamma", ds.meta.gamma},
                 {"seed", ds.meta.seed},
                 {"horizon", ds.meta.horizon},
                 {"num_states", ds.meta.num_states},
                 {"num_actions", ds.meta.num_actions},
                 {"n", ds.tuples.size()}};
  out << header.dump() << '\n';
  for (const auto& t : ds.tuples) {
    json row = {{"s0", t.init_state},
                {"s", t.state},
                {"a", t.action},
                {"r", t.reward},
                {"sp", t.next_state}};
    out << row.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

TupleDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + what);
  };

  TupleDataset ds;
  std::size_t expected_n = 0;
  if (!std::getline(in, line)) fail("missing header line");
  ++lineno;
  try {
    const json header = json::parse(line);
    ds.meta.env = header.at("env").get<std::string>();
    ds.meta.behavior = header.value("behavior", std::string{});
    ds.meta.gamma = header.at("gamma").get<double>();
    ds.meta.seed = header.at("seed").get<std::uint64_t>();
    ds.meta.horizon = header.at("horizon").get<int>();
    ds.meta.num_states = header.value("num_states", 0);
    ds.meta.num_actions = header.value("num_actions", 0);
    expected_n = header.value("n", std::size_t{0});
  } catch (const json::exception& e) {
    fail(std::string("malformed header: ") + e.what());
  }
  if (ds.meta.horizon < 1) fail("header horizon must be >= 1");

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json row = json::parse(line);
      ds.tuples.push_back({row.at("s0").get<int>(), row.at("s").get<int>(),
                           row.at("a").get<int>(), row.at("r").get<double>(),
                           row.at("sp").get<int>()});
    } catch (const json::exception& e) {
      fail(std::string("malformed transition: ") + e.what());
    }
  }
  if (expected_n != ds.tuples.size()) {
    lineno = 1;
    fail("header n does not match transition count");
  }

  // rebuild the trajectory view by chunking at the fixed horizon
  const int H = ds.meta.horizon;
  if (ds.tuples.size() % H != 0) {
    lineno = 1;
    fail("transition count is not a multiple of the horizon");
  }
  for (std::size_t start = 0; start < ds.tuples.size(); start += H) {
    Trajectory traj;
    traj.steps.reserve(H);
    for (int t = 0; t < H; ++t) {
      const Transition& tup = ds.tuples[start + t];
      if (t + 1 < H && ds.tuples[start + t + 1].state != tup.next_state) {
        lineno = static_cast<int>(start + t) + 2;
        fail("trajectory chain broken: next_state does not match following row");
      }
      traj.steps.push_back({tup.state, tup.action, tup.reward});
    }
    traj.final_state = ds.tuples[start + H - 1].next_state;
    ds.trajectories.push_back(std::move(traj));
  }
  try {
    ds.validate();
  } catch (const std::invalid_argument& e) {
    lineno = 1;
    fail(e.what());
  }
  return ds;
}

}  // namespace bdice
