#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "bdice/mdp.hpp"

namespace bdice {

enum class FeatureKind { one_hot, random_fourier };

// Feature embedding phi(s,a) in R^m. one_hot is the tabular indicator map
// (m = |S||A|); random_fourier approximates an RBF kernel on the normalized
// (s,a) coordinates and is the extension point for non-tabular embeddings.
struct FeatureMap {
  FeatureKind kind = FeatureKind::one_hot;
  int dim = 0;
  int num_states = 0;
  int num_actions = 0;
  double bandwidth = 1.0;
  Eigen::MatrixXd freq;    // dim x 2, random_fourier only
  Eigen::VectorXd phase;   // dim, random_fourier only

  static FeatureMap one_hot(int num_states, int num_actions);
  static FeatureMap random_fourier(int num_states, int num_actions, int dim,
                                   double bandwidth, std::uint64_t seed);

  int onehot_index(int s, int a) const { return s * num_actions + a; }

  // Dense feature row; out must hold dim doubles.
  void write(int s, int a, double* out) const;
  Eigen::VectorXd features(int s, int a) const;
  // sum_a pi(a|s) phi(s,a), accumulated into out (not cleared).
  void accumulate_policy_avg(const TabularPolicy& pi, int s, double scale,
                             double* out) const;
};

}  // namespace bdice
