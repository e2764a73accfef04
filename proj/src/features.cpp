#include "bdice/features.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bdice/rng.hpp"

namespace bdice {

FeatureMap FeatureMap::one_hot(int num_states, int num_actions) {
  if (num_states <= 0 || num_actions <= 0)
    throw std::invalid_argument("one_hot features need positive dimensions");
  FeatureMap fm;
  fm.kind = FeatureKind::one_hot;
  fm.num_states = num_states;
  fm.num_actions = num_actions;
  fm.dim = num_states * num_actions;
  return fm;
}

FeatureMap FeatureMap::random_fourier(int num_states, int num_actions, int dim,
                                      double bandwidth, std::uint64_t seed) {
  if (dim <= 0) throw std::invalid_argument("random_fourier dim must be positive");
  if (bandwidth <= 0.0) throw std::invalid_argument("bandwidth must be positive");
  FeatureMap fm;
  fm.kind = FeatureKind::random_fourier;
  fm.num_states = num_states;
  fm.num_actions = num_actions;
  fm.dim = dim;
  fm.bandwidth = bandwidth;
  fm.freq.resize(dim, 2);
  fm.phase.resize(dim);
  Rng rng(seed);
  for (int i = 0; i < dim; ++i) {
    fm.freq(i, 0) = rng.normal() / bandwidth;
    fm.freq(i, 1) = rng.normal() / bandwidth;
    fm.phase(i) = 2.0 * std::numbers::pi * rng.uniform01();
  }
  return fm;
}

void FeatureMap::write(int s, int a, double* out) const {
  if (kind == FeatureKind::one_hot) {
    for (int i = 0; i < dim; ++i) out[i] = 0.0;
    out[onehot_index(s, a)] = 1.0;
    return;
  }
  const double xs = num_states > 1 ? static_cast<double>(s) / (num_states - 1) : 0.0;
  const double xa = num_actions > 1 ? static_cast<double>(a) / (num_actions - 1) : 0.0;
  const double scale = std::sqrt(2.0 / dim);
  for (int i = 0; i < dim; ++i)
    out[i] = scale * std::cos(freq(i, 0) * xs + freq(i, 1) * xa + phase(i));
}

Eigen::VectorXd FeatureMap::features(int s, int a) const {
  Eigen::VectorXd out(dim);
  write(s, a, out.data());
  return out;
}

void FeatureMap::accumulate_policy_avg(const TabularPolicy& pi, int s, double scale,
                                       double* out) const {
  if (kind == FeatureKind::one_hot) {
    for (int a = 0; a < num_actions; ++a)
      out[onehot_index(s, a)] += scale * pi.prob(s, a);
    return;
  }
  Eigen::VectorXd row(dim);
  for (int a = 0; a < num_actions; ++a) {
    const double p = pi.prob(s, a);
    if (p == 0.0) continue;
    write(s, a, row.data());
    for (int i = 0; i < dim; ++i) out[i] += scale * p * row[i];
  }
}

}  // namespace bdice
