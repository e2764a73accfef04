#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "bdice/data.hpp"
#include "bdice/mdp.hpp"

namespace bdice {

// One self-normalized per-step importance-sampling value estimate per logged
// trajectory. value_range bounds any single estimate and feeds the Bernstein
// interval.
struct TrajectoryEstimates {
  std::vector<double> values;
  std::pair<double, double> value_range{0.0, 1.0};
};

// Per-trajectory weighted (self-normalized) per-step importance sampling.
// Step weights are cumulative ratios normalized by their across-trajectory
// mean at each step; the discounted weighted return is normalized by
// (1-gamma) sum_t gamma^t so estimates of [0,1] rewards stay in [0,1].
// Requires the behavior policy to have support wherever the target does on
// observed actions.
TrajectoryEstimates wis_per_trajectory(const TupleDataset& ds,
                                       const TabularPolicy& behavior,
                                       const TabularPolicy& target, double gamma);

// mean +/- t_{1-(1-c)/2, n-1} * sd / sqrt(n)
std::pair<double, double> t_interval(const TrajectoryEstimates& est, double confidence);

// Empirical Bernstein bound for samples in a known range, clipped to it.
std::pair<double, double> bernstein_interval(const TrajectoryEstimates& est,
                                             double confidence);

// Bias-corrected percentile bootstrap of the mean.
std::pair<double, double> bootstrap_bc_interval(const TrajectoryEstimates& est,
                                                double confidence, int resamples,
                                                std::uint64_t seed);

}  // namespace bdice
