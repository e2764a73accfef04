#include "bdice/baselines.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bdice/posterior.hpp"
#include "bdice/rng.hpp"

namespace bdice {

namespace {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n-1)
  std::size_t n = 0;
};

MeanSd mean_sd(const std::vector<double>& values) {
  MeanSd out;
  out.n = values.size();
  if (out.n < 2) throw std::invalid_argument("need at least two trajectory estimates");
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(out.n);
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(out.n - 1));
  return out;
}

}  // namespace

TrajectoryEstimates wis_per_trajectory(const TupleDataset& ds,
                                       const TabularPolicy& behavior,
                                       const TabularPolicy& target, double gamma) {
  if (ds.trajectories.empty())
    throw std::invalid_argument("dataset carries no trajectories");
  if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("gamma outside (0,1]");
  const std::size_t M = ds.trajectories.size();
  std::size_t max_len = 0;
  for (const auto& traj : ds.trajectories) max_len = std::max(max_len, traj.steps.size());

  // cumulative importance weights w_t per trajectory, then the per-step
  // across-trajectory mean used for self-normalization
  std::vector<std::vector<double>> weights(M);
  std::vector<double> step_sum(max_len, 0.0);
  std::vector<std::size_t> step_count(max_len, 0);
  for (std::size_t j = 0; j < M; ++j) {
    const auto& steps = ds.trajectories[j].steps;
    weights[j].resize(steps.size());
    double w = 1.0;
    for (std::size_t t = 0; t < steps.size(); ++t) {
      const double pb = behavior.prob(steps[t].state, steps[t].action);
      const double pt = target.prob(steps[t].state, steps[t].action);
      if (pb <= 0.0 && pt > 0.0)
        throw std::invalid_argument(
            "behavior policy has zero probability on an observed action the "
            "target can take");
      w = pb > 0.0 ? w * (pt / pb) : 0.0;
      weights[j][t] = w;
      step_sum[t] += w;
      step_count[t] += 1;
    }
  }

  TrajectoryEstimates out;
  out.value_range = {0.0, 1.0};
  out.values.resize(M);
  for (std::size_t j = 0; j < M; ++j) {
    const auto& steps = ds.trajectories[j].steps;
    double acc = 0.0;
    double norm = 0.0;
    double disc = 1.0;
    for (std::size_t t = 0; t < steps.size(); ++t) {
      const double mean_w = step_sum[t] / static_cast<double>(step_count[t]);
      const double wbar = mean_w > 0.0 ? weights[j][t] / mean_w : 0.0;
      acc += disc * wbar * steps[t].reward;
      norm += disc;
      disc *= gamma;
    }
    // Individual self-normalized estimates can leave [0,1]; only their
    // across-trajectory mean is bounded. value_range stays the assumed range
    // of the estimand, which is what the Bernstein bound consumes.
    out.values[j] = norm > 0.0 ? acc / norm : 0.0;
  }
  return out;
}

std::pair<double, double> t_interval(const TrajectoryEstimates& est, double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("confidence must lie in (0,1)");
  const MeanSd ms = mean_sd(est.values);
  if (ms.sd == 0.0) return {ms.mean, ms.mean};
  const boost::math::students_t dist(static_cast<double>(ms.n - 1));
  const double tq = boost::math::quantile(dist, 1.0 - (1.0 - confidence) / 2.0);
  const double half = tq * ms.sd / std::sqrt(static_cast<double>(ms.n));
  return {ms.mean - half, ms.mean + half};
}

std::pair<double, double> bernstein_interval(const TrajectoryEstimates& est,
                                             double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("confidence must lie in (0,1)");
  const MeanSd ms = mean_sd(est.values);
  const double b = est.value_range.second - est.value_range.first;
  if (!(b > 0.0) || !std::isfinite(b))
    throw std::invalid_argument("Bernstein interval needs a finite value range");
  const double delta = 1.0 - confidence;
  const double log_term = std::log(2.0 / delta);
  const double n = static_cast<double>(ms.n);
  const double variance = ms.sd * ms.sd;
  const double half =
      std::sqrt(2.0 * variance * log_term / n) + 7.0 * b * log_term / (3.0 * (n - 1.0));
  return {std::max(ms.mean - half, est.value_range.first),
          std::min(ms.mean + half, est.value_range.second)};
}

std::pair<double, double> bootstrap_bc_interval(const TrajectoryEstimates& est,
                                                double confidence, int resamples,
                                                std::uint64_t seed) {
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("confidence must lie in (0,1)");
  if (resamples < 1) throw std::invalid_argument("resamples must be positive");
  const MeanSd ms = mean_sd(est.values);
  const std::size_t n = ms.n;

  Rng rng(seed);
  std::vector<double> boot(resamples);
  for (int b = 0; b < resamples; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += est.values[rng.below(n)];
    boot[b] = sum / static_cast<double>(n);
  }
  std::sort(boot.begin(), boot.end());
  if (boot.front() == boot.back()) return {boot.front(), boot.back()};

  // bias-correction constant from the share of bootstrap means below the
  // sample mean, kept away from 0/1 so the probit stays finite
  double below = 0.0;
  for (double b : boot) below += b < ms.mean ? 1.0 : 0.0;
  double frac = below / static_cast<double>(resamples);
  const double clamp = 1.0 / static_cast<double>(resamples + 1);
  frac = std::clamp(frac, clamp, 1.0 - clamp);

  const boost::math::normal norm01;
  const double z0 = boost::math::quantile(norm01, frac);
  const double zlo = boost::math::quantile(norm01, (1.0 - confidence) / 2.0);
  const double zhi = boost::math::quantile(norm01, (1.0 + confidence) / 2.0);
  const double alpha_lo = boost::math::cdf(norm01, 2.0 * z0 + zlo);
  const double alpha_hi = boost::math::cdf(norm01, 2.0 * z0 + zhi);
  return {empirical_quantile(boot, alpha_lo), empirical_quantile(boot, alpha_hi)};
}

}  // namespace bdice
