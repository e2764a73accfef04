#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "bdice/baselines.hpp"
#include "bdice/data.hpp"
#include "bdice/rng.hpp"

using namespace bdice;

namespace {

TabularPolicy alpha_policy(const TabularMDP& mdp, double alpha) {
  PolicyFamilySpec spec;
  spec.family = PolicyFamily::bandit_alpha;
  spec.alpha_or_epsilon = alpha;
  return make_policy(mdp, spec);
}

// Normalized discounted return of one trajectory, computed directly.
double normalized_return(const Trajectory& traj, double gamma) {
  double acc = 0.0, norm = 0.0, disc = 1.0;
  for (const auto& step : traj.steps) {
    acc += disc * step.reward;
    norm += disc;
    disc *= gamma;
  }
  return acc / norm;
}

}  // namespace

TEST_CASE("on-policy WIS reproduces the per-trajectory discounted return") {
  const auto mdp = build_bandit(0.7, 0.3, 0.95);
  const auto pol = alpha_policy(mdp, 0.6);
  const auto ds = sample_dataset(mdp, pol, 40, 25, 11, "b");
  const auto est = wis_per_trajectory(ds, pol, pol, mdp.gamma);
  REQUIRE(est.values.size() == 40);
  for (std::size_t j = 0; j < est.values.size(); ++j)
    CHECK(std::abs(est.values[j] - normalized_return(ds.trajectories[j], mdp.gamma)) <=
          1e-12);
}

TEST_CASE("deterministic target zeroes trajectories that leave its support") {
  // hand-built dataset: two trajectories on arm 0, one mixed, one on arm 1
  const auto mdp = build_bandit(0.7, 0.3, 0.9);
  const auto behavior = alpha_policy(mdp, 0.5);
  const auto target = alpha_policy(mdp, 1.0);
  TupleDataset ds;
  ds.meta = {mdp.id, "manual", 0.9, 0, 2, 1, 2};
  auto add_traj = [&](int a0, int a1) {
    Trajectory traj;
    traj.steps = {{0, a0, 1.0}, {0, a1, 1.0}};
    traj.final_state = 0;
    ds.trajectories.push_back(traj);
    ds.tuples.push_back({0, 0, a0, 1.0, 0});
    ds.tuples.push_back({0, 0, a1, 1.0, 0});
  };
  add_traj(0, 0);
  add_traj(0, 0);
  add_traj(0, 1);
  add_traj(1, 1);
  const auto est = wis_per_trajectory(ds, behavior, target, 0.9);
  // step 0: raw weights (2,2,2,0), mean 1.5; step 1: (4,4,0,0), mean 2
  const double n0 = 1.0 + 0.9;
  CHECK(est.values[0] == doctest::Approx((2 / 1.5 + 0.9 * 4 / 2.0) / n0));
  CHECK(est.values[2] == doctest::Approx((2 / 1.5) / n0));
  CHECK(est.values[3] == 0.0);
}

TEST_CASE("WIS mean is consistent with the exact value on the bandit") {
  const auto mdp = build_bandit(0.7, 0.3, 0.99);
  const auto behavior = alpha_policy(mdp, 0.5);
  const auto target = alpha_policy(mdp, 0.8);
  const auto ds = sample_dataset(mdp, behavior, 10000, 20, 17, "b");
  const auto est = wis_per_trajectory(ds, behavior, target, mdp.gamma);
  const double mean =
      std::accumulate(est.values.begin(), est.values.end(), 0.0) / est.values.size();
  CHECK(std::abs(mean - exact_policy_value(mdp, target)) <= 0.02);
}

TEST_CASE("WIS rejects unsupported actions") {
  const auto mdp = build_bandit(0.7, 0.3, 0.9);
  const auto behavior = alpha_policy(mdp, 1.0);  // never plays arm 1
  const auto target = alpha_policy(mdp, 0.5);
  TupleDataset ds;
  ds.meta = {mdp.id, "manual", 0.9, 0, 1, 1, 2};
  Trajectory traj;
  traj.steps = {{0, 1, 1.0}};
  traj.final_state = 0;
  ds.trajectories.push_back(traj);
  ds.tuples.push_back({0, 0, 1, 1.0, 0});
  CHECK_THROWS_AS(wis_per_trajectory(ds, behavior, target, 0.9),
                  std::invalid_argument);
}

TEST_CASE("t interval arithmetic") {
  TrajectoryEstimates eq;
  eq.values = std::vector<double>(8, 0.42);
  const auto [lo, hi] = t_interval(eq, 0.95);
  CHECK(lo == 0.42);
  CHECK(hi == 0.42);

  TrajectoryEstimates two;
  two.values = {0.0, 1.0};
  const auto [l2, h2] = t_interval(two, 0.95);
  // df = 1, t-quantile 12.7062; sd/sqrt(n) = 0.7071/1.4142 = 0.5
  CHECK(h2 - l2 == doctest::Approx(2 * 12.7062 * 0.5).epsilon(1e-4));
  CHECK((l2 + h2) / 2 == doctest::Approx(0.5));

  const auto [l3, h3] = t_interval(two, 1e-9);
  CHECK(h3 - l3 <= 1e-8);

  TrajectoryEstimates one;
  one.values = {0.5};
  CHECK_THROWS_AS(t_interval(one, 0.9), std::invalid_argument);
}

TEST_CASE("Bernstein interval arithmetic and edge cases") {
  TrajectoryEstimates eq;
  eq.values = std::vector<double>(101, 0.37);
  const auto [lo, hi] = bernstein_interval(eq, 0.9);
  const double half = 7.0 * std::log(20.0) / 300.0;
  CHECK(hi - lo == doctest::Approx(2 * half).epsilon(1e-12));

  TrajectoryEstimates two;
  two.values = {0.2, 0.8};
  const auto [l2, h2] = bernstein_interval(two, 0.9);
  CHECK(std::isfinite(l2));
  CHECK(std::isfinite(h2));
  CHECK(l2 >= 0.0);
  CHECK(h2 <= 1.0);
}

TEST_CASE("Bernstein coverage is conservative on bounded iid samples") {
  Rng rng(19);
  int covered = 0;
  const int sims = 200;
  for (int s = 0; s < sims; ++s) {
    TrajectoryEstimates est;
    est.values.resize(30);
    for (auto& v : est.values) v = rng.uniform01();  // true mean 0.5
    const auto [lo, hi] = bernstein_interval(est, 0.9);
    covered += (lo <= 0.5 && 0.5 <= hi) ? 1 : 0;
  }
  CHECK(covered >= static_cast<int>(0.9 * sims));
}

TEST_CASE("Bernstein is wider than t on small bounded samples") {
  Rng rng(23);
  for (int s = 0; s < 50; ++s) {
    TrajectoryEstimates est;
    est.values.resize(12);
    for (auto& v : est.values) v = rng.uniform01();
    const auto [tl, th] = t_interval(est, 0.9);
    const auto [bl, bh] = bernstein_interval(est, 0.9);
    CHECK(bh - bl >= th - tl - 1e-12);
  }
}

TEST_CASE("bootstrap interval behavior") {
  TrajectoryEstimates eq;
  eq.values = std::vector<double>(10, 0.31);
  const auto [lo, hi] = bootstrap_bc_interval(eq, 0.9, 500, 1);
  CHECK(lo == 0.31);
  CHECK(hi == 0.31);

  // symmetric sample: z0 ~ 0, endpoints close to the plain percentile interval
  TrajectoryEstimates sym;
  Rng rng(5);
  sym.values.resize(200);
  for (auto& v : sym.values) v = 0.5 + 0.1 * rng.normal();
  const int B = 4000;
  const auto [bl, bh] = bootstrap_bc_interval(sym, 0.9, B, 7);
  // plain percentile oracle with the same resampling stream
  Rng rng2(7);
  std::vector<double> boot(B);
  for (int b = 0; b < B; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < sym.values.size(); ++i)
      sum += sym.values[rng2.below(sym.values.size())];
    boot[b] = sum / sym.values.size();
  }
  std::sort(boot.begin(), boot.end());
  const double plain_lo = boot[static_cast<std::size_t>(0.05 * (B - 1))];
  const double plain_hi = boot[static_cast<std::size_t>(0.95 * (B - 1))];
  const double scale = plain_hi - plain_lo;
  CHECK(std::abs(bl - plain_lo) <= 0.25 * scale);
  CHECK(std::abs(bh - plain_hi) <= 0.25 * scale);

  // resamples = 1 -> degenerate but well-defined
  TrajectoryEstimates two;
  two.values = {0.1, 0.9};
  const auto [dl, dh] = bootstrap_bc_interval(two, 0.9, 1, 3);
  CHECK(std::isfinite(dl));
  CHECK(std::isfinite(dh));
  CHECK(dl <= dh);

  // deterministic under a fixed seed
  const auto r1 = bootstrap_bc_interval(sym, 0.9, 500, 42);
  const auto r2 = bootstrap_bc_interval(sym, 0.9, 500, 42);
  CHECK(r1 == r2);
}

TEST_CASE("all three intervals contain the sample mean") {
  Rng rng(31);
  for (int rep = 0; rep < 40; ++rep) {
    TrajectoryEstimates est;
    est.values.resize(10 + rng.below(40));
    for (auto& v : est.values) v = rng.uniform01();
    const double mean =
        std::accumulate(est.values.begin(), est.values.end(), 0.0) / est.values.size();
    for (const auto& [lo, hi] : {t_interval(est, 0.9), bernstein_interval(est, 0.9),
                                 bootstrap_bc_interval(est, 0.9, 800, rep)}) {
      CHECK(lo <= mean + 1e-12);
      CHECK(hi >= mean - 1e-12);
    }
  }
}

TEST_CASE("interval width shrinks with more data on average") {
  const auto mdp = build_bandit(0.7, 0.3, 0.99);
  const auto behavior = alpha_policy(mdp, 0.5);
  const auto target = alpha_policy(mdp, 0.8);
  double w_small = 0.0, w_large = 0.0;
  for (int s = 0; s < 50; ++s) {
    const auto small = sample_dataset(mdp, behavior, 10, 20, 100 + s, "b");
    const auto large = sample_dataset(mdp, behavior, 40, 20, 200 + s, "b");
    const auto es = wis_per_trajectory(small, behavior, target, mdp.gamma);
    const auto el = wis_per_trajectory(large, behavior, target, mdp.gamma);
    const auto [sl, sh] = t_interval(es, 0.9);
    const auto [ll, lh] = t_interval(el, 0.9);
    w_small += sh - sl;
    w_large += lh - ll;
  }
  CHECK(w_large < w_small);
}
