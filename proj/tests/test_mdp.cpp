#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "bdice/mdp.hpp"
#include "bdice/rng.hpp"

using namespace bdice;

namespace {

TabularPolicy eps_greedy(const TabularMDP& mdp, double eps) {
  PolicyFamilySpec spec;
  spec.family = PolicyFamily::epsilon_greedy;
  spec.alpha_or_epsilon = eps;
  spec.base_policy = greedy_policy(mdp);
  return make_policy(mdp, spec);
}

TabularPolicy bandit_policy(const TabularMDP& mdp, double alpha) {
  PolicyFamilySpec spec;
  spec.family = PolicyFamily::bandit_alpha;
  spec.alpha_or_epsilon = alpha;
  return make_policy(mdp, spec);
}

// Independent rollout oracle: truncated discounted return averaged over
// episodes, normalized by (1-gamma).
std::pair<double, double> mc_policy_value(const TabularMDP& mdp,
                                          const TabularPolicy& policy, int episodes,
                                          int horizon, std::uint64_t seed) {
  Rng rng(seed);
  double sum = 0.0, sumsq = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    int s = rng.categorical(std::span<const double>(mdp.initial_dist));
    double ret = 0.0;
    double disc = 1.0;
    for (int t = 0; t < horizon; ++t) {
      const int a = rng.categorical(policy.row(s));
      ret += disc * mdp.reward(s, a);
      disc *= mdp.gamma;
      s = rng.categorical(mdp.trans_row(s, a));
    }
    ret *= (1.0 - mdp.gamma);
    sum += ret;
    sumsq += ret * ret;
  }
  const double mean = sum / episodes;
  const double var = sumsq / episodes - mean * mean;
  return {mean, std::sqrt(var / episodes)};
}

}  // namespace

TEST_CASE("build_bandit basics") {
  const auto mdp = build_bandit(1.0, 0.0);
  CHECK(mdp.reward_mean == std::vector<double>{1.0, 0.0});
  CHECK(mdp.num_states == 1);
  CHECK(mdp.reward_kind == RewardKind::bernoulli);

  const auto mid = build_bandit(0.7, 0.3);
  CHECK(mid.trans(0, 0, 0) == 1.0);
  CHECK(mid.trans(0, 1, 0) == 1.0);

  CHECK_NOTHROW(build_bandit(0.6, 0.6));
  CHECK_THROWS_AS(build_bandit(0.3, 0.7), std::invalid_argument);
}

TEST_CASE("frozenlake deterministic moves are one-hot") {
  const auto mdp = build_gridworld(GridworldKind::frozenlake4x4, 0.0);
  CHECK(mdp.num_states == 16);
  CHECK(mdp.num_actions == 4);
  for (int s = 0; s < 16; ++s)
    for (int a = 0; a < 4; ++a) {
      int ones = 0;
      for (double p : mdp.trans_row(s, a)) {
        CHECK((p == 0.0 || p == 1.0));
        if (p == 1.0) ++ones;
      }
      CHECK(ones == 1);
    }
  // moving right from the cell left of the goal lands on the goal and pays 1
  CHECK(mdp.trans(14, 2, 15) == 1.0);
  CHECK(mdp.reward(14, 2) == 1.0);
}

TEST_CASE("frozenlake slip stencil") {
  const double slip = 1.0 / 3.0;
  const auto mdp = build_gridworld(GridworldKind::frozenlake4x4, slip);
  // independent stencil enumeration: intended 1-slip, perpendicular slip/2
  const int dr[4] = {0, 1, 0, -1};
  const int dc[4] = {-1, 0, 1, 0};
  const char* map = "SFFFFHFHFFFHHFFG";
  for (int s = 0; s < 16; ++s) {
    if (map[s] == 'H' || map[s] == 'G') {
      for (int a = 0; a < 4; ++a) CHECK(mdp.trans(s, a, 0) == doctest::Approx(1.0));
      continue;
    }
    for (int a = 0; a < 4; ++a) {
      std::vector<double> expected(16, 0.0);
      for (const auto& [dir, prob] :
           {std::pair{a, 1.0 - slip}, {(a + 1) % 4, slip / 2}, {(a + 3) % 4, slip / 2}}) {
        int r = s / 4 + dr[dir];
        int c = s % 4 + dc[dir];
        const int sp = (r < 0 || r > 3 || c < 0 || c > 3) ? s : r * 4 + c;
        expected[sp] += prob;
      }
      double sum = 0.0;
      for (int sp = 0; sp < 16; ++sp) {
        CHECK(mdp.trans(s, a, sp) == doctest::Approx(expected[sp]).epsilon(1e-12));
        sum += mdp.trans(s, a, sp);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("taxi has 500 states and valid dynamics") {
  const auto mdp = build_gridworld(GridworldKind::taxi5x5, 0.0);
  CHECK(mdp.num_states == 500);
  CHECK(mdp.num_actions == 6);
  CHECK_NOTHROW(mdp.validate());
  const double init_states =
      std::accumulate(mdp.initial_dist.begin(), mdp.initial_dist.end(), 0.0,
                      [](double acc, double p) { return acc + (p > 0 ? 1.0 : 0.0); });
  CHECK(init_states == 300.0);
}

TEST_CASE("make_policy families") {
  const auto mdp = build_bandit(0.7, 0.3);
  const auto skewed = bandit_policy(mdp, 0.95);
  CHECK(skewed.probs[0] == 0.95);
  CHECK(skewed.probs[1] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(bandit_policy(mdp, 0.5).probs == std::vector<double>{0.5, 0.5});

  const auto lake = build_gridworld(GridworldKind::frozenlake4x4, 1.0 / 3.0);
  const auto base = greedy_policy(lake);
  PolicyFamilySpec spec;
  spec.family = PolicyFamily::epsilon_greedy;
  spec.alpha_or_epsilon = 0.0;
  spec.base_policy = base;
  CHECK(make_policy(lake, spec).probs == base.probs);

  PolicyFamilySpec missing;
  missing.family = PolicyFamily::epsilon_greedy;
  missing.alpha_or_epsilon = 0.1;
  CHECK_THROWS_AS(make_policy(lake, missing), std::invalid_argument);
}

TEST_CASE("exact_policy_value on the bandit") {
  CHECK(exact_policy_value(build_bandit(1.0, 0.0), bandit_policy(build_bandit(1.0, 0.0), 1.0)) ==
        doctest::Approx(1.0));
  const auto mdp = build_bandit(0.7, 0.3);
  CHECK(exact_policy_value(mdp, bandit_policy(mdp, 0.75)) == doctest::Approx(0.6));

  auto undiscounted = build_bandit(0.7, 0.3, 1.0);
  CHECK(exact_policy_value(undiscounted, bandit_policy(undiscounted, 0.8)) ==
        doctest::Approx(0.8 * 0.7 + 0.2 * 0.3));
}

TEST_CASE("exact_policy_value matches Monte Carlo rollouts on frozenlake") {
  const auto mdp = build_gridworld(GridworldKind::frozenlake4x4, 1.0 / 3.0, 0.99);
  const auto policy = eps_greedy(mdp, 0.1);
  const double exact = exact_policy_value(mdp, policy);
  const auto [mc, se] = mc_policy_value(mdp, policy, 30000, 1300, 777);
  CHECK(std::abs(exact - mc) <= 3.0 * se + 1e-6);
}

TEST_CASE("exact_visitation properties") {
  const auto mdp = build_bandit(0.7, 0.3);
  const auto pol = bandit_policy(mdp, 0.8);
  const auto d = exact_visitation(mdp, pol);
  CHECK(d[0] == doctest::Approx(0.8).epsilon(1e-10));
  CHECK(d[1] == doctest::Approx(0.2).epsilon(1e-10));

  // two-state symmetric chain, uniform policy -> uniform visitation
  TabularMDP chain;
  chain.num_states = 2;
  chain.num_actions = 2;
  chain.gamma = 0.9;
  chain.transition = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  chain.reward_mean = {0.1, 0.2, 0.3, 0.4};
  chain.initial_dist = {0.5, 0.5};
  chain.id = "chain";
  chain.validate();
  TabularPolicy uniform;
  uniform.num_states = 2;
  uniform.num_actions = 2;
  uniform.probs = {0.5, 0.5, 0.5, 0.5};
  for (double v : exact_visitation(chain, uniform))
    CHECK(v == doctest::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("visitation satisfies the flow recursion on frozenlake") {
  const auto mdp = build_gridworld(GridworldKind::frozenlake4x4, 1.0 / 3.0, 0.99);
  const auto policy = eps_greedy(mdp, 0.2);
  const auto d = exact_visitation(mdp, policy);
  const int S = mdp.num_states, A = mdp.num_actions;
  double total = 0.0;
  for (double v : d) total += v;
  CHECK(std::abs(total - 1.0) <= 1e-8);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double flow = (1.0 - mdp.gamma) * mdp.initial_dist[s] * policy.prob(s, a);
      for (int sb = 0; sb < S; ++sb)
        for (int ab = 0; ab < A; ++ab)
          flow += mdp.gamma * policy.prob(s, a) * mdp.trans(sb, ab, s) *
                  d[static_cast<std::size_t>(sb) * A + ab];
      CHECK(std::abs(flow - d[static_cast<std::size_t>(s) * A + a]) <= 1e-8);
    }
}

TEST_CASE("value identities and monotonicity") {
  const auto mdp = build_bandit(0.7, 0.3);
  double prev = -1.0;
  for (double alpha : {0.0, 0.25, 0.5, 0.75, 0.95, 1.0}) {
    const double v = exact_policy_value(mdp, bandit_policy(mdp, alpha));
    CHECK(v > prev);
    prev = v;
  }

  for (const auto& [env, policy] :
       {std::pair{build_bandit(0.7, 0.3), bandit_policy(mdp, 0.9)},
        std::pair{build_gridworld(GridworldKind::frozenlake4x4, 1.0 / 3.0, 0.99),
                  eps_greedy(build_gridworld(GridworldKind::frozenlake4x4, 1.0 / 3.0, 0.99),
                             0.1)}}) {
    const auto d = exact_visitation(env, policy);
    double dual = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) dual += d[i] * env.reward_mean[i];
    CHECK(std::abs(dual - exact_policy_value(env, policy)) <= 1e-10);

    // primal route: (1-gamma) E_{mu0, pi}[Q]
    const auto q = exact_q_values(env, policy);
    double primal = 0.0;
    for (int s = 0; s < env.num_states; ++s)
      for (int a = 0; a < env.num_actions; ++a)
        primal += env.initial_dist[s] * policy.prob(s, a) *
                  q[static_cast<std::size_t>(s) * env.num_actions + a];
    primal *= (1.0 - env.gamma);
    CHECK(std::abs(primal - dual) <= 1e-8);
  }
}

TEST_CASE("non-ergodic gamma=1 chain is reported") {
  TabularMDP split;
  split.num_states = 2;
  split.num_actions = 1;
  split.gamma = 1.0;
  split.transition = {1.0, 0.0, 0.0, 1.0};  // two absorbing components
  split.reward_mean = {0.0, 1.0};
  split.initial_dist = {0.5, 0.5};
  split.id = "split";
  split.validate();
  TabularPolicy only;
  only.num_states = 2;
  only.num_actions = 1;
  only.probs = {1.0, 1.0};
  CHECK_THROWS_AS(exact_policy_value(split, only), std::runtime_error);
}
