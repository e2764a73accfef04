#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bdice {

enum class RewardKind { deterministic, bernoulli };

// Finite MDP with dense transition tensor. All environments here are
// infinite-horizon: terminal cells of the gridworlds re-enter through the
// initial distribution instead of absorbing.
struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> transition;    // [s][a][s'], rows sum to 1
  std::vector<double> reward_mean;   // [s][a], expected immediate reward
  RewardKind reward_kind = RewardKind::deterministic;
  std::vector<double> initial_dist;  // over states
  double gamma = 0.99;
  std::string id;

  double trans(int s, int a, int sp) const {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + sp];
  }
  std::span<const double> trans_row(int s, int a) const {
    return {transition.data() +
                (static_cast<std::size_t>(s) * num_actions + a) * num_states,
            static_cast<std::size_t>(num_states)};
  }
  double reward(int s, int a) const {
    return reward_mean[static_cast<std::size_t>(s) * num_actions + a];
  }

  // Throws std::invalid_argument when a stochasticity or range invariant is
  // broken (row sums within 1e-9, initial_dist sums to 1, bernoulli means in
  // [0,1], gamma in (0,1]).
  void validate() const;
};

struct TabularPolicy {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> probs;  // [s][a], rows sum to 1

  double prob(int s, int a) const {
    return probs[static_cast<std::size_t>(s) * num_actions + a];
  }
  std::span<const double> row(int s) const {
    return {probs.data() + static_cast<std::size_t>(s) * num_actions,
            static_cast<std::size_t>(num_actions)};
  }
  void validate() const;
};

enum class PolicyFamily { bandit_alpha, epsilon_greedy };

struct PolicyFamilySpec {
  PolicyFamily family = PolicyFamily::bandit_alpha;
  double alpha_or_epsilon = 0.5;
  std::optional<TabularPolicy> base_policy;  // greedy reference for epsilon_greedy

  std::string label() const;
};

// Two-armed Bernoulli bandit; arm 0 is the optimal arm by convention
// (p_opt >= p_sub enforced).
TabularMDP build_bandit(double p_opt, double p_sub, double gamma = 0.99);

enum class GridworldKind { frozenlake4x4, taxi5x5 };

TabularMDP build_gridworld(GridworldKind kind, double slip_prob, double gamma = 0.99);

TabularPolicy make_policy(const TabularMDP& mdp, const PolicyFamilySpec& spec);

// Deterministic optimal policy via policy iteration (requires gamma < 1);
// used as the greedy reference for epsilon-greedy families.
TabularPolicy greedy_policy(const TabularMDP& mdp);

// Discounted stationary state-action visitation d(s,a), solved exactly by
// dense LU; for gamma = 1 the stationary distribution of the induced chain.
// Throws std::runtime_error when the gamma = 1 chain is not ergodic or the
// solve residual exceeds 1e-8.
std::vector<double> exact_visitation(const TabularMDP& mdp, const TabularPolicy& policy);

// Normalized policy value <d, r>; for gamma = 1 the stationary average reward.
double exact_policy_value(const TabularMDP& mdp, const TabularPolicy& policy);

// State-action values Q(s,a) solved exactly (gamma < 1 only).
std::vector<double> exact_q_values(const TabularMDP& mdp, const TabularPolicy& policy);

}  // namespace bdice
