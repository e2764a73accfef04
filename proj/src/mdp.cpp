#include "bdice/mdp.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace bdice {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

std::string format_id(const char* fmt, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, a, b);
  return buf;
}

// S x S chain induced by the policy: P[s][s'] = sum_a pi(a|s) T(s'|s,a).
Eigen::MatrixXd policy_chain(const TabularMDP& mdp, const TabularPolicy& policy) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const double pa = policy.prob(s, a);
      if (pa == 0.0) continue;
      const auto row = mdp.trans_row(s, a);
      for (int sp = 0; sp < S; ++sp) P(s, sp) += pa * row[sp];
    }
  return P;
}

void check_dims(const TabularMDP& mdp, const TabularPolicy& policy) {
  require(policy.num_states == mdp.num_states && policy.num_actions == mdp.num_actions,
          "policy dimensions do not match the MDP");
}

// State marginal d(s) of the discounted visitation; d(s,a) = d(s) pi(a|s).
Eigen::VectorXd state_visitation(const TabularMDP& mdp, const TabularPolicy& policy) {
  const int S = mdp.num_states;
  const Eigen::MatrixXd P = policy_chain(mdp, policy);
  Eigen::VectorXd mu0 = Eigen::Map<const Eigen::VectorXd>(mdp.initial_dist.data(), S);
  Eigen::VectorXd d;
  if (mdp.gamma < 1.0) {
    const Eigen::MatrixXd A =
        Eigen::MatrixXd::Identity(S, S) - mdp.gamma * P.transpose();
    const Eigen::VectorXd b = (1.0 - mdp.gamma) * mu0;
    d = A.partialPivLu().solve(b);
    const double resid = (A * d - b).cwiseAbs().maxCoeff();
    if (!d.allFinite() || resid > 1e-8)
      throw std::runtime_error("visitation solve failed: residual " +
                               std::to_string(resid));
  } else {
    // Stationary distribution: the null space of (I - P^T) must be one
    // dimensional, otherwise the chain has several recurrent classes and the
    // limiting average depends on the start state.
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S) - P.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() != S - 1)
      throw std::runtime_error(
          "stationary distribution is not unique (gamma = 1 chain not ergodic "
          "under this policy)");
    d = lu.kernel().col(0);
    const double total = d.sum();
    if (std::abs(total) < 1e-12)
      throw std::runtime_error("stationary distribution solve failed (degenerate kernel)");
    d /= total;
    const double resid = (A * d).cwiseAbs().maxCoeff();
    if (!d.allFinite() || resid > 1e-8 || d.minCoeff() < -1e-10)
      throw std::runtime_error("stationary distribution solve failed: residual " +
                               std::to_string(resid));
    d = d.cwiseMax(0.0);
  }
  return d;
}

}  // namespace

void TabularMDP::validate() const {
  require(num_states > 0 && num_actions > 0, "num_states/num_actions must be positive");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(transition.size() == static_cast<std::size_t>(num_states) * num_actions *
                                   num_states,
          "transition tensor has wrong size");
  require(reward_mean.size() == static_cast<std::size_t>(num_states) * num_actions,
          "reward tensor has wrong size");
  require(initial_dist.size() == static_cast<std::size_t>(num_states),
          "initial distribution has wrong size");
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) {
      double sum = 0.0;
      for (double p : trans_row(s, a)) {
        require(p >= 0.0, "negative transition probability");
        sum += p;
      }
      require(std::abs(sum - 1.0) <= 1e-9, "transition row does not sum to 1");
    }
  double sum0 = 0.0;
  for (double p : initial_dist) {
    require(p >= 0.0, "negative initial probability");
    sum0 += p;
  }
  require(std::abs(sum0 - 1.0) <= 1e-9, "initial distribution does not sum to 1");
  if (reward_kind == RewardKind::bernoulli)
    for (double r : reward_mean)
      require(r >= 0.0 && r <= 1.0, "bernoulli reward mean outside [0,1]");
}

void TabularPolicy::validate() const {
  require(num_states > 0 && num_actions > 0, "empty policy");
  require(probs.size() == static_cast<std::size_t>(num_states) * num_actions,
          "policy tensor has wrong size");
  for (int s = 0; s < num_states; ++s) {
    double sum = 0.0;
    for (double p : row(s)) {
      require(p >= 0.0, "negative action probability");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "policy row does not sum to 1");
  }
}

std::string PolicyFamilySpec::label() const {
  const char* name = family == PolicyFamily::bandit_alpha ? "bandit_alpha" : "epsilon_greedy";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s(%.4g)", name, alpha_or_epsilon);
  return buf;
}

TabularMDP build_bandit(double p_opt, double p_sub, double gamma) {
  require(p_opt >= 0.0 && p_opt <= 1.0 && p_sub >= 0.0 && p_sub <= 1.0,
          "arm means must lie in [0,1]");
  require(p_opt >= p_sub, "arm 0 must be the optimal arm (p_opt >= p_sub)");
  TabularMDP mdp;
  mdp.num_states = 1;
  mdp.num_actions = 2;
  mdp.transition = {1.0, 1.0};  // self-loops
  mdp.reward_mean = {p_opt, p_sub};
  mdp.reward_kind = RewardKind::bernoulli;
  mdp.initial_dist = {1.0};
  mdp.gamma = gamma;
  mdp.id = format_id("bandit(%.4g,%.4g)", p_opt, p_sub);
  mdp.validate();
  return mdp;
}

namespace {

TabularMDP build_frozenlake(double slip, double gamma) {
  constexpr int kRows = 4;
  constexpr int kCols = 4;
  const char* map =
      "SFFF"
      "FHFH"
      "FFFH"
      "HFFG";
  const int S = kRows * kCols;
  const int A = 4;  // left, down, right, up
  const int dr[4] = {0, 1, 0, -1};
  const int dcol[4] = {-1, 0, 1, 0};

  TabularMDP mdp;
  mdp.num_states = S;
  mdp.num_actions = A;
  mdp.gamma = gamma;
  mdp.reward_kind = RewardKind::deterministic;
  mdp.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
  mdp.reward_mean.assign(static_cast<std::size_t>(S) * A, 0.0);
  mdp.initial_dist.assign(S, 0.0);
  mdp.initial_dist[0] = 1.0;

  const int goal = 15;
  auto terminal = [&](int s) { return map[s] == 'H' || map[s] == 'G'; };
  auto step = [&](int s, int dir) {
    const int r = s / kCols;
    const int c = s % kCols;
    const int nr = r + dr[dir];
    const int nc = c + dcol[dir];
    if (nr < 0 || nr >= kRows || nc < 0 || nc >= kCols) return s;
    return nr * kCols + nc;
  };

  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double* row =
          mdp.transition.data() + (static_cast<std::size_t>(s) * A + a) * S;
      if (terminal(s)) {
        // infinite-horizon wrap: re-enter through the initial distribution
        for (int sp = 0; sp < S; ++sp) row[sp] = mdp.initial_dist[sp];
        continue;
      }
      row[step(s, a)] += 1.0 - slip;
      row[step(s, (a + 1) % 4)] += slip / 2.0;
      row[step(s, (a + 3) % 4)] += slip / 2.0;
      mdp.reward_mean[static_cast<std::size_t>(s) * A + a] = row[goal];
    }
  mdp.id = format_id("frozenlake(slip=%.4g)", slip, 0);
  mdp.validate();
  return mdp;
}

TabularMDP build_taxi(double slip, double gamma) {
  constexpr int kGrid = 5;
  constexpr int kPass = 5;  // four depots + in-taxi
  constexpr int kDest = 4;
  const int S = kGrid * kGrid * kPass * kDest;  // 500
  const int A = 6;  // south, north, east, west, pickup, dropoff
  const std::array<std::pair<int, int>, 4> depots = {
      {{0, 0}, {0, 4}, {4, 0}, {4, 3}}};
  // vertical walls between (r,c) and (r,c+1)
  const std::array<std::pair<int, int>, 6> walls = {
      {{0, 1}, {1, 1}, {3, 0}, {3, 2}, {4, 0}, {4, 2}}};

  auto blocked = [&](int r, int c, int cnext) {
    const int lo = std::min(c, cnext);
    for (const auto& [wr, wc] : walls)
      if (wr == r && wc == lo) return true;
    return false;
  };
  auto encode = [&](int r, int c, int pass, int dest) {
    return ((r * kGrid + c) * kPass + pass) * kDest + dest;
  };
  auto move = [&](int r, int c, int dir) {
    // 0 south, 1 north, 2 east, 3 west
    int nr = r, nc = c;
    if (dir == 0) nr = std::min(r + 1, kGrid - 1);
    if (dir == 1) nr = std::max(r - 1, 0);
    if (dir == 2) nc = c + 1;
    if (dir == 3) nc = c - 1;
    if (nc < 0 || nc >= kGrid) nc = c;
    if (nc != c && blocked(r, c, nc)) nc = c;
    return std::pair<int, int>{nr, nc};
  };
  auto scale_reward = [](double r) { return (r + 10.0) / 30.0; };

  TabularMDP mdp;
  mdp.num_states = S;
  mdp.num_actions = A;
  mdp.gamma = gamma;
  mdp.reward_kind = RewardKind::deterministic;
  mdp.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
  mdp.reward_mean.assign(static_cast<std::size_t>(S) * A, 0.0);
  mdp.initial_dist.assign(S, 0.0);
  for (int r = 0; r < kGrid; ++r)
    for (int c = 0; c < kGrid; ++c)
      for (int pass = 0; pass < 4; ++pass)
        for (int dest = 0; dest < kDest; ++dest)
          if (pass != dest) mdp.initial_dist[encode(r, c, pass, dest)] = 1.0 / 300.0;

  for (int r = 0; r < kGrid; ++r)
    for (int c = 0; c < kGrid; ++c)
      for (int pass = 0; pass < kPass; ++pass)
        for (int dest = 0; dest < kDest; ++dest) {
          const int s = encode(r, c, pass, dest);
          for (int a = 0; a < A; ++a) {
            double* row =
                mdp.transition.data() + (static_cast<std::size_t>(s) * A + a) * S;
            double& rew = mdp.reward_mean[static_cast<std::size_t>(s) * A + a];
            if (a < 4) {
              rew = scale_reward(-1.0);
              auto land = [&](int dir, double p) {
                const auto [nr, nc] = move(r, c, dir);
                row[encode(nr, nc, pass, dest)] += p;
              };
              const int perp0 = a < 2 ? 2 : 0;
              const int perp1 = a < 2 ? 3 : 1;
              land(a, 1.0 - slip);
              land(perp0, slip / 2.0);
              land(perp1, slip / 2.0);
            } else if (a == 4) {  // pickup
              int npass = pass;
              double reward = -10.0;
              if (pass < 4 && depots[pass] == std::pair<int, int>{r, c}) {
                npass = 4;
                reward = -1.0;
              }
              rew = scale_reward(reward);
              row[encode(r, c, npass, dest)] = 1.0;
            } else {  // dropoff
              if (pass == 4 && depots[dest] == std::pair<int, int>{r, c}) {
                rew = scale_reward(20.0);
                for (int sp = 0; sp < S; ++sp) row[sp] = mdp.initial_dist[sp];
              } else if (pass == 4) {
                int at_depot = -1;
                for (int dpt = 0; dpt < 4; ++dpt)
                  if (depots[dpt] == std::pair<int, int>{r, c}) at_depot = dpt;
                if (at_depot >= 0) {
                  rew = scale_reward(-1.0);
                  row[encode(r, c, at_depot, dest)] = 1.0;
                } else {
                  rew = scale_reward(-10.0);
                  row[s] = 1.0;
                }
              } else {
                rew = scale_reward(-10.0);
                row[s] = 1.0;
              }
            }
          }
        }
  mdp.id = format_id("taxi(slip=%.4g)", slip, 0);
  mdp.validate();
  return mdp;
}

}  // namespace

TabularMDP build_gridworld(GridworldKind kind, double slip_prob, double gamma) {
  require(slip_prob >= 0.0 && slip_prob <= 1.0, "slip_prob must be a probability");
  switch (kind) {
    case GridworldKind::frozenlake4x4:
      return build_frozenlake(slip_prob, gamma);
    case GridworldKind::taxi5x5:
      return build_taxi(slip_prob, gamma);
  }
  throw std::invalid_argument("unknown gridworld kind");
}

TabularPolicy make_policy(const TabularMDP& mdp, const PolicyFamilySpec& spec) {
  require(spec.alpha_or_epsilon >= 0.0 && spec.alpha_or_epsilon <= 1.0,
          "alpha/epsilon must lie in [0,1]");
  TabularPolicy policy;
  policy.num_states = mdp.num_states;
  policy.num_actions = mdp.num_actions;
  if (spec.family == PolicyFamily::bandit_alpha) {
    require(mdp.num_states == 1 && mdp.num_actions == 2,
            "bandit_alpha policies require the two-armed bandit");
    policy.probs = {spec.alpha_or_epsilon, 1.0 - spec.alpha_or_epsilon};
  } else {
    require(spec.base_policy.has_value(),
            "epsilon_greedy requires a base policy (greedy reference)");
    const TabularPolicy& base = *spec.base_policy;
    require(base.num_states == mdp.num_states && base.num_actions == mdp.num_actions,
            "base policy dimensions do not match the MDP");
    const double eps = spec.alpha_or_epsilon;
    policy.probs.resize(base.probs.size());
    const double uniform = 1.0 / mdp.num_actions;
    for (std::size_t i = 0; i < base.probs.size(); ++i)
      policy.probs[i] = (1.0 - eps) * base.probs[i] + eps * uniform;
  }
  policy.validate();
  return policy;
}

TabularPolicy greedy_policy(const TabularMDP& mdp) {
  require(mdp.gamma < 1.0, "greedy_policy requires gamma < 1");
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  std::vector<int> action(S, 0);
  for (int iter = 0; iter < 1000; ++iter) {
    TabularPolicy current;
    current.num_states = S;
    current.num_actions = A;
    current.probs.assign(static_cast<std::size_t>(S) * A, 0.0);
    for (int s = 0; s < S; ++s)
      current.probs[static_cast<std::size_t>(s) * A + action[s]] = 1.0;
    // evaluate V under the current deterministic policy
    const Eigen::MatrixXd P = policy_chain(mdp, current);
    Eigen::VectorXd rpi(S);
    for (int s = 0; s < S; ++s) rpi(s) = mdp.reward(s, action[s]);
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S, S) - mdp.gamma * P;
    const Eigen::VectorXd V = M.partialPivLu().solve(rpi);
    bool changed = false;
    for (int s = 0; s < S; ++s) {
      int best = 0;
      double best_q = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        double q = mdp.reward(s, a);
        const auto row = mdp.trans_row(s, a);
        for (int sp = 0; sp < S; ++sp) q += mdp.gamma * row[sp] * V(sp);
        if (q > best_q + 1e-12) {
          best_q = q;
          best = a;
        }
      }
      if (best != action[s]) {
        action[s] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  TabularPolicy policy;
  policy.num_states = S;
  policy.num_actions = A;
  policy.probs.assign(static_cast<std::size_t>(S) * A, 0.0);
  for (int s = 0; s < S; ++s)
    policy.probs[static_cast<std::size_t>(s) * A + action[s]] = 1.0;
  return policy;
}

std::vector<double> exact_visitation(const TabularMDP& mdp, const TabularPolicy& policy) {
  check_dims(mdp, policy);
  const Eigen::VectorXd d = state_visitation(mdp, policy);
  std::vector<double> dsa(static_cast<std::size_t>(mdp.num_states) * mdp.num_actions);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a)
      dsa[static_cast<std::size_t>(s) * mdp.num_actions + a] = d(s) * policy.prob(s, a);
  return dsa;
}

double exact_policy_value(const TabularMDP& mdp, const TabularPolicy& policy) {
  const auto d = exact_visitation(mdp, policy);
  double value = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) value += d[i] * mdp.reward_mean[i];
  return value;
}

std::vector<double> exact_q_values(const TabularMDP& mdp, const TabularPolicy& policy) {
  check_dims(mdp, policy);
  require(mdp.gamma < 1.0, "Q values are defined here for gamma < 1 only");
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const Eigen::MatrixXd P = policy_chain(mdp, policy);
  Eigen::VectorXd rpi = Eigen::VectorXd::Zero(S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) rpi(s) += policy.prob(s, a) * mdp.reward(s, a);
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S, S) - mdp.gamma * P;
  const Eigen::VectorXd V = M.partialPivLu().solve(rpi);
  if (!V.allFinite()) throw std::runtime_error("Q solve failed");
  std::vector<double> q(static_cast<std::size_t>(S) * A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double val = mdp.reward(s, a);
      const auto row = mdp.trans_row(s, a);
      for (int sp = 0; sp < S; ++sp) val += mdp.gamma * row[sp] * V(sp);
      q[static_cast<std::size_t>(s) * A + a] = val;
    }
  return q;
}

}  // namespace bdice
