#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bdice/data.hpp"
#include "bdice/posterior.hpp"

namespace bdice {

// Permutation of policy indices 0..N-1; position 0 holds the best policy.
struct Ranking {
  std::vector<int> order;

  bool operator==(const Ranking&) const = default;
};

enum class RankingScoreKind { precision_at_k, accuracy_at_k, correlation_at_k, regret_at_k };

struct RankingScoreSpec {
  RankingScoreKind kind = RankingScoreKind::regret_at_k;
  int k = 1;

  // Orientation is derived from the kind: regret is minimized, the ordinal
  // scores are maximized.
  bool maximize() const { return kind != RankingScoreKind::regret_at_k; }
  std::string label() const;
};

// Evaluates a ranking against groundtruth means. Ties in truth_means are
// broken toward the lower policy index. correlation@1 degenerates to an
// indicator of placing the true best policy first (Pearson needs variance).
double score_ranking(const Ranking& ranking, std::span<const double> truth_means,
                     const RankingScoreSpec& spec);

enum class SelectMode {
  exhaustive,       // all N! rankings, N <= 8
  set_enumeration,  // C(N,k) top-k sets; precision/regret only
  greedy_insertion  // documented heuristic for large N / order-sensitive scores
};

struct SelectionResult {
  Ranking ranking;
  double expected_score = 0.0;  // Monte Carlo average achieved on the draws
};

// Ranking-score simulation: picks the enumerated ranking whose Monte Carlo
// average score over the posterior draws is best w.r.t. the spec orientation.
// The same draws score every candidate; ties keep the lexicographically
// smallest permutation.
SelectionResult offline_select(const ValueSampleMatrix& samples,
                               const RankingScoreSpec& spec, SelectMode mode);

struct PointStatistic {
  enum class Kind { mean, mean_plus_std, mean_minus_std, quantile };
  Kind kind = Kind::mean;
  double q = 0.05;  // used by quantile only

  std::string label() const;
};

// ArgSortDescending of the per-policy statistic; ties toward lower index.
Ranking point_estimate_ranking(const ValueSampleMatrix& samples,
                               const PointStatistic& statistic);

struct BetaParams {
  double a0 = 1.0, b0 = 1.0;  // arm 0 posterior
  double a1 = 1.0, b1 = 1.0;  // arm 1 posterior
};

// Conjugate Beta-Bernoulli posterior over the two arm means; rejects data
// that is not from the two-armed bandit.
BetaParams bandit_beta_posterior(const TupleDataset& ds, double prior_a, double prior_b);

// Exact-Bayes reference for the bandit: each draw samples both arm means once
// and evaluates every target policy on them.
ValueSampleMatrix bandit_conjugate_oracle(const TupleDataset& ds,
                                          const std::vector<TabularPolicy>& targets,
                                          double prior_a, double prior_b, int num_draws,
                                          std::uint64_t seed);

std::string ranking_to_json(const Ranking& ranking,
                            const std::vector<std::string>& policy_ids,
                            double expected_score);

}  // namespace bdice
