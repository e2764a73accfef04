#include "bdice/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "bdice/rng.hpp"

namespace bdice {

namespace {

std::vector<int> argsort_desc(std::span<const double> values) {
  std::vector<int> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return values[a] > values[b]; });
  return idx;
}

void check_spec(const RankingScoreSpec& spec, int n) {
  if (spec.k < 1 || spec.k > n)
    throw std::invalid_argument("ranking score k outside [1, N]");
}

void check_permutation(const Ranking& ranking, int n) {
  if (static_cast<int>(ranking.order.size()) != n)
    throw std::invalid_argument("ranking is not a permutation of the policies");
  std::vector<char> seen(n, 0);
  for (int p : ranking.order) {
    if (p < 0 || p >= n || seen[p])
      throw std::invalid_argument("ranking is not a permutation of the policies");
    seen[p] = 1;
  }
}

// Everything score_ranking needs about one realization of the truth; shared
// by the per-draw scorer inside offline_select.
struct TruthView {
  std::span<const double> values;
  std::span<const int> rank_of;   // 0-based true rank per policy
  std::span<const char> in_topk;  // true top-k membership
  std::span<const int> sorted;    // policies in true descending order
  double max_value = 0.0;
};

double score_prefix(std::span<const int> prefix, const TruthView& truth,
                    const RankingScoreSpec& spec) {
  const int k = spec.k;
  switch (spec.kind) {
    case RankingScoreKind::precision_at_k: {
      int hits = 0;
      for (int j = 0; j < k; ++j) hits += truth.in_topk[prefix[j]];
      return static_cast<double>(hits) / k;
    }
    case RankingScoreKind::accuracy_at_k: {
      int hits = 0;
      for (int j = 0; j < k; ++j) hits += prefix[j] == truth.sorted[j];
      return static_cast<double>(hits) / k;
    }
    case RankingScoreKind::correlation_at_k: {
      if (k == 1) return truth.rank_of[prefix[0]] == 0 ? 1.0 : 0.0;
      // Pearson between positions 1..k and the true ranks of the policies
      // placed there
      const double mean_x = (k + 1) / 2.0;
      double mean_y = 0.0;
      for (int j = 0; j < k; ++j) mean_y += truth.rank_of[prefix[j]] + 1;
      mean_y /= k;
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (int j = 0; j < k; ++j) {
        const double dx = (j + 1) - mean_x;
        const double dy = (truth.rank_of[prefix[j]] + 1) - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
      }
      if (sxx == 0.0 || syy == 0.0) return 0.0;
      return sxy / std::sqrt(sxx * syy);
    }
    case RankingScoreKind::regret_at_k: {
      double best = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) best = std::max(best, truth.values[prefix[j]]);
      return truth.max_value - best;
    }
  }
  throw std::invalid_argument("unknown ranking score kind");
}

// Precomputed TruthView data for every posterior draw.
struct DrawTable {
  int n = 0;
  int draws = 0;
  std::vector<double> values;  // draws x n
  std::vector<int> rank_of;    // draws x n
  std::vector<char> in_topk;   // draws x n
  std::vector<int> sorted;     // draws x n
  std::vector<double> max_value;

  TruthView view(int d) const {
    const std::size_t off = static_cast<std::size_t>(d) * n;
    return {{values.data() + off, static_cast<std::size_t>(n)},
            {rank_of.data() + off, static_cast<std::size_t>(n)},
            {in_topk.data() + off, static_cast<std::size_t>(n)},
            {sorted.data() + off, static_cast<std::size_t>(n)},
            max_value[d]};
  }
};

DrawTable build_draw_table(const ValueSampleMatrix& samples, int k) {
  DrawTable table;
  table.n = samples.num_policies();
  table.draws = samples.num_draws();
  const int n = table.n;
  table.values.resize(static_cast<std::size_t>(table.draws) * n);
  table.rank_of.resize(table.values.size());
  table.in_topk.assign(table.values.size(), 0);
  table.sorted.resize(table.values.size());
  table.max_value.resize(table.draws);
  std::vector<double> column(n);
  for (int d = 0; d < table.draws; ++d) {
    const std::size_t off = static_cast<std::size_t>(d) * n;
    for (int i = 0; i < n; ++i) {
      column[i] = samples.samples(i, d);
      table.values[off + i] = column[i];
    }
    const auto order = argsort_desc(column);
    for (int pos = 0; pos < n; ++pos) {
      table.sorted[off + pos] = order[pos];
      table.rank_of[off + order[pos]] = pos;
      if (pos < k) table.in_topk[off + order[pos]] = 1;
    }
    table.max_value[d] = column[order[0]];
  }
  return table;
}

double expected_prefix_score(std::span<const int> prefix, const DrawTable& table,
                             const RankingScoreSpec& spec) {
  double acc = 0.0;
  for (int d = 0; d < table.draws; ++d) acc += score_prefix(prefix, table.view(d), spec);
  return acc / table.draws;
}

std::uint64_t prefix_key(std::span<const int> prefix) {
  std::uint64_t key = 1;
  for (int p : prefix) key = key * 64 + static_cast<std::uint64_t>(p) + 1;
  return key;
}

bool better(double candidate, double best, bool maximize) {
  return maximize ? candidate > best : candidate < best;
}

}  // namespace

std::string RankingScoreSpec::label() const {
  const char* name = "";
  switch (kind) {
    case RankingScoreKind::precision_at_k: name = "precision"; break;
    case RankingScoreKind::accuracy_at_k: name = "accuracy"; break;
    case RankingScoreKind::correlation_at_k: name = "correlation"; break;
    case RankingScoreKind::regret_at_k: name = "regret"; break;
  }
  return std::string(name) + "@" + std::to_string(k);
}

std::string PointStatistic::label() const {
  switch (kind) {
    case Kind::mean: return "mean";
    case Kind::mean_plus_std: return "mean_plus_std";
    case Kind::mean_minus_std: return "mean_minus_std";
    case Kind::quantile: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "quantile(%.4g)", q);
      return buf;
    }
  }
  return "unknown";
}

double score_ranking(const Ranking& ranking, std::span<const double> truth_means,
                     const RankingScoreSpec& spec) {
  const int n = static_cast<int>(truth_means.size());
  check_spec(spec, n);
  check_permutation(ranking, n);
  for (double v : truth_means)
    if (!std::isfinite(v)) throw std::invalid_argument("truth means must be finite");

  const auto sorted = argsort_desc(truth_means);
  std::vector<int> rank_of(n);
  std::vector<char> in_topk(n, 0);
  for (int pos = 0; pos < n; ++pos) {
    rank_of[sorted[pos]] = pos;
    if (pos < spec.k) in_topk[sorted[pos]] = 1;
  }
  const TruthView truth{truth_means,
                        rank_of,
                        in_topk,
                        sorted,
                        truth_means[sorted[0]]};
  return score_prefix({ranking.order.data(), static_cast<std::size_t>(spec.k)}, truth,
                      spec);
}

SelectionResult offline_select(const ValueSampleMatrix& samples,
                               const RankingScoreSpec& spec, SelectMode mode) {
  const int n = samples.num_policies();
  if (n < 1 || samples.num_draws() < 1)
    throw std::invalid_argument("empty sample matrix");
  check_spec(spec, n);
  const bool maximize = spec.maximize();
  const DrawTable table = build_draw_table(samples, spec.k);

  SelectionResult best;
  bool have_best = false;
  auto consider = [&](const std::vector<int>& order, double score) {
    if (!have_best || better(score, best.expected_score, maximize)) {
      best.ranking.order = order;
      best.expected_score = score;
      have_best = true;
    }
  };

  if (mode == SelectMode::exhaustive) {
    if (n > 8)
      throw std::invalid_argument("exhaustive enumeration is capped at 8 policies");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::unordered_map<std::uint64_t, double> memo;
    do {
      const std::span<const int> prefix(order.data(), spec.k);
      const std::uint64_t key = prefix_key(prefix);
      auto it = memo.find(key);
      if (it == memo.end())
        it = memo.emplace(key, expected_prefix_score(prefix, table, spec)).first;
      consider(order, it->second);
    } while (std::next_permutation(order.begin(), order.end()));
  } else if (mode == SelectMode::set_enumeration) {
    if (spec.kind != RankingScoreKind::precision_at_k &&
        spec.kind != RankingScoreKind::regret_at_k)
      throw std::invalid_argument(
          "set_enumeration applies only to scores invariant to order within "
          "the top k (precision, regret)");
    // combinations in lexicographic order; the canonical ranking (subset
    // ascending, remainder ascending) is then also lexicographically ordered,
    // matching the exhaustive tie-break
    std::vector<int> comb(spec.k);
    std::iota(comb.begin(), comb.end(), 0);
    double combos = 1.0;
    for (int j = 0; j < spec.k; ++j) combos *= static_cast<double>(n - j) / (j + 1);
    if (combos > 2e6)
      throw std::invalid_argument("set_enumeration would enumerate too many subsets");
    for (;;) {
      std::vector<int> order(comb.begin(), comb.end());
      std::vector<char> used(n, 0);
      for (int p : comb) used[p] = 1;
      for (int p = 0; p < n; ++p)
        if (!used[p]) order.push_back(p);
      consider(order, expected_prefix_score({order.data(),
                                             static_cast<std::size_t>(spec.k)},
                                            table, spec));
      // next combination
      int j = spec.k - 1;
      while (j >= 0 && comb[j] == n - spec.k + j) --j;
      if (j < 0) break;
      ++comb[j];
      for (int l = j + 1; l < spec.k; ++l) comb[l] = comb[l - 1] + 1;
    }
  } else {
    // greedy insertion: walk the policies in sampled-mean order, insert each
    // at the position that scores best with the not-yet-inserted policies
    // appended in mean order
    std::vector<double> means(n);
    for (int i = 0; i < n; ++i) means[i] = samples.samples.row(i).mean();
    const auto by_mean = argsort_desc(means);
    std::vector<int> partial;
    for (int step = 0; step < n; ++step) {
      const int candidate = by_mean[step];
      std::vector<int> chosen;
      double chosen_score = 0.0;
      bool have = false;
      for (std::size_t pos = 0; pos <= partial.size(); ++pos) {
        std::vector<int> trial = partial;
        trial.insert(trial.begin() + pos, candidate);
        std::vector<int> full = trial;
        for (int later = step + 1; later < n; ++later) full.push_back(by_mean[later]);
        const double score = expected_prefix_score(
            {full.data(), static_cast<std::size_t>(spec.k)}, table, spec);
        if (!have || better(score, chosen_score, maximize)) {
          chosen = std::move(trial);
          chosen_score = score;
          have = true;
        }
      }
      partial = std::move(chosen);
    }
    consider(partial, expected_prefix_score({partial.data(),
                                             static_cast<std::size_t>(spec.k)},
                                            table, spec));
  }
  return best;
}

Ranking point_estimate_ranking(const ValueSampleMatrix& samples,
                               const PointStatistic& statistic) {
  const int n = samples.num_policies();
  const int d = samples.num_draws();
  if (n < 1 || d < 1) throw std::invalid_argument("empty sample matrix");
  std::vector<double> stat(n);
  std::vector<double> row(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) row[j] = samples.samples(i, j);
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / d;
    double sd = 0.0;
    if (d > 1) {
      double ss = 0.0;
      for (double v : row) ss += (v - mean) * (v - mean);
      sd = std::sqrt(ss / (d - 1));
    }
    switch (statistic.kind) {
      case PointStatistic::Kind::mean: stat[i] = mean; break;
      case PointStatistic::Kind::mean_plus_std: stat[i] = mean + sd; break;
      case PointStatistic::Kind::mean_minus_std: stat[i] = mean - sd; break;
      case PointStatistic::Kind::quantile: {
        if (!(statistic.q > 0.0 && statistic.q < 1.0))
          throw std::invalid_argument("quantile level outside (0,1)");
        std::sort(row.begin(), row.end());
        stat[i] = empirical_quantile(row, statistic.q);
        break;
      }
    }
  }
  return Ranking{argsort_desc(stat)};
}

BetaParams bandit_beta_posterior(const TupleDataset& ds, double prior_a, double prior_b) {
  if (prior_a <= 0.0 || prior_b <= 0.0)
    throw std::invalid_argument("Beta prior parameters must be positive");
  BetaParams params{prior_a, prior_b, prior_a, prior_b};
  for (const Transition& t : ds.tuples) {
    if (t.state != 0 || t.next_state != 0 || (t.action != 0 && t.action != 1) ||
        (t.reward != 0.0 && t.reward != 1.0))
      throw std::invalid_argument(
          "conjugate oracle needs two-armed bandit data with binary rewards");
    double& a = t.action == 0 ? params.a0 : params.a1;
    double& b = t.action == 0 ? params.b0 : params.b1;
    if (t.reward == 1.0)
      a += 1.0;
    else
      b += 1.0;
  }
  return params;
}

ValueSampleMatrix bandit_conjugate_oracle(const TupleDataset& ds,
                                          const std::vector<TabularPolicy>& targets,
                                          double prior_a, double prior_b, int num_draws,
                                          std::uint64_t seed) {
  if (targets.empty()) throw std::invalid_argument("no target policies");
  if (num_draws < 1) throw std::invalid_argument("num_draws must be positive");
  for (const auto& pi : targets)
    if (pi.num_states != 1 || pi.num_actions != 2)
      throw std::invalid_argument("conjugate oracle targets must be bandit policies");
  const BetaParams params = bandit_beta_posterior(ds, prior_a, prior_b);

  ValueSampleMatrix out;
  out.samples.resize(static_cast<int>(targets.size()), num_draws);
  out.policy_ids.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i)
    out.policy_ids.push_back("policy_" + std::to_string(i));
  Rng rng(seed);
  for (int d = 0; d < num_draws; ++d) {
    const double p0 = rng.beta(params.a0, params.b0);
    const double p1 = rng.beta(params.a1, params.b1);
    for (std::size_t i = 0; i < targets.size(); ++i)
      out.samples(static_cast<int>(i), d) =
          targets[i].prob(0, 0) * p0 + targets[i].prob(0, 1) * p1;
  }
  return out;
}

std::string ranking_to_json(const Ranking& ranking,
                            const std::vector<std::string>& policy_ids,
                            double expected_score) {
  nlohmann::json order = nlohmann::json::array();
  for (int p : ranking.order)
    order.push_back(p >= 0 && static_cast<std::size_t>(p) < policy_ids.size()
                        ? nlohmann::json(policy_ids[p])
                        : nlohmann::json(p));
  return nlohmann::json{{"order", order}, {"expected_score", expected_score}}.dump();
}

}  // namespace bdice
