#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "bdice/selection.hpp"
#include "bdice/rng.hpp"

using namespace bdice;

namespace {

// Straightforward second implementation of the ranking scores, written from
// the definitions with no shared code, used as the oracle for random cases.
double reference_score(const std::vector<int>& order, const std::vector<double>& truth,
                       RankingScoreKind kind, int k) {
  const int n = static_cast<int>(truth.size());
  std::vector<int> true_sorted(n);
  std::iota(true_sorted.begin(), true_sorted.end(), 0);
  std::sort(true_sorted.begin(), true_sorted.end(), [&](int a, int b) {
    if (truth[a] != truth[b]) return truth[a] > truth[b];
    return a < b;
  });
  if (kind == RankingScoreKind::precision_at_k) {
    int hits = 0;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        if (order[i] == true_sorted[j]) ++hits;
    return double(hits) / k;
  }
  if (kind == RankingScoreKind::accuracy_at_k) {
    int hits = 0;
    for (int i = 0; i < k; ++i)
      if (order[i] == true_sorted[i]) ++hits;
    return double(hits) / k;
  }
  if (kind == RankingScoreKind::correlation_at_k) {
    std::vector<double> xs, ys;
    for (int i = 0; i < k; ++i) {
      xs.push_back(i + 1.0);
      int rank = 0;
      while (true_sorted[rank] != order[i]) ++rank;
      ys.push_back(rank + 1.0);
    }
    if (k == 1) return ys[0] == 1.0 ? 1.0 : 0.0;
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / k;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / k;
    double sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < k; ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
      syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
  }
  double best_all = *std::max_element(truth.begin(), truth.end());
  double best_topk = -1e300;
  for (int i = 0; i < k; ++i) best_topk = std::max(best_topk, truth[order[i]]);
  return best_all - best_topk;
}

ValueSampleMatrix matrix_from(const std::vector<std::vector<double>>& rows) {
  ValueSampleMatrix out;
  out.samples.resize(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.policy_ids.push_back("p" + std::to_string(i));
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      out.samples(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  }
  return out;
}

TabularPolicy bandit_pi(double alpha) {
  TabularPolicy pi;
  pi.num_states = 1;
  pi.num_actions = 2;
  pi.probs = {alpha, 1.0 - alpha};
  return pi;
}

}  // namespace

TEST_CASE("score_ranking pinned examples") {
  const std::vector<double> truth{3.0, 2.0, 1.0};
  const Ranking perfect{{0, 1, 2}};
  CHECK(score_ranking(perfect, truth, {RankingScoreKind::precision_at_k, 2}) == 1.0);
  CHECK(score_ranking(perfect, truth, {RankingScoreKind::accuracy_at_k, 2}) == 1.0);
  CHECK(score_ranking(perfect, truth, {RankingScoreKind::regret_at_k, 2}) == 0.0);

  const Ranking reversed{{2, 1, 0}};
  CHECK(score_ranking(reversed, truth, {RankingScoreKind::precision_at_k, 1}) == 0.0);
  CHECK(score_ranking(reversed, truth, {RankingScoreKind::regret_at_k, 1}) == 2.0);

  const Ranking second_first{{1, 0, 2}};
  CHECK(score_ranking(second_first, truth, {RankingScoreKind::regret_at_k, 1}) == 1.0);

  CHECK_THROWS_AS(score_ranking(perfect, truth, {RankingScoreKind::regret_at_k, 4}),
                  std::invalid_argument);
  CHECK_THROWS_AS(score_ranking(Ranking{{0, 0, 2}}, truth,
                                {RankingScoreKind::regret_at_k, 1}),
                  std::invalid_argument);
}

TEST_CASE("score_ranking matches an independent reference on random cases") {
  Rng rng(404);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 4;
    std::vector<double> truth(n);
    for (auto& v : truth) v = rng.uniform01();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[rng.below(i + 1)]);
    const int k = 1 + static_cast<int>(rng.below(n));
    for (auto kind : {RankingScoreKind::precision_at_k, RankingScoreKind::accuracy_at_k,
                      RankingScoreKind::correlation_at_k, RankingScoreKind::regret_at_k}) {
      const double mine = score_ranking(Ranking{order}, truth, {kind, k});
      const double ref = reference_score(order, truth, kind, k);
      CHECK(mine == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("ordinal scores are invariant to monotone transforms, regret is affine") {
  Rng rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 5;
    std::vector<double> truth(n);
    for (auto& v : truth) v = rng.uniform01();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[rng.below(i + 1)]);
    const int k = 1 + static_cast<int>(rng.below(n));

    std::vector<double> warped(n), affine(n);
    const double scale = 0.5 + 2.0 * rng.uniform01();
    const double shift = rng.normal();
    for (int i = 0; i < n; ++i) {
      warped[i] = std::exp(2.0 * truth[i]) + truth[i];  // strictly increasing
      affine[i] = scale * truth[i] + shift;
    }
    for (auto kind : {RankingScoreKind::precision_at_k, RankingScoreKind::accuracy_at_k,
                      RankingScoreKind::correlation_at_k}) {
      CHECK(score_ranking(Ranking{order}, truth, {kind, k}) ==
            doctest::Approx(score_ranking(Ranking{order}, warped, {kind, k})));
    }
    CHECK(score_ranking(Ranking{order}, affine, {RankingScoreKind::regret_at_k, k}) ==
          doctest::Approx(scale * score_ranking(Ranking{order}, truth,
                                                {RankingScoreKind::regret_at_k, k})));
  }
}

TEST_CASE("precision at k = N saturates for every permutation") {
  const std::vector<double> truth{0.4, 0.9, 0.1, 0.5};
  std::vector<int> order{0, 1, 2, 3};
  do {
    CHECK(score_ranking(Ranking{order}, truth, {RankingScoreKind::precision_at_k, 4}) ==
          1.0);
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST_CASE("offline_select on degenerate point masses follows the means") {
  const auto samples = matrix_from({{0.9, 0.9, 0.9}, {0.1, 0.1, 0.1}});
  const auto res = offline_select(samples, {RankingScoreKind::regret_at_k, 1},
                                  SelectMode::exhaustive);
  CHECK(res.ranking.order == std::vector<int>{0, 1});
  CHECK(res.expected_score == 0.0);
}

TEST_CASE("selection can deviate from the mean ranking under uncertainty") {
  // policy 0 is safe; policies 1 and 2 are perfectly anti-correlated coin
  // flips, so the best regret@2 portfolio pairs them even though the mean
  // ranking keeps the safe policy in its top two
  std::vector<std::vector<double>> rows(3);
  for (int d = 0; d < 1000; ++d) {
    const bool heads = d % 2 == 0;
    rows[0].push_back(0.5);
    rows[1].push_back(heads ? 1.0 : 0.02);
    rows[2].push_back(heads ? 0.02 : 1.0);
  }
  const auto samples = matrix_from(rows);
  const auto mean_rank = point_estimate_ranking(samples, {PointStatistic::Kind::mean});
  CHECK(mean_rank.order == std::vector<int>{1, 2, 0});  // means 0.51, 0.51, 0.5

  const auto res = offline_select(samples, {RankingScoreKind::regret_at_k, 2},
                                  SelectMode::exhaustive);
  std::vector<int> top2(res.ranking.order.begin(), res.ranking.order.begin() + 2);
  std::sort(top2.begin(), top2.end());
  CHECK(top2 == std::vector<int>{1, 2});
  CHECK(res.expected_score == doctest::Approx(0.0));
}

TEST_CASE("exhaustive and set enumeration agree for set-based scores") {
  Rng rng(12);
  std::vector<std::vector<double>> rows(3);
  for (auto& row : rows) {
    row.resize(10000);
    const double mu = rng.uniform01();
    const double sd = 0.05 + 0.2 * rng.uniform01();
    for (auto& v : row) v = mu + sd * rng.normal();
  }
  const auto samples = matrix_from(rows);
  for (auto kind : {RankingScoreKind::precision_at_k, RankingScoreKind::regret_at_k})
    for (int k = 1; k <= 3; ++k) {
      const RankingScoreSpec spec{kind, k};
      const auto ex = offline_select(samples, spec, SelectMode::exhaustive);
      const auto st = offline_select(samples, spec, SelectMode::set_enumeration);
      CHECK(ex.ranking.order == st.ranking.order);
      CHECK(ex.expected_score == st.expected_score);
    }
  CHECK_THROWS_AS(offline_select(samples, {RankingScoreKind::accuracy_at_k, 2},
                                 SelectMode::set_enumeration),
                  std::invalid_argument);
}

TEST_CASE("offline_select output is optimal among enumerated rankings") {
  Rng rng(33);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 4;
    std::vector<std::vector<double>> rows(n);
    for (auto& row : rows) {
      row.resize(400);
      const double mu = rng.uniform01();
      for (auto& v : row) v = mu + 0.2 * rng.normal();
    }
    const auto samples = matrix_from(rows);
    for (auto kind : {RankingScoreKind::precision_at_k, RankingScoreKind::accuracy_at_k,
                      RankingScoreKind::correlation_at_k, RankingScoreKind::regret_at_k})
      for (int k : {1, 2, 4}) {
        const RankingScoreSpec spec{kind, k};
        const auto res = offline_select(samples, spec, SelectMode::exhaustive);
        // re-score every permutation through the public scorer on the same draws
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::vector<double> column(n);
        do {
          double acc = 0.0;
          for (int d = 0; d < samples.num_draws(); ++d) {
            for (int i = 0; i < n; ++i) column[i] = samples.samples(i, d);
            acc += score_ranking(Ranking{order}, column, spec);
          }
          acc /= samples.num_draws();
          if (spec.maximize())
            CHECK(acc <= res.expected_score);
          else
            CHECK(acc >= res.expected_score);
        } while (std::next_permutation(order.begin(), order.end()));
      }
  }
}

TEST_CASE("greedy insertion matches exhaustive on easy instances") {
  Rng rng(55);
  std::vector<std::vector<double>> rows(5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].resize(2000);
    for (auto& v : rows[i]) v = 0.1 * i + 0.02 * rng.normal();
  }
  const auto samples = matrix_from(rows);
  for (auto kind : {RankingScoreKind::regret_at_k, RankingScoreKind::accuracy_at_k}) {
    const RankingScoreSpec spec{kind, 2};
    const auto greedy = offline_select(samples, spec, SelectMode::greedy_insertion);
    const auto ex = offline_select(samples, spec, SelectMode::exhaustive);
    CHECK(greedy.expected_score == doctest::Approx(ex.expected_score).epsilon(1e-9));
  }
}

TEST_CASE("offline_select rejects oversized or empty problems") {
  std::vector<std::vector<double>> rows(9, std::vector<double>(4, 0.5));
  const auto big = matrix_from(rows);
  CHECK_THROWS_AS(offline_select(big, {RankingScoreKind::regret_at_k, 1},
                                 SelectMode::exhaustive),
                  std::invalid_argument);
  // nine policies are fine for set enumeration and greedy insertion
  CHECK_NOTHROW(offline_select(big, {RankingScoreKind::regret_at_k, 2},
                               SelectMode::set_enumeration));
  CHECK_NOTHROW(offline_select(big, {RankingScoreKind::accuracy_at_k, 2},
                               SelectMode::greedy_insertion));

  ValueSampleMatrix empty;
  CHECK_THROWS_AS(offline_select(empty, {RankingScoreKind::regret_at_k, 1},
                                 SelectMode::exhaustive),
                  std::invalid_argument);

  const auto two = matrix_from({{0.1, 0.2}, {0.3, 0.1}});
  CHECK_THROWS_AS(offline_select(two, {RankingScoreKind::regret_at_k, 3},
                                 SelectMode::exhaustive),
                  std::invalid_argument);
}

TEST_CASE("point estimate rankings") {
  // zero variance: all statistics give the same ranking
  const auto degenerate = matrix_from({{0.2, 0.2}, {0.8, 0.8}, {0.5, 0.5}});
  const std::vector<int> expect{1, 2, 0};
  for (auto kind : {PointStatistic::Kind::mean, PointStatistic::Kind::mean_plus_std,
                    PointStatistic::Kind::mean_minus_std})
    CHECK(point_estimate_ranking(degenerate, {kind}).order == expect);
  CHECK(point_estimate_ranking(degenerate, {PointStatistic::Kind::quantile, 0.05}).order ==
        expect);

  // means (0.5, 0.6), stds (0.3, 0.0)
  std::vector<std::vector<double>> rows(2);
  Rng rng(3);
  for (int d = 0; d < 20000; ++d) {
    rows[0].push_back(0.5 + 0.3 * rng.normal());
    rows[1].push_back(0.6);
  }
  const auto samples = matrix_from(rows);
  CHECK(point_estimate_ranking(samples, {PointStatistic::Kind::mean_minus_std}).order ==
        std::vector<int>{1, 0});
  CHECK(point_estimate_ranking(samples, {PointStatistic::Kind::mean_plus_std}).order ==
        std::vector<int>{0, 1});
}

TEST_CASE("quantile ranking matches mean-minus-std for common-sd Gaussians") {
  Rng rng(91);
  int agree = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const int n = 4;
    std::vector<std::vector<double>> rows(n);
    const double sd = 0.1 + 0.2 * rng.uniform01();  // shared across policies
    for (auto& row : rows) {
      row.resize(40000);
      const double mu = rng.uniform01();
      for (auto& v : row) v = mu + sd * rng.normal();
    }
    const auto samples = matrix_from(rows);
    const auto by_quantile =
        point_estimate_ranking(samples, {PointStatistic::Kind::quantile, 0.05});
    const auto by_lower =
        point_estimate_ranking(samples, {PointStatistic::Kind::mean_minus_std});
    agree += by_quantile.order == by_lower.order ? 1 : 0;
  }
  CHECK(agree >= 95);
}

TEST_CASE("zero-variance matrices: offline_select and mean ranking agree on top-1") {
  const auto samples = matrix_from({{0.3, 0.3}, {0.7, 0.7}, {0.5, 0.5}});
  const auto mean_top = point_estimate_ranking(samples, {PointStatistic::Kind::mean});
  for (auto kind : {RankingScoreKind::precision_at_k, RankingScoreKind::accuracy_at_k,
                    RankingScoreKind::correlation_at_k, RankingScoreKind::regret_at_k}) {
    const auto res = offline_select(samples, {kind, 1}, SelectMode::exhaustive);
    CHECK(res.ranking.order[0] == mean_top.order[0]);
  }
  // at k >= 2 the order-sensitive scores still pin position 1; regret@k does
  // not (every top-k set containing the best policy ties at zero regret and
  // the lexicographic tie-break takes over)
  for (auto kind : {RankingScoreKind::accuracy_at_k, RankingScoreKind::correlation_at_k,
                    RankingScoreKind::precision_at_k}) {
    const auto res = offline_select(samples, {kind, 2}, SelectMode::exhaustive);
    CHECK(res.ranking.order[0] == mean_top.order[0]);
  }
}

TEST_CASE("conjugate bandit posterior arithmetic") {
  const auto mdp = build_bandit(1.0, 0.0);
  PolicyFamilySpec spec;
  spec.family = PolicyFamily::bandit_alpha;
  spec.alpha_or_epsilon = 1.0;
  const auto always0 = make_policy(mdp, spec);
  const auto ds = sample_dataset(mdp, always0, 50, 20, 5, "b");  // 1000 arm-0 wins
  const auto params = bandit_beta_posterior(ds, 1.0, 1.0);
  CHECK(params.a0 == 1001.0);
  CHECK(params.b0 == 1.0);
  CHECK(params.a1 == 1.0);
  CHECK(params.b1 == 1.0);
  // posterior mean of arm 0 is 1001/1002
  const auto vsm = bandit_conjugate_oracle(ds, {bandit_pi(1.0)}, 1.0, 1.0, 20000, 9);
  CHECK(vsm.samples.row(0).mean() == doctest::Approx(1001.0 / 1002.0).epsilon(2e-4));
}

TEST_CASE("conjugate oracle prior symmetry and consistency") {
  // empty data: draws for both arms are exchangeable under a symmetric prior
  TupleDataset empty;
  empty.meta = {"bandit(0.7,0.3)", "", 0.99, 0, 1, 1, 2};
  const auto vsm =
      bandit_conjugate_oracle(empty, {bandit_pi(1.0), bandit_pi(0.0)}, 2.0, 2.0, 40000, 3);
  CHECK(vsm.samples.row(0).mean() == doctest::Approx(0.5).epsilon(0.01));
  CHECK(vsm.samples.row(1).mean() == doctest::Approx(0.5).epsilon(0.01));

  // consistency: posterior mean approaches alpha p0_hat + (1-alpha) p1_hat
  const auto mdp = build_bandit(0.7, 0.3);
  PolicyFamilySpec bspec;
  bspec.family = PolicyFamily::bandit_alpha;
  bspec.alpha_or_epsilon = 0.5;
  const auto behavior = make_policy(mdp, bspec);
  const auto ds = sample_dataset(mdp, behavior, 2000, 20, 8, "b");
  double s0 = 0, n0 = 0, s1 = 0, n1 = 0;
  for (const auto& t : ds.tuples) {
    if (t.action == 0) {
      s0 += t.reward;
      n0 += 1;
    } else {
      s1 += t.reward;
      n1 += 1;
    }
  }
  const double alpha = 0.85;
  const double plug_in = alpha * s0 / n0 + (1 - alpha) * s1 / n1;
  const auto vsm2 = bandit_conjugate_oracle(ds, {bandit_pi(alpha)}, 1.0, 1.0, 20000, 4);
  CHECK(vsm2.samples.row(0).mean() == doctest::Approx(plug_in).epsilon(0.005));

  // non-bandit data is rejected
  TupleDataset bad = empty;
  bad.tuples.push_back({0, 0, 0, 0.5, 0});
  CHECK_THROWS_AS(bandit_conjugate_oracle(bad, {bandit_pi(1.0)}, 1, 1, 10, 1),
                  std::invalid_argument);
}

TEST_CASE("ranking serialization") {
  const Ranking r{{2, 0, 1}};
  const auto text = ranking_to_json(r, {"a", "b", "c"}, 0.125);
  CHECK(text == R"({"expected_score":0.125,"order":["c","a","b"]})");
}
