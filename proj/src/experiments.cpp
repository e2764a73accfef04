#include "bdice/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "bdice/data.hpp"
#include "bdice/rng.hpp"

namespace bdice {

using nlohmann::json;

namespace {

// Seed salts for the independent random streams inside one trial.
constexpr std::uint64_t kDataSalt = 1;
constexpr std::uint64_t kTrainSalt = 2;
constexpr std::uint64_t kDrawSalt = 3;
constexpr std::uint64_t kBootstrapSalt = 4;
constexpr std::uint64_t kOracleSalt = 5;
constexpr std::uint64_t kPerTargetStride = 100;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string kind_name(RankingScoreKind kind) {
  switch (kind) {
    case RankingScoreKind::precision_at_k: return "precision";
    case RankingScoreKind::accuracy_at_k: return "accuracy";
    case RankingScoreKind::correlation_at_k: return "correlation";
    case RankingScoreKind::regret_at_k: return "regret";
  }
  return "unknown";
}

bool parse_kind(const std::string& name, RankingScoreKind& out) {
  if (name == "precision") out = RankingScoreKind::precision_at_k;
  else if (name == "accuracy") out = RankingScoreKind::accuracy_at_k;
  else if (name == "correlation") out = RankingScoreKind::correlation_at_k;
  else if (name == "regret") out = RankingScoreKind::regret_at_k;
  else return false;
  return true;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

SelectMode pick_mode(const RankingScoreSpec& spec, int num_policies) {
  if (num_policies <= 8) return SelectMode::exhaustive;
  if (spec.kind == RankingScoreKind::precision_at_k ||
      spec.kind == RankingScoreKind::regret_at_k)
    return SelectMode::set_enumeration;
  return SelectMode::greedy_insertion;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

constexpr const char* kCoverageHeader = "method,n,confidence,trial,lo,hi,truth,covered";
constexpr const char* kSelectionHeader = "method,score_kind,k,n,trial,value";

}  // namespace

ConfigError::ConfigError(const std::vector<std::string>& errs)
    : std::runtime_error("configuration invalid:\n  - " + [&] {
        std::string joined;
        for (std::size_t i = 0; i < errs.size(); ++i) {
          if (i) joined += "\n  - ";
          joined += errs[i];
        }
        return joined;
      }()),
      errors(errs) {}

TabularMDP build_env(const EnvSpec& spec) {
  if (spec.kind == "bandit") return build_bandit(spec.p_opt, spec.p_sub, spec.gamma);
  if (spec.kind == "frozenlake")
    return build_gridworld(GridworldKind::frozenlake4x4, spec.slip, spec.gamma);
  if (spec.kind == "taxi")
    return build_gridworld(GridworldKind::taxi5x5, spec.slip, spec.gamma);
  throw std::invalid_argument("unknown environment id: " + spec.kind);
}

std::string PolicySpecConfig::label() const {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s(%.4g)", family.c_str(), value);
  return buf;
}

TabularPolicy resolve_policy(const TabularMDP& mdp, const PolicySpecConfig& spec) {
  PolicyFamilySpec fam;
  fam.alpha_or_epsilon = spec.value;
  if (spec.family == "bandit_alpha") {
    fam.family = PolicyFamily::bandit_alpha;
  } else if (spec.family == "epsilon_greedy") {
    fam.family = PolicyFamily::epsilon_greedy;
    if (mdp.gamma < 1.0) {
      fam.base_policy = greedy_policy(mdp);
    } else {
      TabularMDP discounted = mdp;
      discounted.gamma = 0.99;
      fam.base_policy = greedy_policy(discounted);
    }
  } else {
    throw std::invalid_argument("unknown policy family: " + spec.family);
  }
  return make_policy(mdp, fam);
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  auto grab = [&](const json& obj, const char* key, auto& slot, bool required = false) {
    if (!obj.contains(key)) {
      if (required) errors.push_back(std::string("missing required field: ") + key);
      return;
    }
    try {
      slot = obj.at(key).get<std::decay_t<decltype(slot)>>();
    } catch (const json::exception&) {
      errors.push_back(std::string("field has the wrong type: ") + key);
    }
  };

  grab(j, "experiment", cfg.experiment, true);
  if (j.contains("env") && j.at("env").is_object()) {
    const json& env = j.at("env");
    grab(env, "kind", cfg.env.kind, true);
    grab(env, "p_opt", cfg.env.p_opt);
    grab(env, "p_sub", cfg.env.p_sub);
    grab(env, "slip", cfg.env.slip);
    grab(env, "gamma", cfg.env.gamma);
  } else {
    errors.push_back("missing required object: env");
  }
  auto parse_policy = [&](const json& obj, const char* what) {
    PolicySpecConfig spec;
    grab(obj, "family", spec.family, true);
    if (obj.contains("alpha"))
      grab(obj, "alpha", spec.value);
    else if (obj.contains("epsilon"))
      grab(obj, "epsilon", spec.value);
    else
      errors.push_back(std::string(what) + " needs an alpha or epsilon field");
    return spec;
  };
  if (j.contains("behavior") && j.at("behavior").is_object())
    cfg.behavior = parse_policy(j.at("behavior"), "behavior");
  else
    errors.push_back("missing required object: behavior");
  if (j.contains("targets") && j.at("targets").is_array()) {
    for (const auto& t : j.at("targets")) cfg.targets.push_back(parse_policy(t, "target"));
  } else {
    errors.push_back("missing required array: targets");
  }
  grab(j, "dataset_sizes", cfg.dataset_sizes, true);
  grab(j, "horizon", cfg.horizon);
  grab(j, "confidences", cfg.confidences);
  if (j.contains("ranking_scores")) {
    if (!j.at("ranking_scores").is_array()) {
      errors.push_back("ranking_scores must be an array");
    } else {
      for (const auto& s : j.at("ranking_scores")) {
        RankingScoreSpec spec;
        std::string kind;
        grab(s, "kind", kind, true);
        grab(s, "k", spec.k, true);
        if (!kind.empty() && !parse_kind(kind, spec.kind))
          errors.push_back("unknown ranking score kind: " + kind);
        cfg.ranking_scores.push_back(spec);
      }
    }
  }
  grab(j, "methods", cfg.methods, true);
  grab(j, "trials", cfg.trials);
  grab(j, "seed", cfg.seed);
  grab(j, "posterior_draws", cfg.posterior_draws);
  grab(j, "selection_draws", cfg.selection_draws);
  grab(j, "bootstrap_resamples", cfg.bootstrap_resamples);
  grab(j, "oracle_prior_a", cfg.oracle_prior_a);
  grab(j, "oracle_prior_b", cfg.oracle_prior_b);
  grab(j, "out", cfg.out);
  if (j.contains("bayesdice") && j.at("bayesdice").is_object()) {
    const json& b = j.at("bayesdice");
    grab(b, "constraint_weight", cfg.bayesdice.constraint_weight);
    grab(b, "norm_weight", cfg.bayesdice.norm_weight);
    grab(b, "prior_mu", cfg.bayesdice.prior_mu);
    grab(b, "prior_sigma", cfg.bayesdice.prior_sigma);
    grab(b, "learning_rate", cfg.bayesdice.learning_rate);
    grab(b, "steps", cfg.bayesdice.steps);
    grab(b, "batch_size", cfg.bayesdice.batch_size);
    grab(b, "mc_samples_per_step", cfg.bayesdice.mc_samples_per_step);
  }
  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> errors;
  const bool coverage = experiment == "coverage";
  const bool selection = experiment == "selection";
  if (!coverage && !selection)
    errors.push_back("experiment must be 'coverage' or 'selection'");
  if (env.kind != "bandit" && env.kind != "frozenlake" && env.kind != "taxi")
    errors.push_back("env.kind must be one of bandit, frozenlake, taxi");
  if (!(env.gamma > 0.0 && env.gamma <= 1.0)) errors.push_back("env.gamma outside (0,1]");
  if (env.kind == "bandit" && env.p_opt < env.p_sub)
    errors.push_back("bandit arms must satisfy p_opt >= p_sub");
  if (env.slip < 0.0 || env.slip > 1.0) errors.push_back("env.slip outside [0,1]");
  auto check_policy = [&](const PolicySpecConfig& p, const std::string& what) {
    if (p.family != "bandit_alpha" && p.family != "epsilon_greedy")
      errors.push_back(what + ": unknown policy family " + p.family);
    if (p.value < 0.0 || p.value > 1.0)
      errors.push_back(what + ": alpha/epsilon outside [0,1]");
    if (p.family == "bandit_alpha" && env.kind != "bandit")
      errors.push_back(what + ": bandit_alpha policies need the bandit env");
  };
  check_policy(behavior, "behavior");
  if (targets.empty()) errors.push_back("targets must be nonempty");
  for (std::size_t i = 0; i < targets.size(); ++i)
    check_policy(targets[i], "target " + std::to_string(i));
  if (coverage && targets.size() != 1)
    errors.push_back("coverage runs evaluate exactly one target policy");
  if (selection && targets.size() < 2)
    errors.push_back("selection runs need at least two target policies");
  if (horizon < 1) errors.push_back("horizon must be >= 1");
  if (dataset_sizes.empty()) errors.push_back("dataset_sizes must be nonempty");
  for (int n : dataset_sizes) {
    if (n < horizon || n % horizon != 0)
      errors.push_back("dataset size " + std::to_string(n) +
                       " must be a positive multiple of the horizon");
  }
  if (coverage) {
    if (confidences.empty()) errors.push_back("coverage needs confidence levels");
    for (double c : confidences)
      if (!(c > 0.0 && c < 1.0))
        errors.push_back("confidence " + fmt(c) + " outside (0,1)");
  }
  if (selection) {
    if (ranking_scores.empty()) errors.push_back("selection needs ranking_scores");
    for (const auto& s : ranking_scores)
      if (s.k < 1 || s.k > static_cast<int>(targets.size()))
        errors.push_back("ranking score k outside [1, num targets]");
  }
  if (methods.empty()) errors.push_back("methods must be nonempty");
  const std::vector<std::string> cov_methods = {"bayesdice", "wis_t", "wis_bernstein",
                                                "wis_bootstrap"};
  const std::vector<std::string> sel_methods = {"bayesdice", "mean_rank",
                                                "lower_bound_rank", "upper_bound_rank",
                                                "oracle"};
  for (const auto& m : methods) {
    const auto& allowed = coverage ? cov_methods : sel_methods;
    if (std::find(allowed.begin(), allowed.end(), m) == allowed.end())
      errors.push_back("method '" + m + "' is not valid for this experiment");
    if (m == "oracle" && env.kind != "bandit")
      errors.push_back("the conjugate oracle method needs the bandit env");
  }
  if (trials < 1) errors.push_back("trials must be >= 1");
  if (posterior_draws < 2) errors.push_back("posterior_draws must be >= 2");
  if (selection_draws < 1) errors.push_back("selection_draws must be >= 1");
  if (bootstrap_resamples < 1) errors.push_back("bootstrap_resamples must be >= 1");
  if (oracle_prior_a <= 0.0 || oracle_prior_b <= 0.0)
    errors.push_back("oracle Beta prior parameters must be positive");
  try {
    bayesdice.validate();
  } catch (const std::invalid_argument& e) {
    errors.push_back(std::string("bayesdice: ") + e.what());
  }
  if (!errors.empty()) throw ConfigError(errors);
}

std::vector<CoverageAggregate> CoverageReport::aggregates() const {
  std::map<std::tuple<std::string, int, double>, std::vector<const CoverageRow*>> groups;
  for (const auto& row : rows)
    groups[{row.method, row.n, row.confidence}].push_back(&row);
  std::vector<CoverageAggregate> out;
  for (const auto& [key, members] : groups) {
    CoverageAggregate agg;
    agg.method = std::get<0>(key);
    agg.n = std::get<1>(key);
    agg.confidence = std::get<2>(key);
    agg.trials = static_cast<int>(members.size());
    double covered = 0.0;
    std::vector<double> log_widths;
    for (const CoverageRow* row : members) {
      covered += row->covered ? 1.0 : 0.0;
      log_widths.push_back(std::log(row->hi - row->lo));
    }
    agg.coverage = covered / agg.trials;
    agg.median_log_width = median(std::move(log_widths));
    out.push_back(agg);
  }
  return out;
}

void CoverageReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << kCoverageHeader << '\n';
  for (const auto& r : rows)
    out << r.method << ',' << r.n << ',' << fmt(r.confidence) << ',' << r.trial << ','
        << fmt(r.lo) << ',' << fmt(r.hi) << ',' << fmt(r.truth) << ','
        << (r.covered ? 1 : 0) << '\n';
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

CoverageReport run_coverage(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.experiment != "coverage")
    throw ConfigError({"run_coverage needs experiment = coverage"});
  const TabularMDP mdp = build_env(cfg.env);
  const TabularPolicy behavior = resolve_policy(mdp, cfg.behavior);
  const TabularPolicy target = resolve_policy(mdp, cfg.targets[0]);
  const double truth = exact_policy_value(mdp, target);
  const FeatureMap fm = FeatureMap::one_hot(mdp.num_states, mdp.num_actions);

  const bool wants_bayes =
      std::find(cfg.methods.begin(), cfg.methods.end(), "bayesdice") != cfg.methods.end();
  const bool wants_wis = std::any_of(cfg.methods.begin(), cfg.methods.end(),
                                     [](const std::string& m) { return m.rfind("wis", 0) == 0; });

  CoverageReport report;
  for (int n : cfg.dataset_sizes) {
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t trial_seed = cfg.seed ^ static_cast<std::uint64_t>(trial);
      const TupleDataset ds =
          sample_dataset(mdp, behavior, n / cfg.horizon, cfg.horizon,
                         derive_seed(trial_seed, kDataSalt), cfg.behavior.label());

      std::vector<double> bayes_values;
      if (wants_bayes) {
        BayesDiceConfig bcfg = cfg.bayesdice;
        bcfg.seed = derive_seed(trial_seed, kTrainSalt);
        const RatioPosterior post = train_posterior(ds, target, fm, bcfg);
        bayes_values = sample_policy_values(post, ds, cfg.posterior_draws,
                                            derive_seed(trial_seed, kDrawSalt));
      }
      TrajectoryEstimates wis;
      if (wants_wis) wis = wis_per_trajectory(ds, behavior, target, mdp.gamma);

      for (const std::string& method : cfg.methods) {
        for (double c : cfg.confidences) {
          std::pair<double, double> interval;
          if (method == "bayesdice")
            interval = interval_from_samples(bayes_values, c);
          else if (method == "wis_t")
            interval = t_interval(wis, c);
          else if (method == "wis_bernstein")
            interval = bernstein_interval(wis, c);
          else
            interval = bootstrap_bc_interval(wis, c, cfg.bootstrap_resamples,
                                             derive_seed(trial_seed, kBootstrapSalt));
          report.rows.push_back({method, n, c, trial, interval.first, interval.second,
                                 truth,
                                 interval.first <= truth && truth <= interval.second});
        }
      }
    }
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.method, a.n, a.confidence, a.trial) <
           std::tie(b.method, b.n, b.confidence, b.trial);
  });
  if (!cfg.out.empty()) report.write_csv(cfg.out);
  return report;
}

std::vector<SelectionAggregate> SelectionReport::aggregates() const {
  std::map<std::tuple<std::string, std::string, int, int>, std::vector<double>> groups;
  for (const auto& row : rows)
    groups[{row.method, row.score_kind, row.k, row.n}].push_back(row.value);
  std::vector<SelectionAggregate> out;
  for (const auto& [key, values] : groups) {
    SelectionAggregate agg;
    agg.method = std::get<0>(key);
    agg.score_kind = std::get<1>(key);
    agg.k = std::get<2>(key);
    agg.n = std::get<3>(key);
    agg.trials = static_cast<int>(values.size());
    agg.mean = std::accumulate(values.begin(), values.end(), 0.0) / agg.trials;
    double ss = 0.0;
    for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
    agg.stderr_ = agg.trials > 1 ? std::sqrt(ss / (agg.trials - 1)) /
                                       std::sqrt(static_cast<double>(agg.trials))
                                 : 0.0;
    out.push_back(agg);
  }
  return out;
}

void SelectionReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << kSelectionHeader << '\n';
  for (const auto& r : rows)
    out << r.method << ',' << r.score_kind << ',' << r.k << ',' << r.n << ',' << r.trial
        << ',' << fmt(r.value) << '\n';
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

SelectionReport run_selection(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.experiment != "selection")
    throw ConfigError({"run_selection needs experiment = selection"});
  const TabularMDP mdp = build_env(cfg.env);
  const TabularPolicy behavior = resolve_policy(mdp, cfg.behavior);
  std::vector<TabularPolicy> targets;
  std::vector<std::string> target_ids;
  std::vector<double> truth_means;
  for (const auto& spec : cfg.targets) {
    targets.push_back(resolve_policy(mdp, spec));
    target_ids.push_back(spec.label());
    truth_means.push_back(exact_policy_value(mdp, targets.back()));
  }
  const int N = static_cast<int>(targets.size());
  const FeatureMap fm = FeatureMap::one_hot(mdp.num_states, mdp.num_actions);

  const bool needs_bayes =
      std::any_of(cfg.methods.begin(), cfg.methods.end(), [](const std::string& m) {
        return m == "bayesdice" || m == "mean_rank" || m == "lower_bound_rank" ||
               m == "upper_bound_rank";
      });
  const bool needs_oracle =
      std::find(cfg.methods.begin(), cfg.methods.end(), "oracle") != cfg.methods.end();

  SelectionReport report;
  auto add_rows = [&](const std::string& method, const Ranking& ranking, int n,
                      int trial) {
    for (const auto& spec : cfg.ranking_scores)
      report.rows.push_back({method, kind_name(spec.kind), spec.k, n, trial,
                             score_ranking(ranking, truth_means, spec)});
  };

  for (int n : cfg.dataset_sizes) {
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t trial_seed = cfg.seed ^ static_cast<std::uint64_t>(trial);
      const TupleDataset ds =
          sample_dataset(mdp, behavior, n / cfg.horizon, cfg.horizon,
                         derive_seed(trial_seed, kDataSalt), cfg.behavior.label());

      ValueSampleMatrix bayes;
      if (needs_bayes) {
        bayes.samples.resize(N, cfg.selection_draws);
        bayes.policy_ids = target_ids;
        for (int i = 0; i < N; ++i) {
          BayesDiceConfig bcfg = cfg.bayesdice;
          bcfg.seed = derive_seed(trial_seed, kTrainSalt + kPerTargetStride * (i + 1));
          const RatioPosterior post = train_posterior(ds, targets[i], fm, bcfg);
          const auto values = sample_policy_values(
              post, ds, cfg.selection_draws,
              derive_seed(trial_seed, kDrawSalt + kPerTargetStride * (i + 1)));
          for (int d = 0; d < cfg.selection_draws; ++d) bayes.samples(i, d) = values[d];
        }
      }
      ValueSampleMatrix oracle;
      if (needs_oracle) {
        oracle = bandit_conjugate_oracle(ds, targets, cfg.oracle_prior_a,
                                         cfg.oracle_prior_b, cfg.selection_draws,
                                         derive_seed(trial_seed, kOracleSalt));
        oracle.policy_ids = target_ids;
      }

      for (const std::string& method : cfg.methods) {
        if (method == "bayesdice" || method == "oracle") {
          const ValueSampleMatrix& vsm = method == "oracle" ? oracle : bayes;
          for (const auto& sel_spec : cfg.ranking_scores) {
            const auto sel = offline_select(vsm, sel_spec, pick_mode(sel_spec, N));
            add_rows(method + "(" + sel_spec.label() + ")", sel.ranking, n, trial);
          }
        } else {
          PointStatistic stat;
          if (method == "mean_rank") stat.kind = PointStatistic::Kind::mean;
          if (method == "lower_bound_rank") stat.kind = PointStatistic::Kind::mean_minus_std;
          if (method == "upper_bound_rank") stat.kind = PointStatistic::Kind::mean_plus_std;
          add_rows(method, point_estimate_ranking(bayes, stat), n, trial);
        }
      }
    }
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.method, a.score_kind, a.k, a.n, a.trial) <
           std::tie(b.method, b.score_kind, b.k, b.n, b.trial);
  });
  if (!cfg.out.empty()) report.write_csv(cfg.out);
  return report;
}

std::string report_summary(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open " + csv_path);
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("empty CSV file");

  std::ostringstream out;
  char buf[256];
  if (header == kCoverageHeader) {
    CoverageReport report;
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto fields = split_csv_line(line);
      if (fields.size() != 8)
        throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                                 ": expected 8 fields");
      CoverageRow row;
      row.method = fields[0];
      row.n = std::stoi(fields[1]);
      row.confidence = std::stod(fields[2]);
      row.trial = std::stoi(fields[3]);
      row.lo = std::stod(fields[4]);
      row.hi = std::stod(fields[5]);
      row.truth = std::stod(fields[6]);
      row.covered = fields[7] == "1";
      report.rows.push_back(row);
    }
    std::snprintf(buf, sizeof(buf), "%-16s %8s %8s %10s %16s %8s\n", "method", "n",
                  "conf", "coverage", "med_log_width", "trials");
    out << buf;
    for (const auto& agg : report.aggregates()) {
      std::snprintf(buf, sizeof(buf), "%-16s %8d %8.3f %10.4f %16.4f %8d\n",
                    agg.method.c_str(), agg.n, agg.confidence, agg.coverage,
                    agg.median_log_width, agg.trials);
      out << buf;
    }
    return out.str();
  }
  if (header == kSelectionHeader) {
    SelectionReport report;
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto fields = split_csv_line(line);
      if (fields.size() != 6)
        throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                                 ": expected 6 fields");
      SelectionRow row;
      row.method = fields[0];
      row.score_kind = fields[1];
      row.k = std::stoi(fields[2]);
      row.n = std::stoi(fields[3]);
      row.trial = std::stoi(fields[4]);
      row.value = std::stod(fields[5]);
      report.rows.push_back(row);
    }
    std::snprintf(buf, sizeof(buf), "%-28s %-12s %4s %8s %12s %12s %8s\n", "method",
                  "score", "k", "n", "mean", "stderr", "trials");
    out << buf;
    for (const auto& agg : report.aggregates()) {
      std::snprintf(buf, sizeof(buf), "%-28s %-12s %4d %8d %12.5f %12.5f %8d\n",
                    agg.method.c_str(), agg.score_kind.c_str(), agg.k, agg.n, agg.mean,
                    agg.stderr_, agg.trials);
      out << buf;
    }
    return out.str();
  }
  throw std::runtime_error("unrecognized CSV schema in " + csv_path);
}

}  // namespace bdice
