#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdice/baselines.hpp"
#include "bdice/mdp.hpp"
#include "bdice/posterior.hpp"
#include "bdice/selection.hpp"

namespace bdice {

struct EnvSpec {
  std::string kind = "bandit";  // bandit | frozenlake | taxi
  double p_opt = 0.7;
  double p_sub = 0.3;
  double slip = 1.0 / 3.0;
  double gamma = 0.99;
};

TabularMDP build_env(const EnvSpec& spec);

struct PolicySpecConfig {
  std::string family = "bandit_alpha";  // bandit_alpha | epsilon_greedy
  double value = 0.5;                   // alpha or epsilon

  std::string label() const;
};

// Resolves the policy against the environment; epsilon_greedy computes its
// greedy base by policy iteration.
TabularPolicy resolve_policy(const TabularMDP& mdp, const PolicySpecConfig& spec);

// Collected configuration errors; what() lists every failure.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::vector<std::string>& errors);
  std::vector<std::string> errors;
};

struct ExperimentConfig {
  std::string experiment;  // coverage | selection
  EnvSpec env;
  PolicySpecConfig behavior;
  std::vector<PolicySpecConfig> targets;
  std::vector<int> dataset_sizes;  // tuple counts, multiples of horizon
  int horizon = 20;
  std::vector<double> confidences = {0.6, 0.8, 0.9, 0.95};
  std::vector<RankingScoreSpec> ranking_scores;
  std::vector<std::string> methods;
  int trials = 1;
  std::uint64_t seed = 0;
  BayesDiceConfig bayesdice;
  int posterior_draws = 4000;
  int selection_draws = 10000;
  int bootstrap_resamples = 2000;
  double oracle_prior_a = 1.0;
  double oracle_prior_b = 1.0;
  std::string out;

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_json_file(const std::string& path);
  // Throws ConfigError listing every problem; called by the runners.
  void validate() const;
};

struct CoverageRow {
  std::string method;
  int n = 0;
  double confidence = 0.0;
  int trial = 0;
  double lo = 0.0;
  double hi = 0.0;
  double truth = 0.0;
  bool covered = false;
};

struct CoverageAggregate {
  std::string method;
  int n = 0;
  double confidence = 0.0;
  double coverage = 0.0;
  double median_log_width = 0.0;
  int trials = 0;
};

struct CoverageReport {
  std::vector<CoverageRow> rows;
  std::vector<CoverageAggregate> aggregates() const;
  void write_csv(const std::string& path) const;
};

CoverageReport run_coverage(const ExperimentConfig& cfg);

struct SelectionRow {
  std::string method;
  std::string score_kind;
  int k = 0;
  int n = 0;
  int trial = 0;
  double value = 0.0;
};

struct SelectionAggregate {
  std::string method;
  std::string score_kind;
  int k = 0;
  int n = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  int trials = 0;
};

struct SelectionReport {
  std::vector<SelectionRow> rows;
  std::vector<SelectionAggregate> aggregates() const;
  void write_csv(const std::string& path) const;
};

SelectionReport run_selection(const ExperimentConfig& cfg);

// Aggregates a CSV written by either runner into a printable table; the
// schema is detected from the header. Throws on unknown schemas.
std::string report_summary(const std::string& csv_path);

}  // namespace bdice
