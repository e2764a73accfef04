#include "cli_app.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "bdice/data.hpp"
#include "bdice/experiments.hpp"
#include "bdice/kernels.hpp"
#include "bdice/posterior.hpp"

namespace bdice {

namespace {

void add_env_options(CLI::App* cmd, EnvSpec& env) {
  cmd->add_option("--env", env.kind, "environment id: bandit, frozenlake, taxi")
      ->required();
  cmd->add_option("--p-opt", env.p_opt, "bandit optimal-arm mean");
  cmd->add_option("--p-sub", env.p_sub, "bandit suboptimal-arm mean");
  cmd->add_option("--slip", env.slip, "gridworld slip probability");
  cmd->add_option("--gamma", env.gamma, "discount factor in (0,1]");
}

void add_policy_options(CLI::App* cmd, const std::string& prefix,
                        PolicySpecConfig& spec) {
  cmd->add_option("--" + prefix + "-family", spec.family,
                  "policy family: bandit_alpha or epsilon_greedy")
      ->required();
  cmd->add_option("--" + prefix + "-value", spec.value,
                  "alpha (bandit_alpha) or epsilon (epsilon_greedy)")
      ->required();
}

struct GenDataArgs {
  EnvSpec env;
  PolicySpecConfig behavior;
  int num_trajectories = 10;
  int horizon = 20;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  EnvSpec env;
  PolicySpecConfig target;
  std::string data;
  std::string out;
  std::string features = "one_hot";
  int rf_dim = 64;
  double rf_bandwidth = 0.25;
  std::uint64_t rf_seed = 0;
  BayesDiceConfig cfg;
};

struct RunArgs {
  std::string config;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
};

int do_gen_data(const GenDataArgs& args) {
  const TabularMDP mdp = build_env(args.env);
  const TabularPolicy behavior = resolve_policy(mdp, args.behavior);
  const TupleDataset ds = sample_dataset(mdp, behavior, args.num_trajectories,
                                         args.horizon, args.seed, args.behavior.label());
  save_dataset(ds, args.out);
  std::cout << "wrote " << ds.size() << " transitions (" << args.num_trajectories
            << " trajectories x " << args.horizon << ") to " << args.out << "\n";
  return 0;
}

int do_train(const TrainArgs& args) {
  const TupleDataset ds = load_dataset(args.data);
  const TabularMDP mdp = build_env(args.env);
  if (mdp.num_states != ds.meta.num_states || mdp.num_actions != ds.meta.num_actions)
    throw std::runtime_error("--env does not match the dataset dimensions");
  const TabularPolicy target = resolve_policy(mdp, args.target);
  FeatureMap fm;
  if (args.features == "one_hot")
    fm = FeatureMap::one_hot(mdp.num_states, mdp.num_actions);
  else if (args.features == "random_fourier")
    fm = FeatureMap::random_fourier(mdp.num_states, mdp.num_actions, args.rf_dim,
                                    args.rf_bandwidth, args.rf_seed);
  else
    throw std::runtime_error("unknown feature map: " + args.features);

  const RatioPosterior post = train_posterior(ds, target, fm, args.cfg);
  std::ofstream out(args.out);
  if (!out) throw std::runtime_error("cannot open " + args.out + " for writing");
  out << posterior_to_json(post, args.cfg, ds.meta.env, args.target.label()) << "\n";
  std::cout << "trained posterior (" << fm.dim << " features, "
            << kernels::backend_name(kernels::active_backend())
            << " kernels) written to " << args.out << "\n";
  return 0;
}

ExperimentConfig load_run_config(const RunArgs& args, const std::string& experiment) {
  ExperimentConfig cfg = ExperimentConfig::from_json_file(args.config);
  if (args.seed_set) cfg.seed = args.seed_override;
  if (!args.out_override.empty()) cfg.out = args.out_override;
  if (cfg.out.empty())
    throw ConfigError({"no output path: set \"out\" in the config or pass --out"});
  if (cfg.experiment != experiment)
    throw ConfigError({"config experiment is '" + cfg.experiment + "', expected '" +
                       experiment + "'"});
  return cfg;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"BayesDICE: posterior off-policy value estimation and policy selection"};
  app.require_subcommand(1);

  GenDataArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "sample an offline dataset");
  add_env_options(gen_cmd, gen.env);
  add_policy_options(gen_cmd, "behavior", gen.behavior);
  gen_cmd->add_option("--num-trajectories", gen.num_trajectories)->required();
  gen_cmd->add_option("--horizon", gen.horizon);
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--out", gen.out, "dataset path (JSON lines)")->required();

  TrainArgs train;
  CLI::App* train_cmd =
      app.add_subcommand("train", "fit a ratio posterior on a dataset");
  add_env_options(train_cmd, train.env);
  add_policy_options(train_cmd, "target", train.target);
  train_cmd->add_option("--data", train.data, "dataset path")->required();
  train_cmd->add_option("--out", train.out, "posterior JSON path")->required();
  train_cmd->add_option("--features", train.features, "one_hot or random_fourier");
  train_cmd->add_option("--rf-dim", train.rf_dim);
  train_cmd->add_option("--rf-bandwidth", train.rf_bandwidth);
  train_cmd->add_option("--rf-seed", train.rf_seed);
  train_cmd->add_option("--constraint-weight", train.cfg.constraint_weight,
                        "<= 0 selects the automatic scale (dataset size)");
  train_cmd->add_option("--norm-weight", train.cfg.norm_weight);
  train_cmd->add_option("--prior-mu", train.cfg.prior_mu);
  train_cmd->add_option("--prior-sigma", train.cfg.prior_sigma);
  train_cmd->add_option("--learning-rate", train.cfg.learning_rate);
  train_cmd->add_option("--steps", train.cfg.steps);
  train_cmd->add_option("--batch-size", train.cfg.batch_size);
  train_cmd->add_option("--mc-samples", train.cfg.mc_samples_per_step);
  train_cmd->add_option("--seed", train.cfg.seed);

  RunArgs coverage;
  CLI::App* cov_cmd =
      app.add_subcommand("coverage", "run the interval-coverage experiment");
  cov_cmd->add_option("--config", coverage.config, "experiment JSON config")->required();
  cov_cmd->add_option("--out", coverage.out_override, "override the CSV output path");
  cov_cmd->add_option("--seed", coverage.seed_override)
      ->each([&](const std::string&) { coverage.seed_set = true; });

  RunArgs select;
  CLI::App* sel_cmd =
      app.add_subcommand("select", "run the policy-selection experiment");
  sel_cmd->add_option("--config", select.config, "experiment JSON config")->required();
  sel_cmd->add_option("--out", select.out_override, "override the CSV output path");
  sel_cmd->add_option("--seed", select.seed_override)
      ->each([&](const std::string&) { select.seed_set = true; });

  std::string report_csv;
  CLI::App* rep_cmd = app.add_subcommand("report", "aggregate a results CSV");
  rep_cmd->add_option("--csv", report_csv, "CSV written by coverage/select")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen_cmd->parsed()) return do_gen_data(gen);
    if (train_cmd->parsed()) return do_train(train);
    if (cov_cmd->parsed()) {
      const auto cfg = load_run_config(coverage, "coverage");
      run_coverage(cfg);
      std::cout << report_summary(cfg.out);
      return 0;
    }
    if (sel_cmd->parsed()) {
      const auto cfg = load_run_config(select, "selection");
      run_selection(cfg);
      std::cout << report_summary(cfg.out);
      return 0;
    }
    if (rep_cmd->parsed()) {
      std::cout << report_summary(report_csv);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace bdice
