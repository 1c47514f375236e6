// dbrlab: dataset generation, CRNet training, benchmarks, sweeps and reports
// for heterogeneous dose-response curve estimation.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dbrlab/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dbrlab - double-balancing representation learning for dose-response curves"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  dbrlab::cli::GlobalOpts opts;
  std::uint64_t seed_value = 0;
  std::string out_dir;

  app.add_option("--config", config_path, "Experiment config (JSON)");
  auto* seed_opt = app.add_option("--seed", seed_value, "Override dataset/train/replication seeds");
  app.add_option("--jobs", opts.jobs, "Parallel replication workers")->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", out_dir, "Output directory override");
  app.add_flag("--dry-run", opts.dry_run, "Validate the config and exit without side effects");

  auto* generate = app.add_subcommand("generate", "Generate a dataset directory");
  auto* train = app.add_subcommand("train", "Train one model and write manifest + checkpoint");
  auto* bench = app.add_subcommand("bench",
                                   "Run the full/no_br/no_pr ablation benchmark with replications");
  auto* sweep = app.add_subcommand("sweep", "Paired-seed parameter sweep with plot");
  std::string sweep_parameter;
  std::vector<double> sweep_values;
  sweep->add_option("--parameter", sweep_parameter, "alpha, K or m")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")
      ->required()
      ->delimiter(',');
  auto* rep = app.add_subcommand("report", "Aggregate run manifests into a markdown report");
  std::vector<std::string> report_dirs;
  rep->add_option("dirs", report_dirs, "Run directories or manifest files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (seed_opt->count() > 0) opts.seed = seed_value;
  if (out_opt->count() > 0) opts.out_dir = out_dir;

  try {
    if (rep->parsed()) {
      dbrlab::cli::cmd_report(report_dirs, opts, std::cout);
      return 0;
    }
    if (config_path.empty()) {
      throw dbrlab::ConfigError("--config PATH is required for this subcommand");
    }
    dbrlab::config::ExperimentConfig cfg =
        dbrlab::config::load_experiment_config(config_path);
    if (generate->parsed()) {
      dbrlab::cli::cmd_generate(std::move(cfg), opts, std::cout);
    } else if (train->parsed()) {
      dbrlab::cli::cmd_train(std::move(cfg), opts, std::cout);
    } else if (bench->parsed()) {
      dbrlab::cli::cmd_bench(std::move(cfg), opts, std::cout);
    } else if (sweep->parsed()) {
      dbrlab::cli::cmd_sweep(std::move(cfg), opts, sweep_parameter, sweep_values, std::cout);
    }
  } catch (const dbrlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
