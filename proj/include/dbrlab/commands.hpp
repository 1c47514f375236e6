#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dbrlab/config.hpp"

namespace dbrlab::cli {

struct GlobalOpts {
  std::optional<std::uint64_t> seed;  // overrides dataset/train/replication seeds
  int jobs = 1;
  std::optional<std::string> out_dir;
  bool dry_run = false;
};

void apply_overrides(config::ExperimentConfig& cfg, const GlobalOpts& opts);

// Subcommand bodies; they throw ConfigError / RuntimeError, which the CLI
// maps to exit codes 2 / 3.
void cmd_generate(config::ExperimentConfig cfg, const GlobalOpts& opts, std::ostream& log);
void cmd_train(config::ExperimentConfig cfg, const GlobalOpts& opts, std::ostream& log);
void cmd_bench(config::ExperimentConfig cfg, const GlobalOpts& opts, std::ostream& log);
void cmd_sweep(config::ExperimentConfig cfg, const GlobalOpts& opts,
               const std::string& parameter, const std::vector<double>& values,
               std::ostream& log);
void cmd_report(const std::vector<std::string>& run_dirs, const GlobalOpts& opts,
                std::ostream& log);

}  // namespace dbrlab::cli
