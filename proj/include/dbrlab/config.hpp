#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbrlab/train_eval.hpp"

namespace dbrlab::config {

// Full experiment description parsed from a JSON config file. Parsing is
// strict: unknown keys anywhere are rejected so typos cannot silently fall
// back to defaults.
struct ExperimentConfig {
  train_eval::ExperimentSpec spec;
  int replication_runs = 10;
  std::uint64_t replication_base_seed = 42;
  // optional explicit (dataset_seed, train_seed) pairs overriding derivation
  std::optional<std::vector<std::pair<std::uint64_t, std::uint64_t>>> replication_seeds;
  std::string output_dir = "runs/out";
};

// Dataset root for generated datasets and relative covariate paths; the
// DBRLAB_DATA_DIR environment variable overrides the default ("data").
std::filesystem::path data_root();

ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Loads the covariate file of a semi-synthetic spec into spec.covariates
// (no-op for synthetic experiments).
void resolve_covariates(train_eval::ExperimentSpec& spec,
                        const std::filesystem::path& base_dir);

}  // namespace dbrlab::config
