#include "dbrlab/config.hpp"

#include <cstdlib>
#include <set>

#include "dbrlab/datagen.hpp"
#include "dbrlab/io.hpp"

namespace dbrlab::config {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& obj, const std::string& block,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) {
    throw ConfigError("config block '" + block + "' must be an object");
  }
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!ok.count(it.key())) {
      throw ConfigError("config: unknown key '" + it.key() + "' in block '" + block + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: field '") + key + "' has the wrong type");
  }
}

std::vector<int> get_int_list(const json& obj, const char* key, std::vector<int> fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_array()) {
    throw ConfigError(std::string("config: field '") + key + "' must be an array");
  }
  return obj.at(key).get<std::vector<int>>();
}

}  // namespace

fs::path data_root() {
  if (const char* env = std::getenv("DBRLAB_DATA_DIR")) {
    return fs::path(env);
  }
  return fs::path("data");
}

ExperimentConfig parse_experiment_config(const json& j, const fs::path& base_dir) {
  check_keys(j, "<root>",
             {"dataset", "model", "train", "eval", "replication", "output_dir"});
  ExperimentConfig cfg;
  train_eval::ExperimentSpec& spec = cfg.spec;

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, "dataset",
               {"kind", "name", "n", "p", "q", "covariate_file", "split", "seed",
                "outcome_noise_sd"});
    const std::string kind = get_or<std::string>(d, "kind", "synthetic");
    if (kind == "synthetic") {
      spec.kind = train_eval::ExperimentSpec::Kind::synthetic;
    } else if (kind == "semi_synthetic") {
      spec.kind = train_eval::ExperimentSpec::Kind::semi_synthetic;
    } else {
      throw ConfigError("config: dataset.kind must be 'synthetic' or 'semi_synthetic', got '" +
                        kind + "'");
    }
    spec.n = get_or<int>(d, "n", spec.n);
    spec.p = get_or<int>(d, "p", spec.p);
    spec.q = get_or<int>(d, "q", spec.q);
    spec.dataset_seed = get_or<std::uint64_t>(d, "seed", spec.dataset_seed);
    spec.outcome_noise_sd = get_or<double>(d, "outcome_noise_sd", 0.0);
    if (spec.outcome_noise_sd < 0.0) {
      throw ConfigError("config: dataset.outcome_noise_sd must be >= 0");
    }
    spec.covariate_file = get_or<std::string>(d, "covariate_file", "");
    if (spec.kind == train_eval::ExperimentSpec::Kind::semi_synthetic &&
        spec.covariate_file.empty()) {
      throw ConfigError("config: semi_synthetic dataset requires dataset.covariate_file");
    }
    if (d.contains("split")) {
      auto sizes = d.at("split").get<std::vector<long>>();
      if (sizes.size() != 3) {
        throw ConfigError("config: dataset.split must be [train, val, test]");
      }
      for (int k = 0; k < 3; ++k) {
        if (sizes[static_cast<std::size_t>(k)] < 0) {
          throw ConfigError("config: dataset.split sizes must be >= 0");
        }
        spec.split_sizes[static_cast<std::size_t>(k)] =
            static_cast<int>(sizes[static_cast<std::size_t>(k)]);
      }
    }
    spec.name = get_or<std::string>(d, "name", "");
  }
  if (spec.name.empty()) {
    spec.name = spec.kind == train_eval::ExperimentSpec::Kind::synthetic
                    ? "Data-" + std::to_string(spec.q)
                    : fs::path(spec.covariate_file).stem().string() + "-" + std::to_string(spec.q);
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model",
               {"repr_dim", "treat_repr_dim", "proj_dim", "phi_hidden", "psi_hidden", "g_hidden",
                "h_hidden", "activation"});
    spec.net.repr_dim = get_or<int>(m, "repr_dim", spec.net.repr_dim);
    spec.net.treat_repr_dim = get_or<int>(m, "treat_repr_dim", spec.net.treat_repr_dim);
    spec.net.proj_dim = get_or<int>(m, "proj_dim", spec.net.proj_dim);
    spec.net.phi_hidden = get_int_list(m, "phi_hidden", spec.net.phi_hidden);
    spec.net.psi_hidden = get_int_list(m, "psi_hidden", spec.net.psi_hidden);
    spec.net.g_hidden = get_int_list(m, "g_hidden", spec.net.g_hidden);
    spec.net.h_hidden = get_int_list(m, "h_hidden", spec.net.h_hidden);
    spec.net.activation =
        ad::activation_from_string(get_or<std::string>(m, "activation", "elu"));
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train",
               {"alpha", "m", "batch_size", "epochs", "learning_rate", "optimizer", "seed",
                "mode", "stage1_epochs", "patience", "centering"});
    train_eval::TrainConfig& tc = spec.train;
    tc.alpha = get_or<double>(t, "alpha", tc.alpha);
    tc.m = get_or<int>(t, "m", tc.m);
    tc.batch_size = get_or<int>(t, "batch_size", tc.batch_size);
    tc.epochs = get_or<int>(t, "epochs", tc.epochs);
    tc.learning_rate = get_or<double>(t, "learning_rate", tc.learning_rate);
    const std::string opt = get_or<std::string>(t, "optimizer", "adam");
    if (opt == "adam") {
      tc.optimizer = train_eval::OptimizerKind::adam;
    } else if (opt == "sgd") {
      tc.optimizer = train_eval::OptimizerKind::sgd;
    } else {
      throw ConfigError("config: train.optimizer must be 'adam' or 'sgd', got '" + opt + "'");
    }
    tc.seed = get_or<std::uint64_t>(t, "seed", tc.seed);
    tc.mode = train_eval::mode_from_string(get_or<std::string>(t, "mode", "full"));
    tc.stage1_epochs = get_or<int>(t, "stage1_epochs", tc.stage1_epochs);
    tc.patience = get_or<int>(t, "patience", tc.patience);
    tc.centering = dep::centering_from_string(get_or<std::string>(t, "centering", "u"));
    tc.validate();
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, "eval",
               {"integration", "grid_size", "mc_samples", "interval", "quantile_lo",
                "quantile_hi"});
    train_eval::MiseSpec& ms = spec.mise;
    const std::string integ = get_or<std::string>(e, "integration", "auto");
    if (integ == "auto") {
      ms.integration = train_eval::MiseSpec::Integration::auto_resolve;
    } else if (integ == "grid") {
      ms.integration = train_eval::MiseSpec::Integration::grid_1d;
    } else if (integ == "monte_carlo") {
      ms.integration = train_eval::MiseSpec::Integration::monte_carlo;
    } else {
      throw ConfigError("config: eval.integration must be auto, grid or monte_carlo");
    }
    ms.grid_size = get_or<int>(e, "grid_size", ms.grid_size);
    ms.mc_samples = get_or<int>(e, "mc_samples", ms.mc_samples);
    const std::string interval = get_or<std::string>(e, "interval", "quantile");
    if (interval == "empirical") {
      ms.interval = train_eval::MiseSpec::Interval::empirical_range;
    } else if (interval == "quantile") {
      ms.interval = train_eval::MiseSpec::Interval::quantile;
    } else {
      throw ConfigError("config: eval.interval must be 'empirical' or 'quantile'");
    }
    ms.quantile_lo = get_or<double>(e, "quantile_lo", ms.quantile_lo);
    ms.quantile_hi = get_or<double>(e, "quantile_hi", ms.quantile_hi);
    if (ms.grid_size < 2) throw ConfigError("config: eval.grid_size must be >= 2");
    if (ms.mc_samples < 1) throw ConfigError("config: eval.mc_samples must be >= 1");
  }

  if (j.contains("replication")) {
    const json& r = j.at("replication");
    check_keys(r, "replication", {"runs", "base_seed", "seeds"});
    cfg.replication_runs = get_or<int>(r, "runs", cfg.replication_runs);
    cfg.replication_base_seed = get_or<std::uint64_t>(r, "base_seed", cfg.replication_base_seed);
    if (cfg.replication_runs < 1) {
      throw ConfigError("config: replication.runs must be >= 1");
    }
    if (r.contains("seeds")) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> seeds;
      for (const json& s : r.at("seeds")) {
        if (!s.is_array() || s.size() != 2) {
          throw ConfigError("config: replication.seeds entries must be [dataset_seed, train_seed]");
        }
        seeds.emplace_back(s.at(0).get<std::uint64_t>(), s.at(1).get<std::uint64_t>());
      }
      if (seeds.empty()) throw ConfigError("config: replication.seeds must be non-empty");
      cfg.replication_seeds = std::move(seeds);
    }
  }

  cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir);

  // validate dataset block against the generator requirements for synthetic
  if (spec.kind == train_eval::ExperimentSpec::Kind::synthetic) {
    if (spec.p < 12) {
      throw ConfigError("config: dataset.p must be >= 12 for the synthetic generator");
    }
    if (spec.q < 1 || spec.q > spec.p - 11) {
      throw ConfigError("config: dataset.q must be in [1, p-11]");
    }
    const long total = long(spec.split_sizes[0]) + spec.split_sizes[1] + spec.split_sizes[2];
    if (total > spec.n) {
      throw ConfigError("config: dataset.split sizes exceed n");
    }
  }
  (void)base_dir;
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config: failed to parse " + path.string() + ": " + e.what());
  } catch (const RuntimeError& e) {
    throw ConfigError(e.what());
  }
  return parse_experiment_config(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

void resolve_covariates(train_eval::ExperimentSpec& spec, const fs::path& base_dir) {
  if (spec.kind != train_eval::ExperimentSpec::Kind::semi_synthetic || spec.covariates) {
    return;
  }
  const fs::path given(spec.covariate_file);
  fs::path candidates[] = {given, base_dir / given, data_root() / given};
  for (const fs::path& c : candidates) {
    if (fs::exists(c)) {
      auto loaded = std::make_shared<Mat>(datagen::load_covariates(c));
      spec.covariates = loaded;
      spec.p = static_cast<int>(loaded->cols());
      spec.n = static_cast<int>(loaded->rows());
      const long total = long(spec.split_sizes[0]) + spec.split_sizes[1] + spec.split_sizes[2];
      if (total > spec.n) {
        throw ConfigError("config: dataset.split sizes exceed covariate file rows (" +
                          std::to_string(spec.n) + ")");
      }
      if (spec.q < 1 || spec.q > spec.p - 11) {
        throw ConfigError("config: dataset.q must be in [1, p-11] with p = " +
                          std::to_string(spec.p) + " from the covariate file");
      }
      return;
    }
  }
  throw ConfigError("config: covariate file not found: " + spec.covariate_file);
}

}  // namespace dbrlab::config
