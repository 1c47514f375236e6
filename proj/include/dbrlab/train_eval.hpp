#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbrlab/common.hpp"
#include "dbrlab/datagen.hpp"
#include "dbrlab/dependence.hpp"
#include "dbrlab/model.hpp"

namespace dbrlab::train_eval {

enum class Mode { full, no_br, no_pr };
enum class OptimizerKind { adam, sgd };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct TrainConfig {
  double alpha = 0.5;
  int m = 1;
  int batch_size = 256;
  int epochs = 300;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
  Mode mode = Mode::full;
  int stage1_epochs = 0;  // no_pr only; 0 resolves to epochs / 2
  int patience = 30;      // early stop on validation MSE; <= 0 disables
  dep::Centering centering = dep::Centering::u_centered;

  void validate() const;
  double effective_alpha() const { return mode == Mode::no_br ? 0.0 : alpha; }
  int resolved_stage1() const {
    return stage1_epochs > 0 ? stage1_epochs : std::max(1, epochs / 2);
  }
};

struct MiseSpec {
  enum class Integration { auto_resolve, grid_1d, monte_carlo };
  enum class Interval { empirical_range, quantile };

  Integration integration = Integration::auto_resolve;
  int grid_size = 65;    // grid_1d
  int mc_samples = 256;  // monte_carlo
  // Default to the central dose range: the treatment rule's cubic noise term
  // produces extreme tails, and integrating into them swamps the curve error
  // with extrapolation error for every estimator.
  Interval interval = Interval::quantile;
  double quantile_lo = 0.05;
  double quantile_hi = 0.95;
  std::uint64_t eval_seed = 0xC0FFEE;

  Integration resolve(int q) const {
    if (integration != Integration::auto_resolve) return integration;
    return q == 1 ? Integration::grid_1d : Integration::monte_carlo;
  }
};

// Per-dimension integration bounds derived from training-split treatments.
struct TreatmentInterval {
  Vec lo, hi;
};
TreatmentInterval treatment_interval(const Mat& t_train, const MiseSpec& spec);

struct BalanceRecord {
  double balancing_g = 0.0;    // pdcor(X, T, g(phi(X)))
  double balancing_phi = 0.0;  // pdcor(X, T, phi(X))
  double prognostic_phi = 0.0; // pdcor(X, Y, phi(X))
};

struct EpochRecord {
  double train_mse = 0.0;  // per-unit mean over the epoch
  double train_cr = 0.0;   // per-batch mean; 0 when the term is not part of the objective
  double val_mse = 0.0;    // per-unit mean
};

struct RunManifest {
  nlohmann::json config;  // full experiment snapshot, filled by the caller
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  int selected_epoch = -1;
  double test_mise = 0.0;
  BalanceRecord balance_init, balance_selected;
  double wall_clock_s = 0.0;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static RunManifest load(const std::filesystem::path& path);

  // Equality of everything a replay must reproduce (config snapshot and wall
  // clock excluded).
  bool results_equal(const RunManifest& other) const;
};

// Bias-corrected adaptive moment update, applied tensor-by-tensor.
struct AdamState {
  std::vector<Mat> m, v;
  long step = 0;
};
void adam_step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
               AdamState& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);
void sgd_step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads, double lr);

struct TrainResult {
  model::FittedCRNet fitted;
  RunManifest manifest;
};

// Mini-batch training with validation-based snapshot selection; fills the
// manifest (except the config snapshot) including the test MISE.
TrainResult train(const TrainConfig& tc, model::CRNetConfig net, const datagen::Dataset& ds,
                  const datagen::Split& split, const MiseSpec& mise_spec);

// Mean integrated squared error of `predict` against the generator ground
// truth over the treatment interval; prediction and truth are evaluated on
// the raw treatment scale.
using PredictFn = std::function<Vec(const Mat& x_row, const Mat& t_grid)>;
double mise(const PredictFn& predict, const Mat& x_test, const datagen::GeneratorWeights& w,
            const MiseSpec& spec, const TreatmentInterval& interval);

// ----- experiment-level drivers -----

struct ExperimentSpec {
  enum class Kind { synthetic, semi_synthetic };
  Kind kind = Kind::synthetic;
  std::string name = "Data-1";
  int n = 3000, p = 100, q = 1;
  std::array<int, 3> split_sizes{2100, 600, 300};
  std::uint64_t dataset_seed = 1;
  double outcome_noise_sd = 0.0;
  std::shared_ptr<const Mat> covariates;  // semi_synthetic: preloaded file contents
  std::string covariate_file;             // provenance only
  model::CRNetConfig net;                 // covariate/treatment dims filled per dataset
  TrainConfig train;
  MiseSpec mise;

  nlohmann::json snapshot() const;
};

datagen::Dataset make_dataset(const ExperimentSpec& spec, std::uint64_t dataset_seed);

struct RunOutput {
  RunManifest manifest;
  model::FittedCRNet fitted;
};
RunOutput run_single(const ExperimentSpec& spec, std::uint64_t dataset_seed,
                     std::uint64_t train_seed);

struct ReplicateResult {
  double mean = 0.0;
  double stddev = 0.0;  // sample std; 0 by convention when R == 1 (flagged)
  bool degenerate_std = false;
  std::vector<RunManifest> manifests;           // completed runs
  std::vector<std::string> errors;              // per-run failures, if any
  std::vector<std::uint64_t> train_seeds;
};

// R runs with independently derived (dataset seed, train seed) pairs; cells
// may execute in parallel (jobs > 1) without affecting results.
ReplicateResult replicate(const ExperimentSpec& spec, int runs, std::uint64_t base_seed,
                          int jobs);
// Explicit seed pairs (dataset, train) for paired designs and tests.
ReplicateResult replicate_seeded(const ExperimentSpec& spec,
                                 const std::vector<std::pair<std::uint64_t, std::uint64_t>>& seeds,
                                 int jobs);

enum class SweepParam { alpha, repr_dim, m };
std::string to_string(SweepParam p);
SweepParam sweep_param_from_string(const std::string& s);

struct SweepCell {
  double value = 0.0;
  ReplicateResult result;
};

// One replicate() per value with shared seed derivation across values, so
// comparisons are paired.
std::vector<SweepCell> sweep(const ExperimentSpec& spec, SweepParam param,
                             const std::vector<double>& values, int runs,
                             std::uint64_t base_seed, int jobs);

// Runs fn(0..count-1), at most `jobs` at a time. fn must not throw.
void parallel_for(int count, int jobs, const std::function<void(int)>& fn);

}  // namespace dbrlab::train_eval
