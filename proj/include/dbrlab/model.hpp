#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dbrlab/autodiff.hpp"
#include "dbrlab/common.hpp"
#include "dbrlab/contrastive.hpp"
#include "dbrlab/dependence.hpp"
#include "dbrlab/rng.hpp"

namespace dbrlab::model {

struct EncoderConfig {
  int input_dim = 0;
  std::vector<int> hidden;
  int output_dim = 0;
  ad::Activation activation = ad::Activation::elu;
};

// Architecture of the four blocks: covariate encoder phi, treatment encoder
// psi, projection head g (feeds only the contrastive regularizer), outcome
// estimator h on concat(phi(X), psi(T)).
struct CRNetConfig {
  int covariate_dim = 0;   // p
  int treatment_dim = 0;   // q
  int repr_dim = 32;       // K, output of phi
  int treat_repr_dim = 16; // K_T, output of psi
  int proj_dim = 16;       // output of g
  std::vector<int> phi_hidden{64, 64};
  std::vector<int> psi_hidden{16};
  std::vector<int> g_hidden{};
  std::vector<int> h_hidden{64, 64};
  ad::Activation activation = ad::Activation::elu;

  EncoderConfig phi_config() const;
  EncoderConfig psi_config() const;
  EncoderConfig g_config() const;
  EncoderConfig h_config() const;
  void validate() const;
};

// One MLP: out = act(...act(x W0 + b0)... W_last + b_last), linear output
// layer. Weights are (in x out); biases are (1 x out).
struct MlpParams {
  std::vector<Mat> weights;
  std::vector<Mat> biases;
};

struct CRNetModel {
  CRNetConfig config;
  MlpParams phi, psi, g, h;
};

// Scaled uniform fan-in init, |w| <= sqrt(6 / fan_in); biases zero.
MlpParams init_mlp(const EncoderConfig& cfg, rng::Engine& eng);
CRNetModel init_model(const CRNetConfig& cfg, std::uint64_t seed);

Mat mlp_forward(const MlpParams& p, ad::Activation act, const Mat& in);

// h(concat(phi(X), psi(T))), shape (b x 1). Inputs are assumed already on
// the model's training scale.
Mat forward(const CRNetModel& m, const Mat& x, const Mat& t);

// Dose-response curve of one unit over a grid of treatment values.
Vec predict_hdrc(const CRNetModel& m, const Mat& x_row, const Mat& t_grid);

// ----- taped variants for training -----

struct TapedMlp {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};

struct TapedModel {
  TapedMlp phi, psi, g, h;
  const CRNetConfig* config = nullptr;
};

TapedModel put_on_tape(ad::Tape& tape, const CRNetModel& m);
ad::Var mlp_forward(ad::Tape& tape, const TapedMlp& p, ad::Activation act, ad::Var in);
ad::Var forward(ad::Tape& tape, const TapedModel& m, const Mat& x, const Mat& t);

// sum_i (y_i - yhat_i)^2 over the batch (a sum, not a mean).
ad::Var mse_loss(ad::Tape& tape, const TapedModel& m, const Mat& x, const Mat& t, const Mat& y);

// mse + alpha * cr. With alpha = 0 the contrastive term is not built at all,
// so the value and every gradient equal the pure mse path bit for bit.
ad::Var final_loss(ad::Tape& tape, const TapedModel& m, const Mat& x, const Mat& t, const Mat& y,
                   double alpha, const contrastive::NegativeSet& negatives, dep::Centering mode);

// Per-column affine map to zero mean / unit variance; constant columns are
// left unscaled.
struct Standardizer {
  Vec mean;
  Vec stdev;
  static Standardizer fit(const Mat& rows);
  Mat apply(const Mat& rows) const;
};

// A trained network plus the train-split standardization it expects.
struct FittedCRNet {
  CRNetModel net;
  Standardizer x_scaler;
  Standardizer t_scaler;

  Vec predict_curve(const Mat& x_row_raw, const Mat& t_grid_raw) const;
  Mat predict(const Mat& x_raw, const Mat& t_raw) const;
};

// Binary checkpoint with an embedded format version; save -> load round
// trips are bit-exact.
void save_checkpoint(const std::filesystem::path& path, const FittedCRNet& f);
FittedCRNet load_checkpoint(const std::filesystem::path& path);

}  // namespace dbrlab::model
