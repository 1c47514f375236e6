#include "dbrlab/train_eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>
#include <utility>

#include "dbrlab/contrastive.hpp"
#include "dbrlab/io.hpp"

namespace dbrlab::train_eval {

using nlohmann::json;

std::string to_string(Mode m) {
  switch (m) {
    case Mode::full: return "full";
    case Mode::no_br: return "no_br";
    case Mode::no_pr: return "no_pr";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  if (s == "full") return Mode::full;
  if (s == "no_br") return Mode::no_br;
  if (s == "no_pr") return Mode::no_pr;
  throw ConfigError("unknown training mode: '" + s + "'");
}

std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::alpha: return "alpha";
    case SweepParam::repr_dim: return "K";
    case SweepParam::m: return "m";
  }
  return "?";
}

SweepParam sweep_param_from_string(const std::string& s) {
  if (s == "alpha") return SweepParam::alpha;
  if (s == "K" || s == "repr_dim") return SweepParam::repr_dim;
  if (s == "m") return SweepParam::m;
  throw ConfigError("unknown sweep parameter: '" + s + "' (expected alpha, K or m)");
}

void TrainConfig::validate() const {
  if (alpha < 0.0) throw ConfigError("train.alpha must be >= 0, got " + std::to_string(alpha));
  if (m < 0) throw ConfigError("train.m must be >= 0");
  if (batch_size < 8) {
    throw ConfigError("train.batch_size must be >= 8 (the partial distance measure needs "
                      "a usable batch), got " + std::to_string(batch_size));
  }
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (learning_rate < 0.0) throw ConfigError("train.learning_rate must be >= 0");
  if (stage1_epochs < 0) throw ConfigError("train.stage1_epochs must be >= 0");
  if (mode == Mode::no_pr && stage1_epochs > epochs) {
    throw ConfigError("train.stage1_epochs exceeds train.epochs");
  }
}

TreatmentInterval treatment_interval(const Mat& t_train, const MiseSpec& spec) {
  if (t_train.rows() < 2) {
    throw RuntimeError("treatment_interval: need at least 2 training treatments");
  }
  const Eigen::Index q = t_train.cols();
  TreatmentInterval iv;
  iv.lo = Vec(q);
  iv.hi = Vec(q);
  if (spec.interval == MiseSpec::Interval::empirical_range) {
    iv.lo = t_train.colwise().minCoeff().transpose();
    iv.hi = t_train.colwise().maxCoeff().transpose();
  } else {
    if (!(spec.quantile_lo >= 0.0 && spec.quantile_hi <= 1.0 &&
          spec.quantile_lo < spec.quantile_hi)) {
      throw ConfigError("eval.quantile bounds must satisfy 0 <= lo < hi <= 1");
    }
    for (Eigen::Index k = 0; k < q; ++k) {
      std::vector<double> col(t_train.rows());
      for (Eigen::Index i = 0; i < t_train.rows(); ++i) col[static_cast<std::size_t>(i)] = t_train(i, k);
      std::sort(col.begin(), col.end());
      auto quant = [&col](double f) {
        const double pos = f * static_cast<double>(col.size() - 1);
        const std::size_t i0 = static_cast<std::size_t>(pos);
        const std::size_t i1 = std::min(i0 + 1, col.size() - 1);
        const double frac = pos - static_cast<double>(i0);
        return col[i0] * (1.0 - frac) + col[i1] * frac;
      };
      iv.lo(k) = quant(spec.quantile_lo);
      iv.hi(k) = quant(spec.quantile_hi);
    }
  }
  return iv;
}

json RunManifest::to_json() const {
  json ep = json::array();
  for (const EpochRecord& r : epochs) {
    ep.push_back(json{{"train_mse", r.train_mse}, {"train_cr", r.train_cr},
                      {"val_mse", r.val_mse}});
  }
  auto bal = [](const BalanceRecord& b) {
    return json{{"balancing_g", b.balancing_g},
                {"balancing_phi", b.balancing_phi},
                {"prognostic_phi", b.prognostic_phi}};
  };
  return json{{"schema_version", 1},
              {"config", config},
              {"seed", seed},
              {"epochs", ep},
              {"selected_epoch", selected_epoch},
              {"test_mise", test_mise},
              {"balance", json{{"init", bal(balance_init)}, {"selected", bal(balance_selected)}}},
              {"wall_clock_s", wall_clock_s}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  if (j.at("schema_version").get<int>() != 1) {
    throw RuntimeError("manifest: unsupported schema_version");
  }
  m.config = j.at("config");
  m.seed = j.at("seed").get<std::uint64_t>();
  for (const json& e : j.at("epochs")) {
    m.epochs.push_back(EpochRecord{e.at("train_mse").get<double>(),
                                   e.at("train_cr").get<double>(),
                                   e.at("val_mse").get<double>()});
  }
  m.selected_epoch = j.at("selected_epoch").get<int>();
  m.test_mise = j.at("test_mise").get<double>();
  auto bal = [](const json& b) {
    return BalanceRecord{b.at("balancing_g").get<double>(), b.at("balancing_phi").get<double>(),
                         b.at("prognostic_phi").get<double>()};
  };
  m.balance_init = bal(j.at("balance").at("init"));
  m.balance_selected = bal(j.at("balance").at("selected"));
  m.wall_clock_s = j.at("wall_clock_s").get<double>();
  return m;
}

void RunManifest::save(const std::filesystem::path& path) const {
  io::atomic_write(path, to_json().dump(2) + "\n");
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  return from_json(json::parse(io::read_file(path)));
}

bool RunManifest::results_equal(const RunManifest& other) const {
  if (seed != other.seed || selected_epoch != other.selected_epoch ||
      test_mise != other.test_mise || epochs.size() != other.epochs.size()) {
    return false;
  }
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (epochs[i].train_mse != other.epochs[i].train_mse ||
        epochs[i].train_cr != other.epochs[i].train_cr ||
        epochs[i].val_mse != other.epochs[i].val_mse) {
      return false;
    }
  }
  auto same = [](const BalanceRecord& a, const BalanceRecord& b) {
    return a.balancing_g == b.balancing_g && a.balancing_phi == b.balancing_phi &&
           a.prognostic_phi == b.prognostic_phi;
  };
  return same(balance_init, other.balance_init) && same(balance_selected, other.balance_selected);
}

void adam_step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
  if (params.size() != grads.size()) {
    throw RuntimeError("adam_step: params/grads length mismatch");
  }
  if (state.m.empty()) {
    for (const Mat* p : params) {
      state.m.push_back(Mat::Zero(p->rows(), p->cols()));
      state.v.push_back(Mat::Zero(p->rows(), p->cols()));
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Mat& g = *grads[k];
    Mat& m = state.m[k];
    Mat& v = state.v[k];
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const Mat mhat = m / bc1;
    const Mat vhat = v / bc2;
    params[k]->array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
  }
}

void sgd_step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads, double lr) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    *params[k] -= lr * *grads[k];
  }
}

namespace {

Mat rows_of(const Mat& m, const std::vector<int>& idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  }
  return out;
}

Vec entries_of(const Vec& v, const std::vector<int>& idx) {
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

std::vector<Mat*> tensors_of(model::MlpParams& p) {
  std::vector<Mat*> out;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    out.push_back(&p.weights[l]);
    out.push_back(&p.biases[l]);
  }
  return out;
}

std::vector<ad::Var> vars_of(const model::TapedMlp& p) {
  std::vector<ad::Var> out;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    out.push_back(p.weights[l]);
    out.push_back(p.biases[l]);
  }
  return out;
}

double mean_sq_err(const model::CRNetModel& net, const Mat& x, const Mat& t, const Vec& y) {
  Mat pred = model::forward(net, x, t);
  return (pred.col(0) - y).squaredNorm() / static_cast<double>(y.size());
}

BalanceRecord balance_record(const model::CRNetModel& net, const Mat& x, const Mat& t,
                             const Vec& y, dep::Centering mode) {
  Mat phi = model::mlp_forward(net.phi, net.config.activation, x);
  Mat gphi = model::mlp_forward(net.g, net.config.activation, phi);
  Mat ymat = y;
  BalanceRecord rec;
  rec.balancing_g = dep::pdcor(x, t, gphi, mode);
  rec.balancing_phi = dep::pdcor(x, t, phi, mode);
  rec.prognostic_phi = dep::pdcor(x, ymat, phi, mode);
  return rec;
}

}  // namespace

TrainResult train(const TrainConfig& tc, model::CRNetConfig net_cfg, const datagen::Dataset& ds,
                  const datagen::Split& split, const MiseSpec& mise_spec) {
  const auto t_start = std::chrono::steady_clock::now();
  tc.validate();
  if (split.train.size() < 8) {
    throw ConfigError("train: training split too small (" + std::to_string(split.train.size()) +
                      " units)");
  }
  if (split.val.empty() || split.test.empty()) {
    throw ConfigError("train: validation and test splits must be non-empty");
  }
  net_cfg.covariate_dim = static_cast<int>(ds.x.cols());
  net_cfg.treatment_dim = static_cast<int>(ds.t.cols());
  net_cfg.validate();

  // raw split views
  const Mat x_tr_raw = rows_of(ds.x, split.train);
  const Mat t_tr_raw = rows_of(ds.t, split.train);
  const Vec y_tr = entries_of(ds.y, split.train);
  const Mat x_va_raw = rows_of(ds.x, split.val);
  const Mat t_va_raw = rows_of(ds.t, split.val);
  const Vec y_va = entries_of(ds.y, split.val);

  // standardization with training-split statistics; outcomes stay unscaled
  model::Standardizer x_scaler = model::Standardizer::fit(x_tr_raw);
  model::Standardizer t_scaler = model::Standardizer::fit(t_tr_raw);
  const Mat x_tr = x_scaler.apply(x_tr_raw);
  const Mat t_tr = t_scaler.apply(t_tr_raw);
  const Mat x_va = x_scaler.apply(x_va_raw);
  const Mat t_va = t_scaler.apply(t_va_raw);

  model::CRNetModel net = model::init_model(net_cfg, tc.seed);

  rng::Engine batch_eng = rng::make_engine(tc.seed, {rng::stream::batch_order});
  rng::Engine neg_eng = rng::make_engine(tc.seed, {rng::stream::negatives});

  const double alpha = tc.effective_alpha();
  const int stage1 = tc.mode == Mode::no_pr ? tc.resolved_stage1() : 0;
  const int n_train = static_cast<int>(split.train.size());

  AdamState opt_all, opt_repr, opt_outcome;

  RunManifest manifest;
  manifest.seed = tc.seed;
  manifest.balance_init = balance_record(net, x_va, t_va, y_va, tc.centering);

  double best_val = std::numeric_limits<double>::infinity();
  model::CRNetModel best_net = net;
  int best_epoch = -1;
  int since_improvement = 0;

  std::vector<int> order(static_cast<std::size_t>(n_train));
  for (int i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const bool stage1_active = tc.mode == Mode::no_pr && epoch < stage1;
    if (tc.mode == Mode::no_pr && epoch == stage1) {
      since_improvement = 0;  // stage boundary: restart the patience window
    }
    batch_eng.shuffle(order);

    // batch boundaries; a trailing remainder below 8 units merges into the
    // previous batch
    std::vector<std::pair<int, int>> batches;
    int at = 0;
    while (at < n_train) {
      int len = std::min(tc.batch_size, n_train - at);
      batches.emplace_back(at, len);
      at += len;
    }
    if (batches.size() > 1 && batches.back().second < 8) {
      batches[batches.size() - 2].second += batches.back().second;
      batches.pop_back();
    }

    double epoch_sq_err = 0.0;
    double epoch_cr = 0.0;
    int cr_batches = 0;

    for (const auto& [start, len] : batches) {
      std::vector<int> rows(order.begin() + start, order.begin() + start + len);
      const Mat x_b = rows_of(x_tr, rows);
      const Mat t_b = rows_of(t_tr, rows);
      Mat y_b(len, 1);
      for (int i = 0; i < len; ++i) y_b(i, 0) = y_tr(rows[static_cast<std::size_t>(i)]);

      try {
        ad::Tape tape;
        model::TapedModel taped = model::put_on_tape(tape, net);
        std::vector<Mat*> tensors;
        std::vector<ad::Var> vars;
        ad::Var loss{};
        double batch_mse = 0.0;

        if (stage1_active) {
          // balancing-only stage: contrastive loss, covariate encoder and
          // projection head update
          contrastive::NegativeSet negs =
              tc.m > 0 ? contrastive::shuffle_negatives(x_b, tc.m, neg_eng)
                       : contrastive::NegativeSet{};
          const ad::Activation act = net_cfg.activation;
          contrastive::ReprFn repr = [&taped, act](ad::Tape& tp, const Mat& xin) {
            ad::Var ph = model::mlp_forward(tp, taped.phi, act, tp.input(xin));
            return model::mlp_forward(tp, taped.g, act, ph);
          };
          loss = contrastive::cr_loss(tape, x_b, t_b, repr, negs, tc.centering);
          epoch_cr += tape.scalar(loss);
          ++cr_batches;
          batch_mse = (model::forward(net, x_b, t_b).col(0) - y_b.col(0)).squaredNorm();
          for (Mat* p : tensors_of(net.phi)) tensors.push_back(p);
          for (Mat* p : tensors_of(net.g)) tensors.push_back(p);
          for (ad::Var v : vars_of(taped.phi)) vars.push_back(v);
          for (ad::Var v : vars_of(taped.g)) vars.push_back(v);
        } else if (tc.mode == Mode::no_pr) {
          // outcome-only stage: phi and g frozen
          loss = model::mse_loss(tape, taped, x_b, t_b, y_b);
          batch_mse = tape.scalar(loss);
          for (Mat* p : tensors_of(net.psi)) tensors.push_back(p);
          for (Mat* p : tensors_of(net.h)) tensors.push_back(p);
          for (ad::Var v : vars_of(taped.psi)) vars.push_back(v);
          for (ad::Var v : vars_of(taped.h)) vars.push_back(v);
        } else {
          contrastive::NegativeSet negs;
          if (alpha > 0.0 && tc.m > 0) {
            negs = contrastive::shuffle_negatives(x_b, tc.m, neg_eng);
          }
          loss = model::final_loss(tape, taped, x_b, t_b, y_b, alpha, negs, tc.centering);
          if (alpha > 0.0) {
            batch_mse = (model::forward(net, x_b, t_b).col(0) - y_b.col(0)).squaredNorm();
            epoch_cr += (tape.scalar(loss) - batch_mse) / alpha;
            ++cr_batches;
          } else {
            batch_mse = tape.scalar(loss);
          }
          for (model::MlpParams* p : {&net.phi, &net.psi, &net.g, &net.h}) {
            for (Mat* t : tensors_of(*p)) tensors.push_back(t);
          }
          for (const model::TapedMlp* p : {&taped.phi, &taped.psi, &taped.g, &taped.h}) {
            for (ad::Var v : vars_of(*p)) vars.push_back(v);
          }
        }

        if (!std::isfinite(tape.scalar(loss))) {
          throw RuntimeError("non-finite loss");
        }
        epoch_sq_err += batch_mse;

        tape.backward(loss);
        std::vector<const Mat*> grads;
        grads.reserve(vars.size());
        for (ad::Var v : vars) grads.push_back(&tape.grad(v));
        AdamState& st = stage1_active ? opt_repr
                        : (tc.mode == Mode::no_pr ? opt_outcome : opt_all);
        if (tc.optimizer == OptimizerKind::adam) {
          adam_step(tensors, grads, st, tc.learning_rate);
        } else {
          sgd_step(tensors, grads, tc.learning_rate);
        }
      } catch (const std::exception& e) {
        throw RuntimeError("training diverged at epoch " + std::to_string(epoch) + ": " +
                           e.what() + " (train mse so far " + std::to_string(epoch_sq_err) +
                           ", cr " + std::to_string(epoch_cr) + ")");
      }
    }

    EpochRecord rec;
    rec.train_mse = epoch_sq_err / static_cast<double>(n_train);
    rec.train_cr = cr_batches > 0 ? epoch_cr / static_cast<double>(cr_batches) : 0.0;
    rec.val_mse = mean_sq_err(net, x_va, t_va, y_va);
    if (!std::isfinite(rec.val_mse) || !std::isfinite(rec.train_mse)) {
      throw RuntimeError("training diverged at epoch " + std::to_string(epoch) +
                         ": non-finite epoch loss (train " + std::to_string(rec.train_mse) +
                         ", val " + std::to_string(rec.val_mse) + ")");
    }
    manifest.epochs.push_back(rec);

    if (rec.val_mse < best_val) {
      best_val = rec.val_mse;
      best_net = net;
      best_epoch = epoch;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    // stage 1 of no_pr optimizes the contrastive loss; validation MSE based
    // stopping only applies once the outcome path is being trained
    if (!stage1_active && tc.patience > 0 && since_improvement >= tc.patience) {
      break;
    }
  }

  manifest.selected_epoch = best_epoch;

  TrainResult result;
  result.fitted = model::FittedCRNet{std::move(best_net), x_scaler, t_scaler};
  manifest.balance_selected =
      balance_record(result.fitted.net, x_va, t_va, y_va, tc.centering);

  // test MISE on the raw treatment scale
  const Mat x_te_raw = rows_of(ds.x, split.test);
  TreatmentInterval interval = treatment_interval(t_tr_raw, mise_spec);
  const model::FittedCRNet& fitted = result.fitted;
  PredictFn predict = [&fitted](const Mat& x_row, const Mat& t_grid) {
    return fitted.predict_curve(x_row, t_grid);
  };
  manifest.test_mise = mise(predict, x_te_raw, ds.weights, mise_spec, interval);

  manifest.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  result.manifest = std::move(manifest);
  return result;
}

double mise(const PredictFn& predict, const Mat& x_test, const datagen::GeneratorWeights& w,
            const MiseSpec& spec, const TreatmentInterval& interval) {
  if (x_test.rows() == 0) {
    throw RuntimeError("mise: empty test set");
  }
  const int q = static_cast<int>(interval.lo.size());
  const auto integration = spec.resolve(q);

  Mat t_points;
  Vec quad_weights;
  if (integration == MiseSpec::Integration::grid_1d) {
    if (q != 1) {
      throw ConfigError("mise: grid integration requires a one-dimensional treatment");
    }
    const int g = spec.grid_size;
    if (g < 2) throw ConfigError("mise: grid_size must be >= 2");
    const double a = interval.lo(0), b = interval.hi(0);
    const double h = (b - a) / static_cast<double>(g - 1);
    t_points = Mat(g, 1);
    quad_weights = Vec(g);
    for (int i = 0; i < g; ++i) {
      t_points(i, 0) = a + h * static_cast<double>(i);
      quad_weights(i) = (i == 0 || i == g - 1) ? h / 2.0 : h;
    }
  } else {
    const int L = spec.mc_samples;
    if (L < 1) throw ConfigError("mise: mc_samples must be >= 1");
    double volume = 1.0;
    for (int k = 0; k < q; ++k) volume *= interval.hi(k) - interval.lo(k);
    rng::Engine eng(spec.eval_seed);
    t_points = Mat(L, q);
    for (int l = 0; l < L; ++l) {
      for (int k = 0; k < q; ++k) {
        t_points(l, k) = eng.uniform(interval.lo(k), interval.hi(k));
      }
    }
    quad_weights = Vec::Constant(L, volume / static_cast<double>(L));
  }

  double total = 0.0;
  for (Eigen::Index i = 0; i < x_test.rows(); ++i) {
    const Mat x_row = x_test.row(i);
    Vec predicted = predict(x_row, t_points);
    Vec truth = datagen::outcome_formula(x_row.replicate(t_points.rows(), 1), t_points, w);
    total += quad_weights.dot((predicted - truth).array().square().matrix());
  }
  return total / static_cast<double>(x_test.rows());
}

json ExperimentSpec::snapshot() const {
  json ds{{"kind", kind == Kind::synthetic ? "synthetic" : "semi_synthetic"},
          {"name", name},
          {"n", n},
          {"p", p},
          {"q", q},
          {"split", split_sizes},
          {"seed", dataset_seed},
          {"outcome_noise_sd", outcome_noise_sd}};
  if (!covariate_file.empty()) ds["covariate_file"] = covariate_file;
  json md{{"repr_dim", net.repr_dim},
          {"treat_repr_dim", net.treat_repr_dim},
          {"proj_dim", net.proj_dim},
          {"phi_hidden", net.phi_hidden},
          {"psi_hidden", net.psi_hidden},
          {"g_hidden", net.g_hidden},
          {"h_hidden", net.h_hidden},
          {"activation", ad::to_string(net.activation)}};
  json tr{{"alpha", train.alpha},
          {"m", train.m},
          {"batch_size", train.batch_size},
          {"epochs", train.epochs},
          {"learning_rate", train.learning_rate},
          {"optimizer", train.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
          {"seed", train.seed},
          {"mode", to_string(train.mode)},
          {"stage1_epochs", train.stage1_epochs},
          {"patience", train.patience},
          {"centering", dep::to_string(train.centering)}};
  std::string integ = "auto";
  if (mise.integration == MiseSpec::Integration::grid_1d) integ = "grid";
  if (mise.integration == MiseSpec::Integration::monte_carlo) integ = "monte_carlo";
  json ev{{"integration", integ},
          {"grid_size", mise.grid_size},
          {"mc_samples", mise.mc_samples},
          {"interval",
           mise.interval == MiseSpec::Interval::empirical_range ? "empirical" : "quantile"},
          {"quantile_lo", mise.quantile_lo},
          {"quantile_hi", mise.quantile_hi}};
  return json{{"dataset", ds}, {"model", md}, {"train", tr}, {"eval", ev}};
}

datagen::Dataset make_dataset(const ExperimentSpec& spec, std::uint64_t dataset_seed) {
  if (spec.kind == ExperimentSpec::Kind::synthetic) {
    return datagen::make_synthetic(spec.n, spec.p, spec.q, dataset_seed, spec.outcome_noise_sd);
  }
  if (!spec.covariates) {
    throw ConfigError("semi-synthetic experiment without loaded covariates");
  }
  return datagen::make_semi_synthetic(*spec.covariates, spec.q, dataset_seed,
                                      spec.name, spec.outcome_noise_sd);
}

RunOutput run_single(const ExperimentSpec& spec, std::uint64_t dataset_seed,
                     std::uint64_t train_seed) {
  datagen::Dataset ds = make_dataset(spec, dataset_seed);
  const int n_total = static_cast<int>(ds.x.rows());
  datagen::Split split = datagen::make_split(n_total, spec.split_sizes, dataset_seed);
  TrainConfig tc = spec.train;
  tc.seed = train_seed;
  TrainResult tr = train(tc, spec.net, ds, split, spec.mise);
  RunOutput out;
  out.manifest = std::move(tr.manifest);
  json cfg = spec.snapshot();
  cfg["dataset"]["seed"] = dataset_seed;
  cfg["train"]["seed"] = train_seed;
  out.manifest.config = cfg;
  out.fitted = std::move(tr.fitted);
  return out;
}

void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        fn(i);
      }
    });
  }
  for (std::thread& th : pool) th.join();
}

namespace {

ReplicateResult replicate_impl(const ExperimentSpec& spec,
                               const std::vector<std::pair<std::uint64_t, std::uint64_t>>& seeds,
                               int jobs) {
  const int runs = static_cast<int>(seeds.size());
  std::vector<std::optional<RunManifest>> slots(static_cast<std::size_t>(runs));
  std::vector<std::string> errors(static_cast<std::size_t>(runs));
  parallel_for(runs, jobs, [&](int r) {
    try {
      RunOutput out = run_single(spec, seeds[static_cast<std::size_t>(r)].first,
                                 seeds[static_cast<std::size_t>(r)].second);
      slots[static_cast<std::size_t>(r)] = std::move(out.manifest);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(r)] = e.what();
    }
  });
  ReplicateResult res;
  for (int r = 0; r < runs; ++r) {
    if (slots[static_cast<std::size_t>(r)].has_value()) {
      res.manifests.push_back(std::move(*slots[static_cast<std::size_t>(r)]));
      res.train_seeds.push_back(seeds[static_cast<std::size_t>(r)].second);
    } else {
      res.errors.push_back("run " + std::to_string(r) + ": " +
                           errors[static_cast<std::size_t>(r)]);
    }
  }
  if (res.manifests.empty()) {
    throw RuntimeError("replicate: all " + std::to_string(runs) + " runs failed; first error: " +
                       (res.errors.empty() ? "?" : res.errors.front()));
  }
  const double n = static_cast<double>(res.manifests.size());
  double mean = 0.0;
  for (const RunManifest& m : res.manifests) mean += m.test_mise;
  mean /= n;
  double ss = 0.0;
  for (const RunManifest& m : res.manifests) {
    ss += (m.test_mise - mean) * (m.test_mise - mean);
  }
  res.mean = mean;
  res.stddev = res.manifests.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  res.degenerate_std = res.manifests.size() < 2;
  return res;
}

}  // namespace

ReplicateResult replicate(const ExperimentSpec& spec, int runs, std::uint64_t base_seed,
                          int jobs) {
  if (runs < 1) throw ConfigError("replicate: runs must be >= 1");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> seeds;
  seeds.reserve(static_cast<std::size_t>(runs));
  for (int r = 0; r < runs; ++r) {
    seeds.emplace_back(
        rng::derive_seed(base_seed, {rng::stream::dataset, static_cast<std::uint64_t>(r)}),
        rng::derive_seed(base_seed, {rng::stream::train, static_cast<std::uint64_t>(r)}));
  }
  return replicate_seeded(spec, seeds, jobs);
}

ReplicateResult replicate_seeded(const ExperimentSpec& spec,
                                 const std::vector<std::pair<std::uint64_t, std::uint64_t>>& seeds,
                                 int jobs) {
  if (seeds.empty()) throw ConfigError("replicate: need at least one seed pair");
  return replicate_impl(spec, seeds, jobs);
}

std::vector<SweepCell> sweep(const ExperimentSpec& spec, SweepParam param,
                             const std::vector<double>& values, int runs,
                             std::uint64_t base_seed, int jobs) {
  if (values.empty()) throw ConfigError("sweep: values must be non-empty");
  std::vector<SweepCell> cells;
  for (double v : values) {
    ExperimentSpec cell_spec = spec;
    switch (param) {
      case SweepParam::alpha:
        if (v < 0.0) throw ConfigError("sweep: alpha must be >= 0");
        cell_spec.train.alpha = v;
        break;
      case SweepParam::repr_dim:
        if (v < 1.0) throw ConfigError("sweep: K must be >= 1");
        cell_spec.net.repr_dim = static_cast<int>(v);
        break;
      case SweepParam::m:
        if (v < 0.0) throw ConfigError("sweep: m must be >= 0");
        cell_spec.train.m = static_cast<int>(v);
        break;
    }
    SweepCell cell;
    cell.value = v;
    cell.result = replicate(cell_spec, runs, base_seed, jobs);
    cells.push_back(std::move(cell));
  }
  return cells;
}

}  // namespace dbrlab::train_eval
