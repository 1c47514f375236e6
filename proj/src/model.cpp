#include "dbrlab/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "dbrlab/io.hpp"

namespace dbrlab::model {

using nlohmann::json;

EncoderConfig CRNetConfig::phi_config() const {
  return EncoderConfig{covariate_dim, phi_hidden, repr_dim, activation};
}

EncoderConfig CRNetConfig::psi_config() const {
  return EncoderConfig{treatment_dim, psi_hidden, treat_repr_dim, activation};
}

EncoderConfig CRNetConfig::g_config() const {
  return EncoderConfig{repr_dim, g_hidden, proj_dim, activation};
}

EncoderConfig CRNetConfig::h_config() const {
  return EncoderConfig{repr_dim + treat_repr_dim, h_hidden, 1, activation};
}

void CRNetConfig::validate() const {
  auto check_dim = [](int v, const char* what) {
    if (v < 1) {
      throw ConfigError(std::string("model config: ") + what + " must be >= 1, got " +
                        std::to_string(v));
    }
  };
  check_dim(covariate_dim, "covariate_dim");
  check_dim(treatment_dim, "treatment_dim");
  check_dim(repr_dim, "repr_dim");
  check_dim(treat_repr_dim, "treat_repr_dim");
  check_dim(proj_dim, "proj_dim");
  for (const auto* hs : {&phi_hidden, &psi_hidden, &g_hidden, &h_hidden}) {
    for (int w : *hs) check_dim(w, "hidden width");
  }
}

MlpParams init_mlp(const EncoderConfig& cfg, rng::Engine& eng) {
  if (cfg.input_dim < 1 || cfg.output_dim < 1) {
    throw ConfigError("init_mlp: dims must be >= 1");
  }
  std::vector<int> dims;
  dims.push_back(cfg.input_dim);
  for (int w : cfg.hidden) {
    if (w < 1) throw ConfigError("init_mlp: hidden width must be >= 1");
    dims.push_back(w);
  }
  dims.push_back(cfg.output_dim);
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Mat w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        w(i, j) = eng.uniform(-bound, bound);
      }
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Mat::Zero(1, fan_out));
  }
  return p;
}

CRNetModel init_model(const CRNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  CRNetModel m;
  m.config = cfg;
  rng::Engine e_phi = rng::make_engine(seed, {rng::stream::model_init, 0});
  rng::Engine e_psi = rng::make_engine(seed, {rng::stream::model_init, 1});
  rng::Engine e_g = rng::make_engine(seed, {rng::stream::model_init, 2});
  rng::Engine e_h = rng::make_engine(seed, {rng::stream::model_init, 3});
  m.phi = init_mlp(cfg.phi_config(), e_phi);
  m.psi = init_mlp(cfg.psi_config(), e_psi);
  m.g = init_mlp(cfg.g_config(), e_g);
  m.h = init_mlp(cfg.h_config(), e_h);
  return m;
}

Mat mlp_forward(const MlpParams& p, ad::Activation act, const Mat& in) {
  Mat cur = in;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    if (cur.cols() != p.weights[l].rows()) {
      throw RuntimeError("mlp_forward: shape mismatch " + shape_str(cur) + " vs weight " +
                         shape_str(p.weights[l]));
    }
    Mat z = cur * p.weights[l];
    z.rowwise() += p.biases[l].row(0);
    if (l + 1 < p.weights.size()) {
      switch (act) {
        case ad::Activation::relu:
          z = z.cwiseMax(0.0);
          break;
        case ad::Activation::elu:
          z = z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
          break;
        case ad::Activation::tanh:
          z = z.array().tanh().matrix();
          break;
        case ad::Activation::identity:
          break;
      }
    }
    cur = std::move(z);
  }
  return cur;
}

Mat forward(const CRNetModel& m, const Mat& x, const Mat& t) {
  if (x.cols() != m.config.covariate_dim) {
    throw RuntimeError("forward: covariate width " + std::to_string(x.cols()) + " != configured " +
                       std::to_string(m.config.covariate_dim));
  }
  if (t.cols() != m.config.treatment_dim) {
    throw RuntimeError("forward: treatment width " + std::to_string(t.cols()) +
                       " != configured " + std::to_string(m.config.treatment_dim));
  }
  if (x.rows() != t.rows()) {
    throw RuntimeError("forward: batch mismatch " + shape_str(x) + " vs " + shape_str(t));
  }
  Mat phi = mlp_forward(m.phi, m.config.activation, x);
  Mat psi = mlp_forward(m.psi, m.config.activation, t);
  Mat joint(phi.rows(), phi.cols() + psi.cols());
  joint << phi, psi;
  return mlp_forward(m.h, m.config.activation, joint);
}

Vec predict_hdrc(const CRNetModel& m, const Mat& x_row, const Mat& t_grid) {
  if (x_row.rows() != 1) {
    throw RuntimeError("predict_hdrc: expected a single covariate row, got " + shape_str(x_row));
  }
  Mat x_block = x_row.replicate(t_grid.rows(), 1);
  return forward(m, x_block, t_grid).col(0);
}

TapedModel put_on_tape(ad::Tape& tape, const CRNetModel& m) {
  auto lift = [&tape](const MlpParams& p) {
    TapedMlp out;
    for (const Mat& w : p.weights) out.weights.push_back(tape.param(w));
    for (const Mat& b : p.biases) out.biases.push_back(tape.param(b));
    return out;
  };
  TapedModel tm;
  tm.phi = lift(m.phi);
  tm.psi = lift(m.psi);
  tm.g = lift(m.g);
  tm.h = lift(m.h);
  tm.config = &m.config;
  return tm;
}

ad::Var mlp_forward(ad::Tape& tape, const TapedMlp& p, ad::Activation act, ad::Var in) {
  ad::Var cur = in;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    cur = tape.add_rowvec(tape.matmul(cur, p.weights[l]), p.biases[l]);
    if (l + 1 < p.weights.size()) {
      cur = tape.activation(cur, act);
    }
  }
  return cur;
}

ad::Var forward(ad::Tape& tape, const TapedModel& m, const Mat& x, const Mat& t) {
  const ad::Activation act = m.config->activation;
  ad::Var phi = mlp_forward(tape, m.phi, act, tape.input(x));
  ad::Var psi = mlp_forward(tape, m.psi, act, tape.input(t));
  ad::Var joint = tape.concat_cols({phi, psi});
  return mlp_forward(tape, m.h, act, joint);
}

ad::Var mse_loss(ad::Tape& tape, const TapedModel& m, const Mat& x, const Mat& t, const Mat& y) {
  if (y.rows() != x.rows() || y.cols() != 1) {
    throw RuntimeError("mse_loss: outcome must be (b x 1) matching the batch, got " +
                       shape_str(y));
  }
  ad::Var yhat = forward(tape, m, x, t);
  ad::Var resid = tape.sub(tape.input(y), yhat);
  return tape.sum(tape.square(resid));
}

ad::Var final_loss(ad::Tape& tape, const TapedModel& m, const Mat& x, const Mat& t, const Mat& y,
                   double alpha, const contrastive::NegativeSet& negatives, dep::Centering mode) {
  if (alpha < 0.0) {
    throw ConfigError("final_loss: alpha must be >= 0, got " + std::to_string(alpha));
  }
  ad::Var mse = mse_loss(tape, m, x, t, y);
  if (alpha == 0.0) {
    return mse;
  }
  const ad::Activation act = m.config->activation;
  contrastive::ReprFn repr = [&m, act](ad::Tape& tp, const Mat& xin) {
    ad::Var ph = mlp_forward(tp, m.phi, act, tp.input(xin));
    return mlp_forward(tp, m.g, act, ph);
  };
  ad::Var cr = contrastive::cr_loss(tape, x, t, repr, negatives, mode);
  return tape.add(mse, tape.scale(cr, alpha));
}

Standardizer Standardizer::fit(const Mat& rows) {
  Standardizer s;
  const double n = static_cast<double>(rows.rows());
  s.mean = rows.colwise().mean().transpose();
  Vec var(rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    var(j) = (rows.col(j).array() - s.mean(j)).square().sum() / n;
  }
  s.stdev = var.cwiseSqrt();
  for (Eigen::Index j = 0; j < s.stdev.size(); ++j) {
    if (s.stdev(j) < 1e-12) s.stdev(j) = 1.0;  // constant column
  }
  return s;
}

Mat Standardizer::apply(const Mat& rows) const {
  if (rows.cols() != mean.size()) {
    throw RuntimeError("standardizer: column mismatch " + std::to_string(rows.cols()) + " vs " +
                       std::to_string(mean.size()));
  }
  Mat out = rows;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    out.col(j) = (out.col(j).array() - mean(j)) / stdev(j);
  }
  return out;
}

Vec FittedCRNet::predict_curve(const Mat& x_row_raw, const Mat& t_grid_raw) const {
  Mat xs = x_scaler.apply(x_row_raw);
  Mat ts = t_scaler.apply(t_grid_raw);
  return predict_hdrc(net, xs, ts);
}

Mat FittedCRNet::predict(const Mat& x_raw, const Mat& t_raw) const {
  return forward(net, x_scaler.apply(x_raw), t_scaler.apply(t_raw));
}

// ----- checkpoint -----

namespace {

constexpr char kMagic[8] = {'D', 'B', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

json config_to_json(const CRNetConfig& c) {
  return json{{"covariate_dim", c.covariate_dim},
              {"treatment_dim", c.treatment_dim},
              {"repr_dim", c.repr_dim},
              {"treat_repr_dim", c.treat_repr_dim},
              {"proj_dim", c.proj_dim},
              {"phi_hidden", c.phi_hidden},
              {"psi_hidden", c.psi_hidden},
              {"g_hidden", c.g_hidden},
              {"h_hidden", c.h_hidden},
              {"activation", ad::to_string(c.activation)}};
}

CRNetConfig config_from_json(const json& j) {
  CRNetConfig c;
  c.covariate_dim = j.at("covariate_dim").get<int>();
  c.treatment_dim = j.at("treatment_dim").get<int>();
  c.repr_dim = j.at("repr_dim").get<int>();
  c.treat_repr_dim = j.at("treat_repr_dim").get<int>();
  c.proj_dim = j.at("proj_dim").get<int>();
  c.phi_hidden = j.at("phi_hidden").get<std::vector<int>>();
  c.psi_hidden = j.at("psi_hidden").get<std::vector<int>>();
  c.g_hidden = j.at("g_hidden").get<std::vector<int>>();
  c.h_hidden = j.at("h_hidden").get<std::vector<int>>();
  c.activation = ad::activation_from_string(j.at("activation").get<std::string>());
  return c;
}

void append_tensor(std::string& buf, const Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v = m(i, j);
      char raw[sizeof(double)];
      std::memcpy(raw, &v, sizeof(double));
      buf.append(raw, sizeof(double));
    }
  }
}

void read_tensor(const std::string& buf, std::size_t& at, Mat& m) {
  const std::size_t need = static_cast<std::size_t>(m.size()) * sizeof(double);
  if (at + need > buf.size()) {
    throw RuntimeError("checkpoint: truncated payload");
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v;
      std::memcpy(&v, buf.data() + at, sizeof(double));
      at += sizeof(double);
      m(i, j) = v;
    }
  }
}

template <typename Fn>
void visit_tensors(FittedCRNet& f, Fn&& fn) {
  for (MlpParams* p : {&f.net.phi, &f.net.psi, &f.net.g, &f.net.h}) {
    for (std::size_t l = 0; l < p->weights.size(); ++l) {
      fn(p->weights[l]);
      fn(p->biases[l]);
    }
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const FittedCRNet& f) {
  json header;
  header["config"] = config_to_json(f.net.config);
  header["x_dim"] = f.x_scaler.mean.size();
  header["t_dim"] = f.t_scaler.mean.size();
  const std::string hs = header.dump();

  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  std::uint32_t ver = kVersion;
  char raw4[4];
  std::memcpy(raw4, &ver, 4);
  buf.append(raw4, 4);
  std::uint64_t hlen = hs.size();
  char raw8[8];
  std::memcpy(raw8, &hlen, 8);
  buf.append(raw8, 8);
  buf += hs;
  visit_tensors(const_cast<FittedCRNet&>(f), [&buf](Mat& m) { append_tensor(buf, m); });
  auto append_vec = [&buf](const Vec& v) {
    Mat m = v.transpose();
    append_tensor(buf, m);
  };
  append_vec(f.x_scaler.mean);
  append_vec(f.x_scaler.stdev);
  append_vec(f.t_scaler.mean);
  append_vec(f.t_scaler.stdev);
  io::atomic_write(path, buf);
}

FittedCRNet load_checkpoint(const std::filesystem::path& path) {
  const std::string buf = io::read_file(path);
  if (buf.size() < sizeof(kMagic) + 12 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw RuntimeError("checkpoint: bad magic in " + path.string());
  }
  std::size_t at = sizeof(kMagic);
  std::uint32_t ver;
  std::memcpy(&ver, buf.data() + at, 4);
  at += 4;
  if (ver != kVersion) {
    throw RuntimeError("checkpoint: unsupported format version " + std::to_string(ver));
  }
  std::uint64_t hlen;
  std::memcpy(&hlen, buf.data() + at, 8);
  at += 8;
  if (at + hlen > buf.size()) {
    throw RuntimeError("checkpoint: truncated header");
  }
  json header = json::parse(buf.substr(at, hlen));
  at += hlen;

  FittedCRNet f;
  f.net.config = config_from_json(header.at("config"));
  f.net.config.validate();
  // allocate tensors with the configured shapes, then fill from payload
  rng::Engine dummy(0);
  f.net.phi = init_mlp(f.net.config.phi_config(), dummy);
  f.net.psi = init_mlp(f.net.config.psi_config(), dummy);
  f.net.g = init_mlp(f.net.config.g_config(), dummy);
  f.net.h = init_mlp(f.net.config.h_config(), dummy);
  visit_tensors(f, [&buf, &at](Mat& m) { read_tensor(buf, at, m); });
  const auto x_dim = header.at("x_dim").get<Eigen::Index>();
  const auto t_dim = header.at("t_dim").get<Eigen::Index>();
  auto read_vec = [&buf, &at](Eigen::Index n) {
    Mat m(1, n);
    read_tensor(buf, at, m);
    return Vec(m.row(0).transpose());
  };
  f.x_scaler.mean = read_vec(x_dim);
  f.x_scaler.stdev = read_vec(x_dim);
  f.t_scaler.mean = read_vec(t_dim);
  f.t_scaler.stdev = read_vec(t_dim);
  if (at != buf.size()) {
    throw RuntimeError("checkpoint: trailing bytes");
  }
  return f;
}

}  // namespace dbrlab::model
