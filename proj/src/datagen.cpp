#include "dbrlab/datagen.hpp"

#include <cmath>
#include <utility>

#include <json.hpp>

#include "dbrlab/io.hpp"
#include "dbrlab/model.hpp"

namespace dbrlab::datagen {

using nlohmann::json;

GeneratorWeights draw_weights(int p, int q, std::uint64_t seed) {
  GeneratorWeights w;
  w.seed = seed;
  rng::Engine eng = rng::make_engine(seed, {rng::stream::generator_weights});
  w.w = Vec(p);
  for (int k = 0; k < p; ++k) w.w(k) = eng.uniform(0.5, 1.0);
  w.w_t = Vec(q);
  for (int j = 0; j < q; ++j) w.w_t(j) = eng.uniform(0.5, 1.0);
  return w;
}

Mat gen_covariates(int n, int p, rng::Engine& eng) {
  if (n < 1 || p < 1) {
    throw ConfigError("gen_covariates: n and p must be >= 1");
  }
  Mat x(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      x(i, j) = eng.normal();
    }
  }
  return x;
}

namespace {

void check_generator_dims(int p, int q) {
  if (p < 12) {
    throw ConfigError("covariate dimension too small for generator (p = " + std::to_string(p) +
                      ", need p >= 12)");
  }
  if (q < 1 || q > p - 1) {
    throw ConfigError("treatment dimension q = " + std::to_string(q) +
                      " out of range for p = " + std::to_string(p));
  }
}

}  // namespace

Mat treatment_formula(const Mat& x, const GeneratorWeights& w, const Mat& noise) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  const int q = static_cast<int>(noise.cols());
  check_generator_dims(p, q);
  if (noise.rows() != n) {
    throw ConfigError("treatment_formula: noise rows != n");
  }
  if (w.w.size() != p) {
    throw ConfigError("treatment_formula: weight length != p");
  }
  Mat t(n, q);
  for (int i = 0; i < n; ++i) {
    double lin = 0.0;
    for (int k = 0; k < 5; ++k) lin += w.w(k) * x(i, k);
    double quad = 0.0;
    for (int k = 10; k < p; ++k) quad += w.w(k) * x(i, k) * x(i, k);
    const double common = 0.2 * lin + quad / static_cast<double>(p - 11);
    for (int j = 0; j < q; ++j) {
      const double e = noise(i, j);
      t(i, j) = common + e + 0.5 * e * e * e * x(i, p - j - 2);
    }
  }
  return t;
}

Mat gen_treatments(const Mat& x, int q, const GeneratorWeights& w, rng::Engine& eng) {
  check_generator_dims(static_cast<int>(x.cols()), q);
  Mat noise(x.rows(), q);
  for (Eigen::Index i = 0; i < noise.rows(); ++i) {
    for (int j = 0; j < q; ++j) {
      noise(i, j) = eng.normal();
    }
  }
  return treatment_formula(x, w, noise);
}

Vec outcome_formula(const Mat& x, const Mat& t, const GeneratorWeights& w) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  const int q = static_cast<int>(t.cols());
  if (t.rows() != n) {
    throw ConfigError("outcome_formula: treatment rows != n");
  }
  if (q > p - 11) {
    throw ConfigError("outcome_formula: q = " + std::to_string(q) +
                      " too large for p = " + std::to_string(p) + " (need q <= p - 11)");
  }
  if (w.w.size() != p || w.w_t.size() < q) {
    throw ConfigError("outcome_formula: weight lengths inconsistent with shapes");
  }
  Vec y(n);
  for (int i = 0; i < n; ++i) {
    double dose = 0.0;
    for (int j = 0; j < q; ++j) dose += w.w_t(j) * std::abs(t(i, j));
    double quad = 0.0;
    for (int k = 5; k < 10; ++k) quad += w.w(k) * x(i, k) * x(i, k);
    double lin = 0.0;
    for (int k = 10; k < p; ++k) lin += w.w(k) * x(i, k);
    double inter = 0.0;
    for (int j = 0; j < q; ++j) inter += t(i, j) * x(i, p - j - 12);
    y(i) = 0.5 * dose + 0.5 * quad + lin + 0.5 * inter;
  }
  return y;
}

double true_hdrc(const Mat& x_row, const Mat& t_row, const GeneratorWeights& w) {
  if (x_row.rows() != 1 || t_row.rows() != 1) {
    throw ConfigError("true_hdrc: expects single-row x and t");
  }
  return outcome_formula(x_row, t_row, w)(0);
}

namespace {

Dataset assemble(Mat x, int q, std::uint64_t seed, const std::string& provenance,
                 double outcome_noise_sd) {
  const int p = static_cast<int>(x.cols());
  check_generator_dims(p, q);
  Dataset ds;
  ds.weights = draw_weights(p, q, seed);
  rng::Engine noise_eng = rng::make_engine(seed, {rng::stream::treatment_noise});
  ds.t = gen_treatments(x, q, ds.weights, noise_eng);
  ds.y = outcome_formula(x, ds.t, ds.weights);
  if (outcome_noise_sd > 0.0) {
    rng::Engine out_eng = rng::make_engine(seed, {rng::stream::outcome_noise});
    for (Eigen::Index i = 0; i < ds.y.size(); ++i) {
      ds.y(i) += outcome_noise_sd * out_eng.normal();
    }
  }
  ds.x = std::move(x);
  ds.provenance = provenance;
  return ds;
}

}  // namespace

Dataset make_synthetic(int n, int p, int q, std::uint64_t seed, double outcome_noise_sd) {
  check_generator_dims(p, q);
  if (q > p - 11) {
    throw ConfigError("make_synthetic: q = " + std::to_string(q) + " needs p >= " +
                      std::to_string(q + 11));
  }
  rng::Engine cov_eng = rng::make_engine(seed, {rng::stream::covariates});
  Mat x = gen_covariates(n, p, cov_eng);
  return assemble(std::move(x), q, seed, "synthetic", outcome_noise_sd);
}

Dataset make_semi_synthetic(const Mat& covariates, int q, std::uint64_t seed,
                            const std::string& source_name, double outcome_noise_sd) {
  check_generator_dims(static_cast<int>(covariates.cols()), q);
  Mat x = model::Standardizer::fit(covariates).apply(covariates);
  return assemble(std::move(x), q, seed, "semi-synthetic(" + source_name + ")",
                  outcome_noise_sd);
}

Mat load_covariates(const std::filesystem::path& path) {
  Mat x = io::read_csv_matrix(path);
  if (x.cols() < 12) {
    throw ConfigError(path.string() + ": covariate dimension too small for generator (p = " +
                      std::to_string(x.cols()) + ", need p >= 12)");
  }
  return x;
}

Split make_split(int n, std::array<int, 3> sizes, std::uint64_t seed) {
  const long total = long(sizes[0]) + sizes[1] + sizes[2];
  if (sizes[0] < 0 || sizes[1] < 0 || sizes[2] < 0 || total > n) {
    throw ConfigError("make_split: split sizes " + std::to_string(sizes[0]) + "/" +
                      std::to_string(sizes[1]) + "/" + std::to_string(sizes[2]) +
                      " exceed n = " + std::to_string(n));
  }
  rng::Engine eng = rng::make_engine(seed, {rng::stream::split});
  std::vector<int> order = eng.permutation(n);
  Split s;
  s.train.assign(order.begin(), order.begin() + sizes[0]);
  s.val.assign(order.begin() + sizes[0], order.begin() + sizes[0] + sizes[1]);
  s.test.assign(order.begin() + sizes[0] + sizes[1], order.begin() + total);
  return s;
}

void export_dataset(const std::filesystem::path& dir, const Dataset& ds, const Split& split) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  io::write_csv_matrix(dir / "X.csv", ds.x);
  io::write_csv_matrix(dir / "T.csv", ds.t);
  Mat y = ds.y;
  io::write_csv_matrix(dir / "Y.csv", y);
  json w;
  w["seed"] = ds.weights.seed;
  w["provenance"] = ds.provenance;
  w["n"] = ds.x.rows();
  w["p"] = ds.x.cols();
  w["q"] = ds.t.cols();
  std::vector<std::string> wv, wtv;
  for (Eigen::Index k = 0; k < ds.weights.w.size(); ++k) {
    wv.push_back(io::format_double(ds.weights.w(k)));
  }
  for (Eigen::Index k = 0; k < ds.weights.w_t.size(); ++k) {
    wtv.push_back(io::format_double(ds.weights.w_t(k)));
  }
  w["w"] = wv;
  w["w_t"] = wtv;
  io::atomic_write(dir / "weights.json", w.dump(2) + "\n");
  json sp;
  sp["train"] = split.train;
  sp["val"] = split.val;
  sp["test"] = split.test;
  io::atomic_write(dir / "split.json", sp.dump() + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.x = io::read_csv_matrix(dir / "X.csv");
  ds.t = io::read_csv_matrix(dir / "T.csv");
  Mat y = io::read_csv_matrix(dir / "Y.csv");
  if (y.cols() != 1 || y.rows() != ds.x.rows()) {
    throw ConfigError((dir / "Y.csv").string() + ": expected a single column of length n");
  }
  ds.y = y.col(0);
  json w = json::parse(io::read_file(dir / "weights.json"));
  ds.weights.seed = w.at("seed").get<std::uint64_t>();
  ds.provenance = w.at("provenance").get<std::string>();
  auto wv = w.at("w").get<std::vector<std::string>>();
  auto wtv = w.at("w_t").get<std::vector<std::string>>();
  ds.weights.w = Vec(wv.size());
  for (std::size_t k = 0; k < wv.size(); ++k) ds.weights.w(k) = std::stod(wv[k]);
  ds.weights.w_t = Vec(wtv.size());
  for (std::size_t k = 0; k < wtv.size(); ++k) ds.weights.w_t(k) = std::stod(wtv[k]);
  return ds;
}

Split load_split(const std::filesystem::path& dir) {
  json sp = json::parse(io::read_file(dir / "split.json"));
  Split s;
  s.train = sp.at("train").get<std::vector<int>>();
  s.val = sp.at("val").get<std::vector<int>>();
  s.test = sp.at("test").get<std::vector<int>>();
  return s;
}

}  // namespace dbrlab::datagen
