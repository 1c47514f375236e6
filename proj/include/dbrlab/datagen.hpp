#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dbrlab/common.hpp"
#include "dbrlab/rng.hpp"

namespace dbrlab::datagen {

struct GeneratorWeights {
  Vec w;    // p weights, U(0.5, 1)
  Vec w_t;  // q weights, U(0.5, 1)
  std::uint64_t seed = 0;
};

GeneratorWeights draw_weights(int p, int q, std::uint64_t seed);

struct Dataset {
  Mat x;  // n x p
  Mat t;  // n x q
  Vec y;  // n
  GeneratorWeights weights;
  std::string provenance;  // "synthetic" or "semi-synthetic(<source>)"
};

struct Split {
  std::vector<int> train, val, test;
};

// i.i.d. standard normal covariates.
Mat gen_covariates(int n, int p, rng::Engine& eng);

// Treatment rule, deterministic part + supplied noise matrix (n x q):
//   t_ij = 0.2 * sum_{k<5} w_k x_ik + (p-11)^-1 * sum_{k>=10} w_k x_ik^2
//          + e_ij + 0.5 * e_ij^3 * x_{i, p-j-2}     (0-based j)
// The two covariate sums are shared across treatment coordinates.
Mat treatment_formula(const Mat& x, const GeneratorWeights& w, const Mat& noise);

// Draws e_ij ~ N(0,1) fresh per cell in row-major order, then applies the
// rule above. Requires p >= 12 and q <= p-1.
Mat gen_treatments(const Mat& x, int q, const GeneratorWeights& w, rng::Engine& eng);

// Outcome rule (deterministic; the ground-truth dose-response curve):
//   y_i = 0.5 * sum_j wt_j |t_ij| + 0.5 * sum_{k=5..9} w_k x_ik^2
//         + sum_{k>=10} w_k x_ik + 0.5 * sum_j t_ij * x_{i, p-j-12}   (0-based j)
// Requires q <= p-11 so the interaction column index stays valid.
Vec outcome_formula(const Mat& x, const Mat& t, const GeneratorWeights& w);

// Ground-truth curve value h(t, x) for one unit; equals outcome_formula on a
// single row.
double true_hdrc(const Mat& x_row, const Mat& t_row, const GeneratorWeights& w);

// Fully synthetic Data-q instance. Pure function of (n, p, q, seed);
// outcome_noise_sd > 0 adds N(0, sd^2) noise to y (default none, keeping
// y_i == true_hdrc(x_i, t_i) exactly).
Dataset make_synthetic(int n, int p, int q, std::uint64_t seed, double outcome_noise_sd = 0.0);

// Same generating rules over externally supplied covariates, which are
// standardized before entering the formulas.
Dataset make_semi_synthetic(const Mat& covariates, int q, std::uint64_t seed,
                            const std::string& source_name, double outcome_noise_sd = 0.0);

// Delimited-text covariate loader (see io::read_csv_matrix); additionally
// requires p >= 12 for the generator.
Mat load_covariates(const std::filesystem::path& path);

// Uniform sampling without replacement into three disjoint index lists.
Split make_split(int n, std::array<int, 3> sizes, std::uint64_t seed);

// Directory layout: X.csv, T.csv, Y.csv (full precision), weights.json,
// split.json.
void export_dataset(const std::filesystem::path& dir, const Dataset& ds, const Split& split);
Dataset load_dataset(const std::filesystem::path& dir);
Split load_split(const std::filesystem::path& dir);

}  // namespace dbrlab::datagen
