#pragma once

#include <string>
#include <vector>

#include "dbrlab/common.hpp"
#include "dbrlab/rng.hpp"

namespace dbrlab::dep {

enum class Centering { double_centered, u_centered };

std::string to_string(Centering c);
Centering centering_from_string(const std::string& s);

// Inner products and norms smaller than this are treated as degenerate
// (zero element conventions in project/pdcor).
inline constexpr double kDegenerateTol = 1e-12;

struct DistanceMatrix {
  Mat entries;  // symmetric, zero diagonal, nonnegative
  int n() const { return static_cast<int>(entries.rows()); }
};

struct CenteredMatrix {
  Mat entries;
  Centering mode;
  int n() const { return static_cast<int>(entries.rows()); }
};

// Raw kernels over plain matrices; shared by the typed surface below and by
// the autodiff op implementations.
Mat pairwise_euclidean_raw(const Mat& m);
Mat center_raw(const Mat& d, Centering mode);
double otimes_raw(const Mat& a, const Mat& b);

// ----- typed surface -----

// Euclidean distances between rows. Requires n >= 4: the otimes
// normalization 1/(n(n-3)) downstream is undefined below that.
DistanceMatrix pairwise_euclidean(const Mat& m);

CenteredMatrix center(const DistanceMatrix& d, Centering mode);

// [n(n-3)]^-1 * sum_{i != j} a_ij * b_ij; requires matching n and mode.
double otimes(const CenteredMatrix& a, const CenteredMatrix& b);

// a - (a (x) c)/(c (x) c) * c. When (c (x) c) <= kDegenerateTol the
// conditioner is the zero element and `a` is returned unchanged.
CenteredMatrix project(const CenteredMatrix& a, const CenteredMatrix& c);

// Partial distance measure of x and t given z: the absolute normalized inner
// product of the centered distance matrices of x and t after projecting out
// z. Returns 0 when either projected norm <= kDegenerateTol.
double pdcor(const Mat& x, const Mat& t, const Mat& z, Centering mode);

// Unconditional distance correlation, same normalization conventions.
double dcor(const Mat& x, const Mat& t, Centering mode);

struct BalanceScores {
  double balancing;   // pdcor(x, t, repr) -- lower means closer to X indep T | repr
  double prognostic;  // pdcor(x, y, repr)
};

BalanceScores balance_diagnostics(const Mat& repr, const Mat& x, const Mat& t, const Mat& y,
                                  Centering mode);

// Null distribution of dcor(x, t) under row permutations of t. Exploits that
// centering commutes with simultaneous row/column permutation, so each draw
// costs one O(n^2) inner product.
std::vector<double> permutation_null_dcor(const Mat& x, const Mat& t, int n_perms, Centering mode,
                                          rng::Engine& eng);

}  // namespace dbrlab::dep
