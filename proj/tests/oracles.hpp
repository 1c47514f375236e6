#pragma once

// Test-only reference implementations, written as direct transcriptions of
// the defining formulas with plain double loops. They deliberately share no
// code with the library (which vectorizes through Eigen); agreement between
// the two routes is what the equivalence tests assert.

#include <cmath>
#include <cstdlib>
#include <vector>

#include "dbrlab/common.hpp"

namespace oracle {

using dbrlab::Mat;

inline Mat pairwise_euclidean(const Mat& m) {
  const int n = static_cast<int>(m.rows());
  const int d = static_cast<int>(m.cols());
  Mat out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        double diff = m(i, k) - m(j, k);
        s += diff * diff;
      }
      out(i, j) = std::sqrt(s);
    }
  }
  return out;
}

inline Mat double_center(const Mat& a) {
  const int n = static_cast<int>(a.rows());
  Mat out(n, n);
  double grand = 0.0;
  std::vector<double> row(n, 0.0), col(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      row[i] += a(i, j);
      col[j] += a(i, j);
      grand += a(i, j);
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out(i, j) = a(i, j) - col[j] / n - row[i] / n + grand / (double(n) * n);
    }
  }
  return out;
}

inline Mat u_center(const Mat& a) {
  const int n = static_cast<int>(a.rows());
  Mat out(n, n);
  double grand = 0.0;
  std::vector<double> row(n, 0.0), col(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      row[i] += a(i, j);
      col[j] += a(i, j);
      grand += a(i, j);
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) {
        out(i, j) = 0.0;
      } else {
        out(i, j) = a(i, j) - row[i] / (n - 2) - col[j] / (n - 2) + grand / (double(n - 1) * (n - 2));
      }
    }
  }
  return out;
}

inline double otimes(const Mat& a, const Mat& b) {
  const int n = static_cast<int>(a.rows());
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) s += a(i, j) * b(i, j);
    }
  }
  return s / (double(n) * (n - 3));
}

inline Mat project(const Mat& a, const Mat& c) {
  double cc = otimes(c, c);
  if (cc <= 1e-12) return a;
  double beta = otimes(a, c) / cc;
  const int n = static_cast<int>(a.rows());
  Mat out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out(i, j) = a(i, j) - beta * c(i, j);
    }
  }
  return out;
}

inline Mat centered_distance(const Mat& m, bool u_mode) {
  Mat d = pairwise_euclidean(m);
  return u_mode ? u_center(d) : double_center(d);
}

inline double pdcor(const Mat& x, const Mat& t, const Mat& z, bool u_mode) {
  Mat wx = centered_distance(x, u_mode);
  Mat wt = centered_distance(t, u_mode);
  Mat wz = centered_distance(z, u_mode);
  Mat px = project(wx, wz);
  Mat pt = project(wt, wz);
  double nx = std::sqrt(otimes(px, px));
  double nt = std::sqrt(otimes(pt, pt));
  if (nx <= 1e-12 || nt <= 1e-12) return 0.0;
  double v = std::abs(otimes(px, pt)) / (nx * nt);
  return v > 1.0 ? 1.0 : v;
}

inline double dcor(const Mat& x, const Mat& t, bool u_mode) {
  Mat wx = centered_distance(x, u_mode);
  Mat wt = centered_distance(t, u_mode);
  double nx = std::sqrt(otimes(wx, wx));
  double nt = std::sqrt(otimes(wt, wt));
  if (nx <= 1e-12 || nt <= 1e-12) return 0.0;
  double v = std::abs(otimes(wx, wt)) / (nx * nt);
  return v > 1.0 ? 1.0 : v;
}

// Contrastive regularizer assembled from the oracle pdcor: positive term
// minus log-sum-exp over negative conditioning representations.
inline double cr_loss(const Mat& x, const Mat& t, const Mat& z_pos,
                      const std::vector<Mat>& z_negs, bool u_mode) {
  double pos = pdcor(x, t, z_pos, u_mode);
  if (z_negs.empty()) return pos;
  double sum = 0.0;
  for (const Mat& zn : z_negs) {
    sum += std::exp(pdcor(x, t, zn, u_mode));
  }
  return pos - std::log(sum);
}

}  // namespace oracle
