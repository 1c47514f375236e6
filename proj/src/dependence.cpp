#include "dbrlab/dependence.hpp"

#include <algorithm>
#include <cmath>

namespace dbrlab::dep {

std::string to_string(Centering c) {
  return c == Centering::double_centered ? "double" : "u";
}

Centering centering_from_string(const std::string& s) {
  if (s == "double" || s == "double_centered") return Centering::double_centered;
  if (s == "u" || s == "u_centered") return Centering::u_centered;
  throw ConfigError("unknown centering mode: '" + s + "' (expected 'u' or 'double')");
}

Mat pairwise_euclidean_raw(const Mat& m) {
  const Eigen::Index n = m.rows();
  Mat out = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      // direct per-pair norm: exact zero for identical rows
      double d = (m.row(i) - m.row(j)).norm();
      out(i, j) = d;
      out(j, i) = d;
    }
  }
  return out;
}

Mat center_raw(const Mat& d, Centering mode) {
  const Eigen::Index n = d.rows();
  if (d.cols() != n) {
    throw RuntimeError("center: matrix must be square, got " + shape_str(d));
  }
  Vec row_sum = d.rowwise().sum();
  Eigen::RowVectorXd col_sum = d.colwise().sum();
  const double grand = row_sum.sum();
  Mat out(n, n);
  if (mode == Centering::double_centered) {
    const double nn = static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        out(i, j) = d(i, j) - col_sum(j) / nn - row_sum(i) / nn + grand / (nn * nn);
      }
    }
  } else {
    if (n < 4) {
      throw RuntimeError("center: u-centering requires n >= 4, got n = " + std::to_string(n));
    }
    const double nm2 = static_cast<double>(n - 2);
    const double g = grand / (static_cast<double>(n - 1) * nm2);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        out(i, j) = (i == j) ? 0.0 : d(i, j) - row_sum(i) / nm2 - col_sum(j) / nm2 + g;
      }
    }
  }
  return out;
}

double otimes_raw(const Mat& a, const Mat& b) {
  const Eigen::Index n = a.rows();
  double s = a.cwiseProduct(b).sum() - a.diagonal().dot(b.diagonal());
  return s / (static_cast<double>(n) * static_cast<double>(n - 3));
}

DistanceMatrix pairwise_euclidean(const Mat& m) {
  if (m.rows() < 4) {
    throw RuntimeError("pairwise_euclidean: sample too small for (x) normalization (n = " +
                       std::to_string(m.rows()) + ", need n >= 4)");
  }
  require_finite(m, "pairwise_euclidean input");
  return DistanceMatrix{pairwise_euclidean_raw(m)};
}

CenteredMatrix center(const DistanceMatrix& d, Centering mode) {
  return CenteredMatrix{center_raw(d.entries, mode), mode};
}

namespace {

void check_compatible(const CenteredMatrix& a, const CenteredMatrix& b, const char* op) {
  if (a.n() != b.n()) {
    throw RuntimeError(std::string(op) + ": size mismatch (" + std::to_string(a.n()) + " vs " +
                       std::to_string(b.n()) + ")");
  }
  if (a.mode != b.mode) {
    throw RuntimeError(std::string(op) + ": centering mode mismatch (" + to_string(a.mode) +
                       " vs " + to_string(b.mode) + ")");
  }
}

}  // namespace

double otimes(const CenteredMatrix& a, const CenteredMatrix& b) {
  check_compatible(a, b, "otimes");
  return otimes_raw(a.entries, b.entries);
}

CenteredMatrix project(const CenteredMatrix& a, const CenteredMatrix& c) {
  check_compatible(a, c, "project");
  const double cc = otimes_raw(c.entries, c.entries);
  if (cc <= kDegenerateTol) {
    return a;  // zero-element conditioner
  }
  const double beta = otimes_raw(a.entries, c.entries) / cc;
  return CenteredMatrix{a.entries - beta * c.entries, a.mode};
}

namespace {

CenteredMatrix centered_distance(const Mat& m, Centering mode) {
  return center(pairwise_euclidean(m), mode);
}

double correlation_of(const CenteredMatrix& a, const CenteredMatrix& b) {
  const double na = std::sqrt(otimes_raw(a.entries, a.entries));
  const double nb = std::sqrt(otimes_raw(b.entries, b.entries));
  if (na <= kDegenerateTol || nb <= kDegenerateTol) return 0.0;
  const double v = std::abs(otimes_raw(a.entries, b.entries)) / (na * nb);
  return std::min(v, 1.0);
}

void check_rows(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows()) {
    throw RuntimeError(std::string(op) + ": row-count mismatch (" + std::to_string(a.rows()) +
                       " vs " + std::to_string(b.rows()) + ")");
  }
}

}  // namespace

double pdcor(const Mat& x, const Mat& t, const Mat& z, Centering mode) {
  check_rows(x, t, "pdcor");
  check_rows(x, z, "pdcor");
  CenteredMatrix wz = centered_distance(z, mode);
  CenteredMatrix px = project(centered_distance(x, mode), wz);
  CenteredMatrix pt = project(centered_distance(t, mode), wz);
  return correlation_of(px, pt);
}

double dcor(const Mat& x, const Mat& t, Centering mode) {
  check_rows(x, t, "dcor");
  return correlation_of(centered_distance(x, mode), centered_distance(t, mode));
}

BalanceScores balance_diagnostics(const Mat& repr, const Mat& x, const Mat& t, const Mat& y,
                                  Centering mode) {
  check_rows(repr, x, "balance_diagnostics");
  return BalanceScores{pdcor(x, t, repr, mode), pdcor(x, y, repr, mode)};
}

std::vector<double> permutation_null_dcor(const Mat& x, const Mat& t, int n_perms, Centering mode,
                                          rng::Engine& eng) {
  check_rows(x, t, "permutation_null_dcor");
  CenteredMatrix wx = centered_distance(x, mode);
  CenteredMatrix wt = centered_distance(t, mode);
  const Eigen::Index n = wx.entries.rows();
  const double nx = std::sqrt(otimes_raw(wx.entries, wx.entries));
  const double nt = std::sqrt(otimes_raw(wt.entries, wt.entries));
  std::vector<double> null_stats;
  null_stats.reserve(static_cast<std::size_t>(n_perms));
  if (nx <= kDegenerateTol || nt <= kDegenerateTol) {
    null_stats.assign(static_cast<std::size_t>(n_perms), 0.0);
    return null_stats;
  }
  const double norm = static_cast<double>(n) * static_cast<double>(n - 3);
  for (int k = 0; k < n_perms; ++k) {
    std::vector<int> pi = eng.permutation(static_cast<int>(n));
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) s += wx.entries(i, j) * wt.entries(pi[i], pi[j]);
      }
    }
    null_stats.push_back(std::min(std::abs(s / norm) / (nx * nt), 1.0));
  }
  return null_stats;
}

}  // namespace dbrlab::dep
