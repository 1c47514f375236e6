#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dbrlab/common.hpp"
#include "dbrlab/dependence.hpp"

namespace dbrlab::ad {

enum class Activation { relu, elu, tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Reverse-mode tape over dense matrices. Values are computed eagerly at
// record time; backward() fills gradient accumulators for every parameter.
//
// A tape is single-writer: record/backward must not be called concurrently
// on the same tape. Distinct tapes are independent.
class Tape {
 public:
  struct Var {
    int idx = -1;
  };

  // leaves
  Var input(Mat value);  // constant: no gradient tracked
  Var param(Mat value);  // gradient accumulated by backward()

  // elementwise / linear algebra
  Var add(Var a, Var b);         // same shape
  Var add_rowvec(Var a, Var r);  // (n x k) + (1 x k), broadcast over rows
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // Hadamard
  Var div(Var a, Var b);  // elementwise quotient
  Var matmul(Var a, Var b);
  Var scale(Var a, double c);
  Var concat_cols(const std::vector<Var>& parts);
  Var sum(Var a);  // -> 1x1
  Var square(Var a);
  Var abs(Var a);   // subgradient 0 at 0
  Var sqrt(Var a);  // subgradient 0 at 0
  Var logsumexp(Var a);  // row or column vector -> 1x1, max-shifted
  Var activation(Var a, Activation kind);

  // distance-dependence pipeline
  Var pairwise_euclidean(Var a);              // (n x d) -> (n x n), n >= 4
  Var center(Var a, dep::Centering mode);     // (n x n) -> (n x n)
  Var otimes(Var a, Var b);                   // -> 1x1
  Var project(Var a, Var c);                  // degenerate conditioner: returns a's value

  // Accumulates d(out)/d(node) for every node reachable from `out`; resets
  // all accumulators first. `out` must be 1x1.
  void backward(Var out);

  const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.idx)].value; }
  const Mat& grad(Var v) const;
  double scalar(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    input, param, add, add_rowvec, sub, mul, div, matmul, scale, concat_cols,
    sum, square, abs_v, sqrt_v, logsumexp, relu, elu, tanh_v,
    pairwise, center_double, center_u, otimes_op, project_op
  };

  struct Node {
    Op op;
    std::vector<int> parents;
    Mat value;
    Mat grad;
    double a0 = 0.0;  // scale constant / project beta
    double a1 = 0.0;  // project c(x)c
    bool degenerate = false;
  };

  static const char* op_name(Op op);
  Var push(Node node, const char* name);
  const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.idx)]; }
  void propagate(int idx, std::vector<char>& reached);
  Mat& grad_of(int idx);

  std::vector<Node> nodes_;
  std::vector<int> params_;
};

using Var = Tape::Var;

// Max over coordinates of |autodiff - central difference| / max(1, |central
// difference|) for a scalar-valued function of one matrix argument. The
// builder is re-run on fresh tapes for the finite-difference evaluations.
double grad_check(const std::function<Var(Tape&, Var)>& f, const Mat& point, double step);

}  // namespace dbrlab::ad
