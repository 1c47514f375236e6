#include "dbrlab/autodiff.hpp"

#include <cmath>
#include <utility>

namespace dbrlab::ad {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "elu") return Activation::elu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation: '" + s + "'");
}

const char* Tape::op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::param: return "param";
    case Op::add: return "add";
    case Op::add_rowvec: return "add_rowvec";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::div: return "div";
    case Op::matmul: return "matmul";
    case Op::scale: return "scale";
    case Op::concat_cols: return "concat_cols";
    case Op::sum: return "sum";
    case Op::square: return "square";
    case Op::abs_v: return "abs";
    case Op::sqrt_v: return "sqrt";
    case Op::logsumexp: return "logsumexp";
    case Op::relu: return "relu";
    case Op::elu: return "elu";
    case Op::tanh_v: return "tanh";
    case Op::pairwise: return "pairwise_euclidean";
    case Op::center_double: return "center(double)";
    case Op::center_u: return "center(u)";
    case Op::otimes_op: return "otimes";
    case Op::project_op: return "project";
  }
  return "?";
}

Var Tape::push(Node node, const char* name) {
  if (!node.value.allFinite()) {
    throw RuntimeError(std::string("autodiff: non-finite output of op '") + name + "' (" +
                       shape_str(node.value) + ")");
  }
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Mat value) {
  require_finite(value, "autodiff input");
  return push(Node{Op::input, {}, std::move(value), {}}, "input");
}

Var Tape::param(Mat value) {
  require_finite(value, "autodiff param");
  Var v = push(Node{Op::param, {}, std::move(value), {}}, "param");
  params_.push_back(v.idx);
  return v;
}

namespace {

void require_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw RuntimeError(std::string("autodiff: ") + op + ": shape mismatch " + shape_str(a) +
                       " vs " + shape_str(b));
  }
}

}  // namespace

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  return push(Node{Op::add, {a.idx, b.idx}, value(a) + value(b), {}}, "add");
}

Var Tape::add_rowvec(Var a, Var r) {
  const Mat& m = value(a);
  const Mat& v = value(r);
  if (v.rows() != 1 || v.cols() != m.cols()) {
    throw RuntimeError("autodiff: add_rowvec: shape mismatch " + shape_str(m) + " vs " +
                       shape_str(v));
  }
  Mat out = m;
  out.rowwise() += v.row(0);
  return push(Node{Op::add_rowvec, {a.idx, r.idx}, std::move(out), {}}, "add_rowvec");
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  return push(Node{Op::sub, {a.idx, b.idx}, value(a) - value(b), {}}, "sub");
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  return push(Node{Op::mul, {a.idx, b.idx}, value(a).cwiseProduct(value(b)), {}}, "mul");
}

Var Tape::div(Var a, Var b) {
  require_same_shape(value(a), value(b), "div");
  return push(Node{Op::div, {a.idx, b.idx}, value(a).cwiseQuotient(value(b)), {}}, "div");
}

Var Tape::matmul(Var a, Var b) {
  const Mat& x = value(a);
  const Mat& y = value(b);
  if (x.cols() != y.rows()) {
    throw RuntimeError("autodiff: matmul: inner dimensions differ " + shape_str(x) + " * " +
                       shape_str(y));
  }
  return push(Node{Op::matmul, {a.idx, b.idx}, x * y, {}}, "matmul");
}

Var Tape::scale(Var a, double c) {
  Node n{Op::scale, {a.idx}, value(a) * c, {}};
  n.a0 = c;
  return push(std::move(n), "scale");
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) {
    throw RuntimeError("autodiff: concat_cols: no parts");
  }
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) {
      throw RuntimeError("autodiff: concat_cols: row mismatch " + shape_str(value(parts[0])) +
                         " vs " + shape_str(value(p)));
    }
    cols += value(p).cols();
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  Node n{Op::concat_cols, {}, {}, {}};
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
    n.parents.push_back(p.idx);
  }
  n.value = std::move(out);
  return push(std::move(n), "concat_cols");
}

Var Tape::sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = value(a).sum();
  return push(Node{Op::sum, {a.idx}, std::move(out), {}}, "sum");
}

Var Tape::square(Var a) {
  return push(Node{Op::square, {a.idx}, value(a).array().square().matrix(), {}}, "square");
}

Var Tape::abs(Var a) {
  return push(Node{Op::abs_v, {a.idx}, value(a).cwiseAbs(), {}}, "abs");
}

Var Tape::sqrt(Var a) {
  if ((value(a).array() < 0.0).any()) {
    throw RuntimeError("autodiff: sqrt of negative value");
  }
  return push(Node{Op::sqrt_v, {a.idx}, value(a).cwiseSqrt(), {}}, "sqrt");
}

Var Tape::logsumexp(Var a) {
  const Mat& v = value(a);
  if (v.rows() != 1 && v.cols() != 1) {
    throw RuntimeError("autodiff: logsumexp expects a vector, got " + shape_str(v));
  }
  const double m = v.maxCoeff();
  const double s = (v.array() - m).exp().sum();
  Mat out(1, 1);
  out(0, 0) = m + std::log(s);
  return push(Node{Op::logsumexp, {a.idx}, std::move(out), {}}, "logsumexp");
}

Var Tape::activation(Var a, Activation kind) {
  const Mat& x = value(a);
  switch (kind) {
    case Activation::identity:
      return a;
    case Activation::relu:
      return push(Node{Op::relu, {a.idx}, x.cwiseMax(0.0), {}}, "relu");
    case Activation::elu: {
      Mat out = x.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
      return push(Node{Op::elu, {a.idx}, std::move(out), {}}, "elu");
    }
    case Activation::tanh:
      return push(Node{Op::tanh_v, {a.idx}, x.array().tanh().matrix(), {}}, "tanh");
  }
  throw RuntimeError("autodiff: unknown activation");
}

Var Tape::pairwise_euclidean(Var a) {
  const Mat& m = value(a);
  if (m.rows() < 4) {
    throw RuntimeError("autodiff: pairwise_euclidean: sample too small for (x) (n = " +
                       std::to_string(m.rows()) + ")");
  }
  return push(Node{Op::pairwise, {a.idx}, dep::pairwise_euclidean_raw(m), {}},
              "pairwise_euclidean");
}

Var Tape::center(Var a, dep::Centering mode) {
  const bool u = mode == dep::Centering::u_centered;
  return push(Node{u ? Op::center_u : Op::center_double, {a.idx},
                   dep::center_raw(value(a), mode), {}},
              u ? "center(u)" : "center(double)");
}

Var Tape::otimes(Var a, Var b) {
  const Mat& x = value(a);
  const Mat& y = value(b);
  require_same_shape(x, y, "otimes");
  if (x.rows() != x.cols() || x.rows() < 4) {
    throw RuntimeError("autodiff: otimes expects square n>=4 matrices, got " + shape_str(x));
  }
  Mat out(1, 1);
  out(0, 0) = dep::otimes_raw(x, y);
  return push(Node{Op::otimes_op, {a.idx, b.idx}, std::move(out), {}}, "otimes");
}

Var Tape::project(Var a, Var c) {
  const Mat& x = value(a);
  const Mat& z = value(c);
  require_same_shape(x, z, "project");
  const double cc = dep::otimes_raw(z, z);
  Node n{Op::project_op, {a.idx, c.idx}, {}, {}};
  n.a1 = cc;
  if (cc <= dep::kDegenerateTol) {
    n.degenerate = true;
    n.value = x;
  } else {
    n.a0 = dep::otimes_raw(x, z) / cc;  // beta
    n.value = x - n.a0 * z;
  }
  return push(std::move(n), "project");
}

const Mat& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0) {
    throw RuntimeError("autodiff: gradient not computed for this node (run backward first)");
  }
  return n.grad;
}

double Tape::scalar(Var v) const {
  const Mat& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) {
    throw RuntimeError("autodiff: scalar() on non-1x1 value " + shape_str(m));
  }
  return m(0, 0);
}

Mat& Tape::grad_of(int idx) {
  Node& n = nodes_[static_cast<std::size_t>(idx)];
  if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

namespace {

// off-diagonal mask copy: m with its diagonal zeroed
Mat offdiag(const Mat& m) {
  Mat out = m;
  out.diagonal().setZero();
  return out;
}

}  // namespace

void Tape::backward(Var out) {
  const Node& on = node(out);
  if (on.value.rows() != 1 || on.value.cols() != 1) {
    throw RuntimeError("autodiff: backward seed must be 1x1, got " + shape_str(on.value));
  }
  // reset accumulators
  for (Node& n : nodes_) {
    if (n.grad.size() != 0) n.grad.setZero();
  }
  std::vector<char> reached(nodes_.size(), 0);
  reached[static_cast<std::size_t>(out.idx)] = 1;
  grad_of(out.idx)(0, 0) = 1.0;
  for (int i = out.idx; i >= 0; --i) {
    if (reached[static_cast<std::size_t>(i)]) propagate(i, reached);
  }
  // parameters never reached by the output still expose a zero gradient
  for (int p : params_) grad_of(p);
}

void Tape::propagate(int idx, std::vector<char>& reached) {
  Node& n = nodes_[static_cast<std::size_t>(idx)];
  if (n.parents.empty()) return;
  const Mat& g = n.grad;
  auto parent_val = [&](int k) -> const Mat& {
    return nodes_[static_cast<std::size_t>(n.parents[static_cast<std::size_t>(k)])].value;
  };
  auto parent_grad = [&](int k) -> Mat& {
    int p = n.parents[static_cast<std::size_t>(k)];
    reached[static_cast<std::size_t>(p)] = 1;
    return grad_of(p);
  };
  switch (n.op) {
    case Op::input:
    case Op::param:
      break;
    case Op::add:
      parent_grad(0) += g;
      parent_grad(1) += g;
      break;
    case Op::add_rowvec:
      parent_grad(0) += g;
      parent_grad(1).row(0) += g.colwise().sum();
      break;
    case Op::sub:
      parent_grad(0) += g;
      parent_grad(1) -= g;
      break;
    case Op::mul:
      parent_grad(0) += g.cwiseProduct(parent_val(1));
      parent_grad(1) += g.cwiseProduct(parent_val(0));
      break;
    case Op::div: {
      const Mat& a = parent_val(0);
      const Mat& b = parent_val(1);
      parent_grad(0) += g.cwiseQuotient(b);
      parent_grad(1) -= g.cwiseProduct(a).cwiseQuotient(b.cwiseProduct(b));
      break;
    }
    case Op::matmul:
      parent_grad(0) += g * parent_val(1).transpose();
      parent_grad(1) += parent_val(0).transpose() * g;
      break;
    case Op::scale:
      parent_grad(0) += n.a0 * g;
      break;
    case Op::concat_cols: {
      Eigen::Index at = 0;
      for (std::size_t k = 0; k < n.parents.size(); ++k) {
        const Eigen::Index w = parent_val(static_cast<int>(k)).cols();
        parent_grad(static_cast<int>(k)) += g.middleCols(at, w);
        at += w;
      }
      break;
    }
    case Op::sum:
      parent_grad(0).array() += g(0, 0);
      break;
    case Op::square:
      parent_grad(0) += 2.0 * g.cwiseProduct(parent_val(0));
      break;
    case Op::abs_v:
      parent_grad(0) += g.cwiseProduct(parent_val(0).unaryExpr(
          [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }));
      break;
    case Op::sqrt_v:
      // subgradient 0 at 0
      parent_grad(0) += g.cwiseProduct(
          n.value.unaryExpr([](double s) { return s > 0.0 ? 0.5 / s : 0.0; }));
      break;
    case Op::logsumexp: {
      const Mat& v = parent_val(0);
      const double m = v.maxCoeff();
      Mat soft = (v.array() - m).exp().matrix();
      soft /= soft.sum();
      parent_grad(0) += g(0, 0) * soft;
      break;
    }
    case Op::relu:
      parent_grad(0) += g.cwiseProduct(
          parent_val(0).unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
      break;
    case Op::elu: {
      const Mat& x = parent_val(0);
      Mat deriv(x.rows(), x.cols());
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          deriv(i, j) = x(i, j) > 0.0 ? 1.0 : n.value(i, j) + 1.0;
        }
      }
      parent_grad(0) += g.cwiseProduct(deriv);
      break;
    }
    case Op::tanh_v:
      parent_grad(0) += g.cwiseProduct(
          n.value.unaryExpr([](double y) { return 1.0 - y * y; }));
      break;
    case Op::pairwise: {
      const Mat& z = parent_val(0);
      const Mat& d = n.value;
      Mat& gz = parent_grad(0);
      const Eigen::Index nr = z.rows();
      for (Eigen::Index i = 0; i < nr; ++i) {
        for (Eigen::Index j = i + 1; j < nr; ++j) {
          if (d(i, j) <= 0.0) continue;  // coincident rows: subgradient 0
          const double w = (g(i, j) + g(j, i)) / d(i, j);
          if (w == 0.0) continue;
          auto diff = z.row(i) - z.row(j);
          gz.row(i) += w * diff;
          gz.row(j) -= w * diff;
        }
      }
      break;
    }
    case Op::center_double:
      // the double-centering map is self-adjoint
      parent_grad(0) += dep::center_raw(g, dep::Centering::double_centered);
      break;
    case Op::center_u: {
      // adjoint of the u-centering map
      const Eigen::Index nn = g.rows();
      const double nm2 = static_cast<double>(nn - 2);
      Mat gp = offdiag(g);
      Vec row_sum = gp.rowwise().sum();
      Eigen::RowVectorXd col_sum = gp.colwise().sum();
      const double total = row_sum.sum() / (static_cast<double>(nn - 1) * nm2);
      Mat adj = gp;
      adj.colwise() -= (row_sum / nm2);
      adj.rowwise() -= (col_sum / nm2);
      adj.array() += total;
      parent_grad(0) += adj;
      break;
    }
    case Op::otimes_op: {
      const Eigen::Index nn = parent_val(0).rows();
      const double nu = 1.0 / (static_cast<double>(nn) * static_cast<double>(nn - 3));
      const double s = g(0, 0) * nu;
      parent_grad(0) += s * offdiag(parent_val(1));
      parent_grad(1) += s * offdiag(parent_val(0));
      break;
    }
    case Op::project_op: {
      if (n.degenerate) {
        parent_grad(0) += g;
        break;
      }
      const Mat& a = parent_val(0);
      const Mat& c = parent_val(1);
      const Eigen::Index nn = a.rows();
      const double nu = 1.0 / (static_cast<double>(nn) * static_cast<double>(nn - 3));
      const double beta = n.a0;
      const double cc = n.a1;
      const double gc = g.cwiseProduct(c).sum();  // full Frobenius dot: R = A - beta*C everywhere
      const double k = gc * nu / cc;
      parent_grad(0) += g - k * offdiag(c);
      parent_grad(1) += -beta * g - k * (offdiag(a) - 2.0 * beta * offdiag(c));
      break;
    }
  }
}

double grad_check(const std::function<Var(Tape&, Var)>& f, const Mat& point, double step) {
  if (!(step > 0.0)) {
    throw RuntimeError("grad_check: step must be positive");
  }
  Mat analytic;
  {
    Tape tape;
    Var p = tape.param(point);
    Var out = f(tape, p);
    if (tape.value(out).rows() != 1 || tape.value(out).cols() != 1) {
      throw RuntimeError("grad_check: function must be scalar-valued");
    }
    tape.backward(out);
    analytic = tape.grad(p);
  }
  auto eval = [&](const Mat& at) {
    Tape tape;
    Var p = tape.param(at);
    return tape.scalar(f(tape, p));
  };
  double worst = 0.0;
  Mat perturbed = point;
  for (Eigen::Index i = 0; i < point.rows(); ++i) {
    for (Eigen::Index j = 0; j < point.cols(); ++j) {
      const double orig = point(i, j);
      perturbed(i, j) = orig + step;
      const double fp = eval(perturbed);
      perturbed(i, j) = orig - step;
      const double fm = eval(perturbed);
      perturbed(i, j) = orig;
      const double fd = (fp - fm) / (2.0 * step);
      const double err = std::abs(analytic(i, j) - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace dbrlab::ad
