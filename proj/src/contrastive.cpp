#include "dbrlab/contrastive.hpp"

#include <cmath>
#include <utility>

namespace dbrlab::contrastive {

NegativeSet shuffle_negatives(const Mat& x, int m, rng::Engine& eng) {
  if (x.rows() < 4) {
    throw RuntimeError("shuffle_negatives: batch too small (b = " + std::to_string(x.rows()) +
                       ", need b >= 4)");
  }
  if (m < 0) {
    throw RuntimeError("shuffle_negatives: m must be >= 0");
  }
  NegativeSet out;
  out.m = m;
  const int b = static_cast<int>(x.rows());
  for (int j = 0; j < m; ++j) {
    std::vector<int> pi = eng.permutation(b);
    Mat shuf(x.rows(), x.cols());
    for (int i = 0; i < b; ++i) {
      shuf.row(i) = x.row(pi[static_cast<std::size_t>(i)]);
    }
    out.permutations.push_back(std::move(pi));
    out.shuffled.push_back(std::move(shuf));
  }
  return out;
}

ad::Var pdcor_on_tape(ad::Tape& tape, const dep::CenteredMatrix& wx,
                      const dep::CenteredMatrix& wt, ad::Var z, dep::Centering mode) {
  ad::Var cx = tape.input(wx.entries);
  ad::Var ct = tape.input(wt.entries);
  ad::Var wz = tape.center(tape.pairwise_euclidean(z), mode);
  ad::Var px = tape.project(cx, wz);
  ad::Var pt = tape.project(ct, wz);
  ad::Var xx = tape.otimes(px, px);
  ad::Var tt = tape.otimes(pt, pt);
  // degenerate norms: the measure is 0 by convention (constant, no gradient)
  if (std::sqrt(tape.scalar(xx)) <= dep::kDegenerateTol ||
      std::sqrt(tape.scalar(tt)) <= dep::kDegenerateTol) {
    return tape.input(Mat::Zero(1, 1));
  }
  ad::Var num = tape.abs(tape.otimes(px, pt));
  ad::Var den = tape.mul(tape.sqrt(xx), tape.sqrt(tt));
  return tape.div(num, den);
}

ad::Var cr_loss(ad::Tape& tape, const Mat& x, const Mat& t, const ReprFn& repr,
                const NegativeSet& negatives, dep::Centering mode) {
  if (x.rows() != t.rows()) {
    throw RuntimeError("cr_loss: batch mismatch between covariates (" + shape_str(x) +
                       ") and treatments (" + shape_str(t) + ")");
  }
  for (const Mat& s : negatives.shuffled) {
    if (s.rows() != x.rows()) {
      throw RuntimeError("cr_loss: negative batch size mismatch");
    }
  }
  const dep::CenteredMatrix wx = dep::center(dep::pairwise_euclidean(x), mode);
  const dep::CenteredMatrix wt = dep::center(dep::pairwise_euclidean(t), mode);
  ad::Var positive = pdcor_on_tape(tape, wx, wt, repr(tape, x), mode);
  if (negatives.m == 0) {
    return positive;
  }
  std::vector<ad::Var> neg_terms;
  neg_terms.reserve(negatives.shuffled.size());
  for (const Mat& xs : negatives.shuffled) {
    neg_terms.push_back(pdcor_on_tape(tape, wx, wt, repr(tape, xs), mode));
  }
  ad::Var lse = tape.logsumexp(tape.concat_cols(neg_terms));
  return tape.sub(positive, lse);
}

}  // namespace dbrlab::contrastive
