#pragma once

#include <functional>
#include <vector>

#include "dbrlab/autodiff.hpp"
#include "dbrlab/common.hpp"
#include "dbrlab/dependence.hpp"
#include "dbrlab/rng.hpp"

namespace dbrlab::contrastive {

// m row-shuffles of a batch of covariates. Each shuffled matrix holds exactly
// the rows of the original, reordered; the identity permutation is permitted.
struct NegativeSet {
  int m = 0;
  std::vector<std::vector<int>> permutations;
  std::vector<Mat> shuffled;
};

NegativeSet shuffle_negatives(const Mat& x, int m, rng::Engine& eng);

using ReprFn = std::function<ad::Var(ad::Tape&, const Mat&)>;

// Partial distance measure of (x_args, t_args) conditioned on the on-tape
// representation z; the argument distance matrices enter as constants.
ad::Var pdcor_on_tape(ad::Tape& tape, const dep::CenteredMatrix& wx,
                      const dep::CenteredMatrix& wt, ad::Var z, dep::Centering mode);

// Contrastive regularizer: D_{repr(x)}(x, t) - log sum_j exp(D_{repr(x'_j)}(x, t)).
// The measure arguments stay the original x and t for every term; only the
// conditioning representation comes from the shuffled covariates. With m = 0
// the log-sum-exp term is dropped and the loss is the positive term alone.
ad::Var cr_loss(ad::Tape& tape, const Mat& x, const Mat& t, const ReprFn& repr,
                const NegativeSet& negatives, dep::Centering mode);

}  // namespace dbrlab::contrastive
