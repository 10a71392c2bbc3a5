// include/ft/lattice.h
//
// Transducer alignment lattice. Frames are indexed t = 0..T-1 and emitted
// labels u = 0..U. From node (t, u) a blank moves to (t+1, u) and the label
// y[u] moves to (t, u+1). Every alignment ends with the blank emitted at
// (T-1, U), so it holds exactly T blanks and U labels.

#ifndef FT_LATTICE_H_
#define FT_LATTICE_H_

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "ft/autodiff.h"
#include "ft/tensor.h"
#include "ft/tokens.h"

namespace ft {

// Per-node output log-distributions over {blank} + vocabulary. Column 0 is the
// blank, columns 1..V the vocabulary ids.
struct LatticeLogProbs {
  LatticeLogProbs() = default;
  LatticeLogProbs(Tensor logp, std::vector<int> targets);

  std::size_t frames() const { return logp.dim(0); }
  std::size_t labels() const { return targets.size(); }
  std::size_t vocab_size() const { return logp.dim(2) - 1; }

  double at(std::size_t t, std::size_t u, std::size_t k) const {
    return logp[(t * (labels() + 1) + u) * (vocab_size() + 1) + k];
  }

  // Largest |sum(exp(row)) - 1| over all (t, u) rows.
  double max_normalization_error() const;

  Tensor logp;  // [T x (U+1) x (V+1)]
  std::vector<int> targets;
};

// A full symbol sequence over {blank} + vocabulary, length T + U.
struct AlignmentPath {
  std::vector<int> tokens;
};

std::vector<int> collapse_alignment(const AlignmentPath& path);

// log alpha(t, u): log-probability of reaching node (t, u). Shape [T x (U+1)].
Tensor forward_alphas(const LatticeLogProbs& lat);
// log beta(t, u): log-probability of finishing from node (t, u), including
// the final blank. Shape [T x (U+1)].
Tensor backward_betas(const LatticeLogProbs& lat);

double transducer_loss(const LatticeLogProbs& lat);
// d loss / d logp, same shape as lat.logp.
Tensor transducer_loss_grad(const LatticeLogProbs& lat);

// Differentiable loss on a tape. `logp` holds T*(U+1)*(V+1) values laid out
// as LatticeLogProbs::logp.
Var transducer_loss(Var logp, std::span<const int> targets, std::size_t frames);

class LatticeSizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

constexpr std::size_t kMaxEnumerationLength = 12;

// Every alignment whose collapse equals the targets. Throws LatticeSizeError
// when T + U exceeds kMaxEnumerationLength.
std::vector<AlignmentPath> enumerate_alignments(std::size_t frames,
                                                std::span<const int> targets);
double path_log_prob(const LatticeLogProbs& lat, const AlignmentPath& path);
double brute_force_loss(const LatticeLogProbs& lat);

}  // namespace ft

#endif  // FT_LATTICE_H_
