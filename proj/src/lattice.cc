// src/lattice.cc

#include "ft/lattice.h"

#include <cmath>
#include <string>

namespace ft {

LatticeLogProbs::LatticeLogProbs(Tensor lp, std::vector<int> tgt)
    : logp(std::move(lp)), targets(std::move(tgt)) {
  if (logp.rank() != 3) {
    throw DimensionError("lattice log-probs must be [T x (U+1) x (V+1)], got " +
                         shape_string(logp.shape()));
  }
  if (logp.dim(1) != targets.size() + 1) {
    throw DimensionError("lattice has " + std::to_string(logp.dim(1)) +
                         " label positions for " +
                         std::to_string(targets.size()) + " targets");
  }
  if (logp.dim(2) < 2) {
    throw DimensionError("lattice needs at least one non-blank symbol");
  }
  const int V = static_cast<int>(logp.dim(2)) - 1;
  for (int y : targets) {
    if (y < 1 || y > V) {
      throw std::invalid_argument("target id " + std::to_string(y) +
                                  " outside [1, " + std::to_string(V) + "]");
    }
  }
}

double LatticeLogProbs::max_normalization_error() const {
  double worst = 0.0;
  const std::size_t K = vocab_size() + 1;
  for (std::size_t r = 0; r < logp.size() / K; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(logp[r * K + k]);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

std::vector<int> collapse_alignment(const AlignmentPath& path) {
  std::vector<int> out;
  for (int s : path.tokens) {
    if (s != kBlank) out.push_back(s);
  }
  return out;
}

Tensor forward_alphas(const LatticeLogProbs& lat) {
  const std::size_t T = lat.frames(), U = lat.labels();
  Tensor alpha({T, U + 1}, kNegInf);
  alpha.at(0, 0) = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t u = 0; u <= U; ++u) {
      if (t == 0 && u == 0) continue;
      double from_blank = kNegInf, from_label = kNegInf;
      if (t > 0) from_blank = alpha.at(t - 1, u) + lat.at(t - 1, u, kBlank);
      if (u > 0) {
        const auto y = static_cast<std::size_t>(lat.targets[u - 1]);
        from_label = alpha.at(t, u - 1) + lat.at(t, u - 1, y);
      }
      alpha.at(t, u) = log_add(from_blank, from_label);
    }
  }
  return alpha;
}

Tensor backward_betas(const LatticeLogProbs& lat) {
  const std::size_t T = lat.frames(), U = lat.labels();
  Tensor beta({T, U + 1}, kNegInf);
  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t u = U + 1; u-- > 0;) {
      double via_blank = kNegInf, via_label = kNegInf;
      if (t + 1 < T) {
        via_blank = beta.at(t + 1, u) + lat.at(t, u, kBlank);
      } else if (u == U) {
        via_blank = lat.at(t, u, kBlank);
      }
      if (u < U) {
        const auto y = static_cast<std::size_t>(lat.targets[u]);
        via_label = beta.at(t, u + 1) + lat.at(t, u, y);
      }
      beta.at(t, u) = log_add(via_blank, via_label);
    }
  }
  return beta;
}

double transducer_loss(const LatticeLogProbs& lat) {
  const Tensor alpha = forward_alphas(lat);
  const std::size_t T = lat.frames(), U = lat.labels();
  return -(alpha.at(T - 1, U) + lat.at(T - 1, U, kBlank));
}

Tensor transducer_loss_grad(const LatticeLogProbs& lat) {
  const std::size_t T = lat.frames(), U = lat.labels();
  const std::size_t K = lat.vocab_size() + 1;
  const Tensor alpha = forward_alphas(lat);
  const Tensor beta = backward_betas(lat);
  const double log_z = beta.at(0, 0);
  Tensor grad(lat.logp.shape());
  // The gradient of -log Z w.r.t. an arc's log-weight is minus the posterior
  // occupancy of that arc.
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t u = 0; u <= U; ++u) {
      const std::size_t base = (t * (U + 1) + u) * K;
      const double a = alpha.at(t, u);
      if (a == kNegInf) continue;
      double blank_rest = kNegInf;
      if (t + 1 < T) {
        blank_rest = beta.at(t + 1, u);
      } else if (u == U) {
        blank_rest = 0.0;
      }
      if (blank_rest != kNegInf) {
        grad[base + kBlank] =
            -std::exp(a + lat.at(t, u, kBlank) + blank_rest - log_z);
      }
      if (u < U) {
        const auto y = static_cast<std::size_t>(lat.targets[u]);
        grad[base + y] = -std::exp(a + lat.at(t, u, y) + beta.at(t, u + 1) - log_z);
      }
    }
  }
  return grad;
}

Var transducer_loss(Var logp, std::span<const int> targets, std::size_t frames) {
  const Tensor& v = logp.value();
  const std::size_t U = targets.size();
  if (frames == 0 || v.size() % (frames * (U + 1)) != 0) {
    throw DimensionError("transducer_loss: " + shape_string(v.shape()) +
                         " is not a lattice of " + std::to_string(frames) +
                         " frames and " + std::to_string(U) + " labels");
  }
  const std::size_t K = v.size() / (frames * (U + 1));
  LatticeLogProbs lat(v.reshaped({frames, U + 1, K}),
                      std::vector<int>(targets.begin(), targets.end()));
  const double loss = transducer_loss(lat);
  return logp.tape()->record(
      "transducer_loss", Tensor::scalar(loss), {logp},
      [lat = std::move(lat)](Tape& t, std::uint32_t self) {
        const double g = t.grad(self)[0];
        const Tensor dl = transducer_loss_grad(lat);
        Tensor& dx = t.grad(t.inputs(self)[0]);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g * dl[i];
      });
}

namespace {

void enumerate_from(std::size_t t, std::size_t u, std::size_t frames,
                    std::span<const int> targets, std::vector<int>& prefix,
                    std::vector<AlignmentPath>& out) {
  const std::size_t U = targets.size();
  if (t == frames - 1 && u == U) {
    prefix.push_back(kBlank);
    out.push_back({prefix});
    prefix.pop_back();
    return;
  }
  if (t + 1 < frames) {
    prefix.push_back(kBlank);
    enumerate_from(t + 1, u, frames, targets, prefix, out);
    prefix.pop_back();
  }
  if (u < U) {
    prefix.push_back(targets[u]);
    enumerate_from(t, u + 1, frames, targets, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

std::vector<AlignmentPath> enumerate_alignments(std::size_t frames,
                                                std::span<const int> targets) {
  if (frames == 0) throw LatticeSizeError("alignment needs at least one frame");
  if (frames + targets.size() > kMaxEnumerationLength) {
    throw LatticeSizeError(
        "refusing to enumerate alignments for T + U = " +
        std::to_string(frames + targets.size()) + " > " +
        std::to_string(kMaxEnumerationLength));
  }
  std::vector<AlignmentPath> out;
  std::vector<int> prefix;
  enumerate_from(0, 0, frames, targets, prefix, out);
  return out;
}

double path_log_prob(const LatticeLogProbs& lat, const AlignmentPath& path) {
  std::size_t t = 0, u = 0;
  double lp = 0.0;
  for (int s : path.tokens) {
    lp += lat.at(t, u, static_cast<std::size_t>(s));
    if (s == kBlank) {
      ++t;
    } else {
      ++u;
    }
  }
  return lp;
}

double brute_force_loss(const LatticeLogProbs& lat) {
  const auto paths = enumerate_alignments(lat.frames(), lat.targets);
  std::vector<double> scores;
  scores.reserve(paths.size());
  for (const auto& p : paths) scores.push_back(path_log_prob(lat, p));
  return -logsumexp(scores);
}

}  // namespace ft
