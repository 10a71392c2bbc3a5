// tests/lattice_test.cc

#include <chrono>
#include <cmath>
#include <numbers>

#include "ft/lattice.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace ft {
namespace {

using testing::log_binomial;
using testing::random_lattice;
using testing::rel_error;
using testing::uniform_lattice;

TEST(CollapseAlignment, RemovesBlanks) {
  // C=3, A=1, T=20 with blanks between them.
  EXPECT_EQ(collapse_alignment({{kBlank, 3, kBlank, 1, kBlank, 20}}),
            (std::vector<int>{3, 1, 20}));
  EXPECT_TRUE(collapse_alignment({{kBlank, kBlank, kBlank}}).empty());
  EXPECT_EQ(collapse_alignment({{5, 6, 7}}), (std::vector<int>{5, 6, 7}));
}

TEST(LatticeLogProbs, Validation) {
  EXPECT_THROW(LatticeLogProbs(Tensor({2, 2, 3}), {1, 2}), DimensionError);
  EXPECT_THROW(LatticeLogProbs(Tensor({2, 2, 3}), {3}), std::invalid_argument);
  EXPECT_THROW(LatticeLogProbs(Tensor({2, 2, 3}), {0}), std::invalid_argument);
  EXPECT_NO_THROW(LatticeLogProbs(Tensor({2, 2, 3}), {2}));
}

TEST(ForwardAlphas, BaseCase) {
  const Tensor alpha = forward_alphas(uniform_lattice(1, 0, 1));
  EXPECT_EQ(alpha.at(0, 0), 0.0);
}

TEST(ForwardAlphas, TwoPathCount) {
  // T=2, U=1, two symbols: two paths reach the last node, each (1/2)^2.
  const Tensor alpha = forward_alphas(uniform_lattice(2, 1, 1));
  EXPECT_NEAR(alpha.at(1, 1), -std::numbers::ln2, 1e-15);
}

// A path visits several nodes of one frame, but leaves the frame through
// exactly one blank, so the blank-exit masses of a frame are probabilities of
// disjoint events.
TEST(ForwardAlphas, BlankExitMassPerFrameAtMostOne) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto lat = random_lattice(1 + rng.index(5), rng.index(4),
                                    1 + rng.index(3), rng);
    const Tensor alpha = forward_alphas(lat);
    for (std::size_t t = 0; t < lat.frames(); ++t) {
      double mass = 0.0;
      for (std::size_t u = 0; u <= lat.labels(); ++u) {
        EXPECT_LE(alpha.at(t, u), 1e-12);
        mass += std::exp(alpha.at(t, u) + lat.at(t, u, kBlank));
      }
      EXPECT_LE(mass, 1.0 + 1e-9);
    }
  }
}

TEST(TransducerLoss, UniqueAlignment) {
  Rng rng(1);
  const auto lat = random_lattice(1, 1, 1, rng);
  EXPECT_DOUBLE_EQ(transducer_loss(lat), -(lat.at(0, 0, 1) + lat.at(0, 1, kBlank)));
}

TEST(TransducerLoss, EmptyTarget) {
  Rng rng(2);
  const auto lat = random_lattice(4, 0, 3, rng);
  double expected = 0.0;
  for (std::size_t t = 0; t < 4; ++t) expected -= lat.at(t, 0, kBlank);
  EXPECT_NEAR(transducer_loss(lat), expected, 1e-12);
}

TEST(TransducerLoss, UniformClosedForm) {
  for (std::size_t T = 1; T <= 5; ++T) {
    for (std::size_t U = 0; U <= 4; ++U) {
      for (std::size_t V : {1u, 3u}) {
        const double expected = -log_binomial(T - 1 + U, U) +
                                static_cast<double>(T + U) *
                                    std::log(static_cast<double>(V + 1));
        EXPECT_NEAR(transducer_loss(uniform_lattice(T, U, V)), expected, 1e-9)
            << "T=" << T << " U=" << U << " V=" << V;
      }
    }
  }
}

TEST(TransducerLoss, MatchesEnumeration) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto lat = random_lattice(1 + rng.index(4), rng.index(4),
                                    1 + rng.index(3), rng);
    const double dp = transducer_loss(lat);
    EXPECT_NEAR(dp, brute_force_loss(lat), 1e-9);
    EXPECT_GE(dp, -1e-12);
  }
}

TEST(BruteForce, PathCountsAndStructure) {
  const std::vector<int> one = {1};
  EXPECT_EQ(enumerate_alignments(2, one).size(), 2u);
  EXPECT_EQ(enumerate_alignments(5, std::vector<int>{}).size(), 1u);
  const std::vector<int> three = {2, 1, 2};
  const auto paths = enumerate_alignments(4, three);
  EXPECT_EQ(paths.size(), static_cast<std::size_t>(std::llround(
                              std::exp(log_binomial(4 - 1 + 3, 3)))));
  for (const auto& p : paths) {
    EXPECT_EQ(p.tokens.size(), 7u);
    EXPECT_EQ(std::count(p.tokens.begin(), p.tokens.end(), kBlank), 4);
    EXPECT_EQ(p.tokens.back(), kBlank);
    EXPECT_EQ(collapse_alignment(p), three);
  }
}

TEST(BruteForce, SizeGuard) {
  const std::vector<int> targets(6, 1);
  EXPECT_THROW(enumerate_alignments(7, targets), LatticeSizeError);
  EXPECT_NO_THROW(enumerate_alignments(6, targets));
}

TEST(TransducerLossGrad, UniqueAlignmentOccupancy) {
  Rng rng(3);
  const auto lat = random_lattice(1, 1, 2, rng);
  const Tensor g = transducer_loss_grad(lat);
  const int y = lat.targets[0];
  for (std::size_t u = 0; u <= 1; ++u) {
    for (std::size_t k = 0; k <= 2; ++k) {
      double expected = 0.0;
      if (u == 0 && static_cast<int>(k) == y) expected = -1.0;
      if (u == 1 && k == kBlank) expected = -1.0;
      EXPECT_NEAR(g[u * 3 + k], expected, 1e-12);
    }
  }
}

TEST(TransducerLossGrad, MatchesFiniteDifferences) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    auto lat = random_lattice(1 + rng.index(4), rng.index(4), 1 + rng.index(3), rng);
    const Tensor g = transducer_loss_grad(lat);
    for (std::size_t i = 0; i < lat.logp.size(); ++i) {
      const double saved = lat.logp[i];
      lat.logp[i] = saved + 1e-5;
      const double up = transducer_loss(lat);
      lat.logp[i] = saved - 1e-5;
      const double down = transducer_loss(lat);
      lat.logp[i] = saved;
      EXPECT_LT(rel_error((up - down) / 2e-5, g[i]), 1e-5) << "entry " << i;
    }
  }
}

TEST(TransducerLossGrad, TotalOccupancyAndSupport) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto lat = random_lattice(1 + rng.index(6), rng.index(5), 1 + rng.index(4), rng);
    const Tensor g = transducer_loss_grad(lat);
    double total = 0.0;
    const std::size_t K = lat.vocab_size() + 1;
    for (std::size_t t = 0; t < lat.frames(); ++t) {
      for (std::size_t u = 0; u <= lat.labels(); ++u) {
        for (std::size_t k = 0; k < K; ++k) {
          const double v = g[(t * (lat.labels() + 1) + u) * K + k];
          total -= v;
          const bool allowed =
              k == kBlank ||
              (u < lat.labels() && static_cast<int>(k) == lat.targets[u]);
          if (!allowed) {
            EXPECT_EQ(v, 0.0);
          }
        }
      }
    }
    EXPECT_NEAR(total, static_cast<double>(lat.frames() + lat.labels()), 1e-6);
  }
}

TEST(TransducerLoss, TapeOpMatchesAnalyticGradient) {
  Rng rng(12);
  auto lat = random_lattice(3, 2, 3, rng);
  Parameter lp("lp", lat.logp.reshaped({3 * 3, 4}));
  lp.zero_grad();
  Tape tape;
  const Var loss = transducer_loss(tape.param(lp), lat.targets, 3);
  EXPECT_DOUBLE_EQ(loss.value().item(), transducer_loss(lat));
  tape.backward(loss);
  const Tensor g = transducer_loss_grad(lat);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_DOUBLE_EQ(lp.grad[i], g[i]);
}

}  // namespace
}  // namespace ft
