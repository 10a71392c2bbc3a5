// tests/model_test.cc

#include <cmath>
#include <set>

#include "ft/model.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace ft {
namespace {

using testing::check_parameter_grads;
using testing::log_binomial;
using testing::random_tensor;

ModelConfig tiny_config(std::size_t V = 5) {
  ModelConfig cfg;
  cfg.encoder.input_dim = 4;
  cfg.encoder.hidden_dim = 8;
  cfg.encoder.layers = 2;
  cfg.vocab_size = V;
  cfg.embed_dim = 6;
  cfg.predictor_dim = 8;
  cfg.joint_dim = 8;
  return cfg;
}

std::vector<int> random_tokens(std::size_t n, std::size_t V, Rng& rng) {
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(1 + static_cast<int>(rng.index(V)));
  return out;
}

void zero(Parameter& p) { p.value = Tensor(p.value.shape()); }

TEST(Encode, CausalPrefixInvariance) {
  FactorizedTransducer model(tiny_config(), 1);
  Rng rng(3);
  const Tensor x = random_tensor({7, 4}, rng);
  const Tensor full = encode(model, x);
  for (std::size_t t = 1; t <= 7; ++t) {
    Tensor prefix({t, 4});
    std::copy_n(x.data().begin(), t * 4, prefix.data().begin());
    const Tensor part = encode(model, prefix);
    for (std::size_t i = 0; i < part.size(); ++i) EXPECT_EQ(part[i], full[i]);
  }
}

TEST(Encode, ZeroWeightsGiveConstantSequence) {
  StandardTransducer model(tiny_config(), 2);
  for (Parameter* p : model.parameters()) {
    if (p->name.starts_with("encoder.")) zero(*p);
  }
  Rng rng(4);
  const Tensor f = encode(model, random_tensor({5, 4}, rng));
  for (std::size_t t = 1; t < 5; ++t) {
    for (std::size_t c = 0; c < f.cols(); ++c) EXPECT_EQ(f.at(t, c), f.at(0, c));
  }
}

TEST(Encode, RejectsDegenerateInput) {
  StandardTransducer model(tiny_config(), 2);
  EXPECT_THROW(Tensor({0, 4}), DimensionError);
  EXPECT_THROW(encode(model, Tensor({3, 5})), DimensionError);
  EXPECT_THROW(encode(model, Tensor({12})), DimensionError);
}

TEST(PredictVocab, NormalisedAndAcousticallyIndependent) {
  FactorizedTransducer model(tiny_config(), 5);
  Rng rng(6);
  const auto history = random_tokens(4, 5, rng);
  const Tensor lp = predict_vocab(model, history);
  ASSERT_EQ(lp.size(), 5u);
  double s = 0.0;
  for (double v : lp.data()) s += std::exp(v);
  EXPECT_NEAR(s, 1.0, 1e-12);

  // The vocabulary rows seen by the joint at two different frames and two
  // different utterances are the same tensor the standalone LM produces.
  const Tensor x1 = random_tensor({6, 4}, rng), x2 = random_tensor({3, 4}, rng);
  const EncodedInput e1 = model.encode_input(x1), e2 = model.encode_input(x2);
  PredictorState st = model.initial_state();
  for (int y : history) st = model.advance(st, y);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(st.parts[3][k], lp[k]);
  const Tensor r1 = model.output_row(e1, 4, st), r2 = model.output_row(e2, 1, st);
  // Subtracting the encoder part recovers identical vocab rows.
  for (std::size_t k = 0; k < 5; ++k) {
    const double v1 = (r1[k + 1] - r1[0]) - e1.vocab_scores.at(4, k);
    const double v2 = (r2[k + 1] - r2[0]) - e2.vocab_scores.at(1, k);
    EXPECT_NEAR(v1 - v2, (r1[1] - r1[0] - e1.vocab_scores.at(4, 0)) -
                             (r2[1] - r2[0] - e2.vocab_scores.at(1, 0)),
                1e-12);
  }
}

TEST(PredictVocab, RejectsInvalidIds) {
  FactorizedTransducer model(tiny_config(), 5);
  const std::vector<int> bad = {2, 6};
  EXPECT_THROW(predict_vocab(model, bad), std::invalid_argument);
  const std::vector<int> blank = {0};
  EXPECT_THROW(predict_vocab(model, blank), std::invalid_argument);
}

TEST(PredictVocab, UntrainedPerplexityNearUniform) {
  ModelConfig cfg = tiny_config(30);
  FactorizedTransducer model(cfg, 7);
  Rng rng(8);
  double nll = 0.0;
  std::size_t count = 0;
  for (int s = 0; s < 50; ++s) {
    const auto toks = random_tokens(8, 30, rng);
    nll += lm_nll(model, toks);
    count += toks.size() + 1;
  }
  const double ppl = std::exp(nll / static_cast<double>(count));
  EXPECT_GT(ppl, 0.8 * 30);
  EXPECT_LT(ppl, 1.2 * 30);
}

TEST(JointStandard, RowsNormaliseAndDependOnlyOnInputs) {
  StandardTransducer model(tiny_config(), 9);
  Rng rng(10);
  Tensor x = random_tensor({5, 4}, rng);
  const auto y = random_tokens(3, 5, rng);
  const Tensor f = encode(model, x);
  const Tensor g = model.predictor_outputs(y);
  const LatticeLogProbs lat = joint_standard(model, f, g, y);
  EXPECT_LT(lat.max_normalization_error(), 1e-9);

  Tensor f2 = f;
  std::copy_n(f.row(1).begin(), f.cols(), f2.row(3).begin());
  const LatticeLogProbs lat2 = joint_standard(model, f2, g, y);
  for (std::size_t u = 0; u <= 3; ++u) {
    for (std::size_t k = 0; k <= 5; ++k) EXPECT_EQ(lat2.at(3, u, k), lat2.at(1, u, k));
  }
  EXPECT_THROW(joint_standard(model, f, g, random_tokens(2, 5, rng)),
               DimensionError);
}

TEST(JointStandard, ZeroOutputLayerGivesClosedFormLoss) {
  StandardTransducer model(tiny_config(), 11);
  zero(model.joint_out().weight);
  zero(model.joint_out().bias);
  Rng rng(12);
  for (std::size_t T : {1u, 3u, 6u}) {
    for (std::size_t U : {0u, 2u, 4u}) {
      const auto y = random_tokens(U, 5, rng);
      const LatticeLogProbs lat = model.lattice(random_tensor({T, 4}, rng), y);
      const double expected =
          -log_binomial(T - 1 + U, U) + static_cast<double>(T + U) * std::log(6.0);
      EXPECT_NEAR(transducer_loss(lat), expected, 1e-9);
    }
  }
}

TEST(JointFactorized, RowsNormalise) {
  FactorizedTransducer model(tiny_config(), 13);
  Rng rng(14);
  const auto y = random_tokens(4, 5, rng);
  const LatticeLogProbs lat = model.lattice(random_tensor({6, 4}, rng), y);
  EXPECT_LT(lat.max_normalization_error(), 1e-9);
  EXPECT_EQ(lat.logp.dim(2), 6u);
}

TEST(JointFactorized, LmEquivalenceWithZeroEncoderVocabProjection) {
  FactorizedTransducer model(tiny_config(), 15);
  zero(model.encoder_vocab_proj().weight);
  zero(model.encoder_vocab_proj().bias);
  Rng rng(16);
  const auto y = random_tokens(3, 5, rng);
  const LatticeLogProbs lat = model.lattice(random_tensor({5, 4}, rng), y);
  for (std::size_t u = 0; u <= 3; ++u) {
    const Tensor lm = predict_vocab(model, std::span<const int>(y).first(u));
    for (std::size_t t = 0; t < 5; ++t) {
      const double log_not_blank = std::log1p(-std::exp(lat.at(t, u, kBlank)));
      for (std::size_t k = 1; k <= 5; ++k) {
        EXPECT_NEAR(std::exp(lat.at(t, u, k) - log_not_blank), std::exp(lm[k - 1]),
                    1e-12);
      }
    }
  }
}

TEST(JointFactorized, SwappingVocabPredictorKeepsBlankLogits) {
  FactorizedTransducer model(tiny_config(), 17);
  Rng rng(18);
  const auto y = random_tokens(3, 5, rng);
  const Tensor x = random_tensor({5, 4}, rng);
  const Tensor f = encode(model, x);
  const Tensor gb = model.blank_predictor_outputs(y);
  const Tensor rows_a = model.vocab_predictor().prefix_log_probs(y);
  const RecurrentLm other(tiny_config(), 99);
  const Tensor rows_b = other.prefix_log_probs(y);

  const Tensor zb_a = model.blank_logits(f, gb);
  const LatticeLogProbs a = joint_factorized(model, f, gb, rows_a, y);
  const LatticeLogProbs b = joint_factorized(model, f, gb, rows_b, y);
  EXPECT_TRUE(bit_identical(zb_a, model.blank_logits(f, gb)));
  EXPECT_FALSE(bit_identical(a.logp, b.logp));
  EXPECT_LT(b.max_normalization_error(), 1e-9);
}

TEST(CombinedLoss, LambdaArithmetic) {
  FactorizedTransducer model(tiny_config(), 19);
  Rng rng(20);
  const Tensor x = random_tensor({6, 4}, rng);
  const auto y = random_tokens(3, 5, rng);
  const LossBreakdown l0 = combined_loss(model, x, y, 0.0);
  EXPECT_EQ(l0.total, l0.transducer);
  for (double lambda : {0.1, 0.2, 0.5, 1.0}) {
    const LossBreakdown l = combined_loss(model, x, y, lambda);
    EXPECT_NEAR(l.total, l.transducer + lambda * l.lm_nll, 1e-12);
    EXPECT_EQ(l.lambda, lambda);
  }
  EXPECT_THROW(combined_loss(model, x, y, -0.1), std::invalid_argument);
}

TEST(CombinedLoss, TapeMatchesInferencePath) {
  FactorizedTransducer model(tiny_config(), 21);
  Rng rng(22);
  const Tensor x = random_tensor({6, 4}, rng);
  const auto y = random_tokens(3, 5, rng);
  Tape tape;
  const UtteranceLoss l = model.loss_on_tape(tape, x, y, 0.5);
  const LossBreakdown ref = combined_loss(model, x, y, 0.5);
  EXPECT_EQ(l.transducer, ref.transducer);
  EXPECT_EQ(l.lm_nll, ref.lm_nll);
  EXPECT_EQ(l.total.value().item(), ref.total);
}

TEST(CombinedLoss, GradientMatchesFiniteDifferences) {
  FactorizedTransducer model(tiny_config(), 23);
  Rng rng(24);
  const Tensor x = random_tensor({6, 4}, rng);
  const auto y = random_tokens(3, 5, rng);
  model.zero_grad();
  Tape tape;
  tape.backward(model.loss_on_tape(tape, x, y, 0.5).total);
  const auto r = check_parameter_grads(model.parameters(), [&] {
    return combined_loss(model, x, y, 0.5).total;
  });
  EXPECT_LT(r.worst, 1e-4) << r.where;
}

TEST(StandardLoss, GradientMatchesFiniteDifferences) {
  StandardTransducer model(tiny_config(), 25);
  Rng rng(26);
  const Tensor x = random_tensor({5, 4}, rng);
  const auto y = random_tokens(2, 5, rng);
  model.zero_grad();
  Tape tape;
  tape.backward(model.loss_on_tape(tape, x, y, 0.0).total);
  const auto r = check_parameter_grads(model.parameters(), [&] {
    return transducer_loss(model.lattice(x, y));
  });
  EXPECT_LT(r.worst, 1e-4) << r.where;
}

TEST(LmNll, UniformOneToken) {
  FactorizedTransducer model(tiny_config(7), 27);
  for (Parameter* p : model.vocab_predictor().parameters()) {
    if (p->name.starts_with("lm.out")) zero(*p);
  }
  const std::vector<int> one = {4};
  EXPECT_NEAR(lm_nll(model, one), 2.0 * std::log(7.0), 1e-12);
}

TEST(LmNll, LeavesAcousticParametersUntouched) {
  FactorizedTransducer model(tiny_config(), 28);
  Rng rng(29);
  const auto y = random_tokens(4, 5, rng);
  model.zero_grad();
  Tape tape;
  tape.backward(model.vocab_predictor().nll(tape, y));
  for (Parameter* p : model.acoustic_parameters()) {
    for (double g : p->grad.data()) ASSERT_EQ(g, 0.0) << p->name;
  }
  double lm_grad = 0.0;
  for (Parameter* p : model.vocab_predictor().parameters()) {
    for (double g : p->grad.data()) lm_grad += std::abs(g);
  }
  EXPECT_GT(lm_grad, 0.0);
}

TEST(LmNll, ChainRuleAdditivity) {
  FactorizedTransducer model(tiny_config(), 30);
  Rng rng(31);
  const auto y = random_tokens(6, 5, rng);
  // Stepwise conditional log-probs through the incremental state API.
  LmState st = model.vocab_predictor().start();
  double stepwise = 0.0;
  for (int tok : y) {
    stepwise -= st.log_probs[static_cast<std::size_t>(tok - 1)];
    st = model.vocab_predictor().advance(st, tok);
  }
  stepwise -= st.log_probs[kEos - 1];
  EXPECT_NEAR(lm_nll(model, y), stepwise, 1e-12);
}

TEST(Decoding, StepwiseRowsMatchLattice) {
  for (int kind = 0; kind < 2; ++kind) {
    std::unique_ptr<TransducerModel> model;
    if (kind == 0) {
      model = std::make_unique<StandardTransducer>(tiny_config(), 32);
    } else {
      model = std::make_unique<FactorizedTransducer>(tiny_config(), 32);
    }
    Rng rng(33);
    const Tensor x = random_tensor({4, 4}, rng);
    const auto y = random_tokens(3, 5, rng);
    const LatticeLogProbs lat = model->lattice(x, y);
    const EncodedInput enc = model->encode_input(x);
    PredictorState st = model->initial_state();
    for (std::size_t u = 0; u <= 3; ++u) {
      for (std::size_t t = 0; t < 4; ++t) {
        const Tensor row = model->output_row(enc, t, st);
        for (std::size_t k = 0; k <= 5; ++k) EXPECT_EQ(row[k], lat.at(t, u, k));
      }
      if (u < 3) st = model->advance(st, y[u]);
    }
  }
}

TEST(Parameters, NamesAreUnique) {
  FactorizedTransducer f(tiny_config(), 1);
  StandardTransducer s(tiny_config(), 1);
  for (auto names : {f.parameters(), s.parameters()}) {
    std::set<std::string> seen;
    for (Parameter* p : names) {
      EXPECT_TRUE(seen.insert(p->name).second) << p->name;
      EXPECT_EQ(p->grad.shape(), p->value.shape());
    }
  }
}

}  // namespace
}  // namespace ft
