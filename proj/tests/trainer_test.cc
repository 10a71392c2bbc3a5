// tests/trainer_test.cc

#include <cmath>

#include "ft/trainer.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace ft {
namespace {

using testing::random_tensor;

ModelConfig tiny_config(std::size_t V) {
  ModelConfig cfg;
  cfg.encoder.input_dim = 4;
  cfg.encoder.hidden_dim = 8;
  cfg.encoder.layers = 1;
  cfg.vocab_size = V;
  cfg.embed_dim = 6;
  cfg.predictor_dim = 8;
  cfg.joint_dim = 8;
  return cfg;
}

std::vector<Utterance> tiny_corpus(std::size_t n, std::size_t V, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Utterance> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> toks(1 + rng.index(3));
    for (int& t : toks) t = 1 + static_cast<int>(rng.index(V));
    out.push_back({"u" + std::to_string(i), random_tensor({2 + rng.index(4), 4}, rng), toks});
  }
  return out;
}

std::vector<Tensor> snapshot(const std::vector<Parameter*>& ps) {
  std::vector<Tensor> out;
  for (const Parameter* p : ps) out.push_back(p->value);
  return out;
}

bool same(const std::vector<Tensor>& a, const std::vector<Parameter*>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!bit_identical(a[i], b[i]->value)) return false;
  }
  return true;
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p("p", Tensor::vector({1.0, -2.0, 0.5}));
  p.grad = Tensor::vector({0.3, -4.0, 0.0});
  Adam opt({&p}, 0.01);
  opt.step();
  // Bias-corrected first step is lr * g / (|g| + eps).
  EXPECT_NEAR(p.value[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(p.value[1], -2.0 + 0.01, 1e-9);
  EXPECT_EQ(p.value[2], 0.5);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(ClipGradNorm, ScalesToMaximum) {
  Parameter a("a", Tensor::vector({0, 0})), b("b", Tensor::vector({0}));
  a.grad = Tensor::vector({3.0, 0.0});
  b.grad = Tensor::vector({4.0});
  std::vector<Parameter*> ps = {&a, &b};
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad[0], 0.8, 1e-15);
  EXPECT_NEAR(clip_grad_norm(ps, 10.0), 1.0, 1e-15);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
}

TEST(Train, OneStepOnOneUtteranceDescends) {
  for (int kind = 0; kind < 2; ++kind) {
    std::unique_ptr<TransducerModel> model;
    if (kind == 0) {
      model = std::make_unique<StandardTransducer>(tiny_config(4), 1);
    } else {
      model = std::make_unique<FactorizedTransducer>(tiny_config(4), 1);
    }
    const auto corpus = tiny_corpus(1, 4, 2);
    auto loss = [&] {
      Tape tape;
      return model->loss_on_tape(tape, corpus[0].features, corpus[0].tokens, 0.5)
          .total.value()
          .item();
    };
    const double before = loss();
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.lr = 1e-4;
    const MetricLog log = train(*model, corpus, cfg);
    EXPECT_LT(loss(), before);
    ASSERT_EQ(log.records().size(), 1u);
    EXPECT_EQ(log.back().step, 1u);
    EXPECT_DOUBLE_EQ(log.back().loss, before);
  }
}

TEST(Train, DeterministicAcrossRunsAndThreadCounts) {
  const auto corpus = tiny_corpus(12, 4, 3);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 9;
  FactorizedTransducer a(tiny_config(4), 5), b(tiny_config(4), 5), c(tiny_config(4), 5);
  cfg.threads = 1;
  const MetricLog la = train(a, corpus, cfg);
  const MetricLog lb = train(b, corpus, cfg);
  cfg.threads = 3;
  const MetricLog lc = train(c, corpus, cfg);
  EXPECT_TRUE(same(snapshot(a.parameters()), b.parameters()));
  EXPECT_TRUE(same(snapshot(a.parameters()), c.parameters()));
  EXPECT_EQ(la.jsonl(), lb.jsonl());
  EXPECT_EQ(la.jsonl(), lc.jsonl());

  FactorizedTransducer d(tiny_config(4), 5);
  cfg.seed = 10;
  train(d, corpus, cfg);
  EXPECT_FALSE(same(snapshot(a.parameters()), d.parameters()));
}

TEST(Train, NonFiniteLossNamesStepAndUtterance) {
  StandardTransducer model(tiny_config(4), 1);
  for (double& w : model.joint_out().weight.value.data()) w = std::nan("");
  const auto corpus = tiny_corpus(2, 4, 4);
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    train(model, corpus, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("step 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("item u"), std::string::npos) << msg;
  }
}

TEST(Train, RejectsBadInputs) {
  StandardTransducer model(tiny_config(4), 1);
  TrainConfig cfg;
  EXPECT_THROW(train(model, std::vector<Utterance>{}, cfg), std::invalid_argument);
  auto corpus = tiny_corpus(1, 4, 1);
  corpus[0].tokens = {5};
  EXPECT_THROW(train(model, corpus, cfg), std::invalid_argument);
  cfg.lambda = -1;
  EXPECT_THROW(train(model, tiny_corpus(1, 4, 1), cfg), std::invalid_argument);
}

TEST(AdaptLm, FreezesAcousticPartsAndLowersPerplexity) {
  SyntheticTaskSpec spec;
  spec.vocab_size = 6;
  spec.feature_dim = 4;
  spec.domain_seed = 21;
  const Vocab vocab = Vocab::synthetic(6);
  FactorizedTransducer model(tiny_config(vocab.model_vocab_size()), 2);
  const TextCorpus text = gen_domain(spec, 200, "adapt", false).text;
  const TextCorpus dev = gen_domain(spec, 100, "dev", false).text;

  const auto frozen = snapshot(model.acoustic_parameters());
  const auto lm_before = snapshot(model.vocab_predictor().parameters());
  std::vector<double> ppl;
  AdaptConfig cfg;
  cfg.sweeps = 1;
  cfg.lr = 1e-3;
  const MetricLog log = adapt_lm(model, text, cfg, [&](MetricRecord& r) {
    r.ppl = eval_ppl(model, dev);
    ppl.push_back(r.ppl);
  });
  ASSERT_EQ(ppl.size(), 2u);
  EXPECT_LT(ppl[1], ppl[0]);
  EXPECT_EQ(log.records()[0].epoch, 0u);
  EXPECT_EQ(log.records()[1].epoch, 1u);
  EXPECT_TRUE(same(frozen, model.acoustic_parameters()));
  EXPECT_FALSE(same(lm_before, model.vocab_predictor().parameters()));
  EXPECT_THROW(adapt_lm(model, TextCorpus{}, cfg), std::invalid_argument);
}

TEST(EvalPpl, UniformModel) {
  RecurrentLm lm(tiny_config(30), 1);
  for (Parameter* p : lm.parameters()) {
    if (p->name.starts_with("lm.out")) p->value = Tensor(p->value.shape());
  }
  const TextCorpus text = {{4, 5, 6}, {7}, {8, 9, 10, 11, 12}};
  EXPECT_NEAR(eval_ppl(lm, text), 30.0, 1e-6);
}

TEST(EvalPpl, RepetitionInvariance) {
  RecurrentLm lm(tiny_config(8), 2);
  const TextCorpus once = {{4, 5, 6, 2}};
  const TextCorpus twice = {{4, 5, 6, 2}, {4, 5, 6, 2}};
  EXPECT_NEAR(eval_ppl(lm, once), eval_ppl(lm, twice), 1e-12);
  EXPECT_THROW(eval_ppl(lm, TextCorpus{}), std::invalid_argument);
}

TEST(EvalPpl, MemorisingOneSentence) {
  RecurrentLm lm(tiny_config(8), 3);
  const TextCorpus text = {{4, 7, 5, 8}};
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.epochs = 300;
  train_lm(lm, text, cfg);
  const double ppl = eval_ppl(lm, text);
  EXPECT_LT(ppl, 1.2);
  EXPECT_GE(ppl, 1.0);
}

// Features carry the answer: row t is [tokens due by the end of frame t,
// y_1, ..., y_U]. The model emits the next reference token while it is due.
class OracleModel : public TransducerModel {
 public:
  explicit OracleModel(std::size_t V) { config_.vocab_size = V; }
  ModelKind kind() const override { return ModelKind::kStandard; }
  const ModelConfig& config() const override { return config_; }
  EncodedInput encode_input(const Tensor& x) const override { return {x, Tensor({1})}; }
  PredictorState initial_state() const override { return {{Tensor::scalar(0)}}; }
  PredictorState advance(const PredictorState& s, int) const override {
    return {{Tensor::scalar(s.parts[0][0] + 1)}};
  }
  Tensor output_row(const EncodedInput& enc, std::size_t t,
                    const PredictorState& s) const override {
    std::vector<double> z(config_.vocab_size + 1, 0.0);
    const auto u = static_cast<std::size_t>(s.parts[0][0]);
    if (static_cast<double>(u) < enc.f.at(t, 0)) {
      z[static_cast<std::size_t>(enc.f.at(t, 1 + u))] = 10.0;
    } else {
      z[kBlank] = 10.0;
    }
    return log_softmax(Tensor::matrix(1, z.size(), z));
  }
  LatticeLogProbs lattice(const Tensor&, std::span<const int>) const override {
    throw std::logic_error("unused");
  }
  UtteranceLoss loss_on_tape(Tape&, const Tensor&, std::span<const int>, double) override {
    throw std::logic_error("unused");
  }
  std::vector<Parameter*> parameters() override { return {}; }

 private:
  ModelConfig config_;
};

TEST(EvalWer, OracleModelIsPerfect) {
  Rng rng(5);
  std::vector<Utterance> corpus;
  for (int i = 0; i < 10; ++i) {
    const std::size_t U = 1 + rng.index(4), T = 1 + rng.index(5);
    std::vector<int> toks(U);
    for (int& t : toks) t = 1 + static_cast<int>(rng.index(6));
    Tensor x({T, 1 + U});
    for (std::size_t t = 0; t < T; ++t) {
      // Tokens due by frame t: evenly spread, all of them by the last frame.
      x.at(t, 0) = static_cast<double>((t + 1) * U / T);
      for (std::size_t k = 0; k < U; ++k) x.at(t, 1 + k) = toks[k];
    }
    corpus.push_back({"o" + std::to_string(i), x, toks});
  }
  OracleModel model(6);
  BeamConfig cfg;
  cfg.beam_size = 1;
  cfg.max_symbols_per_frame = 5;
  const WerReport rep = eval_wer(model, corpus, cfg);
  EXPECT_EQ(rep.wer, 0.0);
  EXPECT_EQ(rep.rows.size(), corpus.size());
  cfg.beam_size = 3;
  EXPECT_EQ(eval_wer(model, corpus, cfg).wer, 0.0);
}

TEST(EvalWer, UntrainedModelIsPoor) {
  SyntheticTaskSpec spec;
  const Corpus c = gen_domain(spec, 30, "test");
  ModelConfig cfg;
  cfg.vocab_size = Vocab::synthetic(spec.vocab_size).model_vocab_size();
  FactorizedTransducer model(cfg, 4);
  const WerReport rep = eval_wer(model, c.utts, BeamConfig{});
  EXPECT_GT(rep.wer, 60.0);
  EXPECT_EQ(rep.rows.size(), 30u);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    EXPECT_EQ(rep.rows[i].utt_id, c.utts[i].utt_id);
    EXPECT_EQ(rep.rows[i].ref, c.utts[i].tokens);
  }
}

TEST(MetricLog, MonotoneStepsAndJsonLines) {
  MetricLog log;
  MetricRecord r;
  r.step = 3;
  r.phase = "train";
  r.loss = 1.5;
  log.append(r);
  r.step = 2;
  EXPECT_THROW(log.append(r), std::invalid_argument);
  r.step = 3;
  r.wer = 12.5;
  log.append(r);
  const std::string lines = log.jsonl();
  EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 2);
  const auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
  EXPECT_EQ(first["loss"], 1.5);
  EXPECT_FALSE(first.contains("wer"));
}

}  // namespace
}  // namespace ft
