// src/experiment.cc

#include "ft/experiment.h"

namespace ft {

ExperimentConfig::ExperimentConfig() {
  source.noise_sigma = 0.5;
  source.confusion_spread = 0.3;
  train.epochs = 20;
  train.lr = 1e-3;
  adapt.sweeps = 4;
  adapt.lr = 1e-4;
  fusion_lm.epochs = 3;
  fusion_lm.lr = 1e-3;
  beam.beam_size = 4;
}

SyntheticTaskSpec ExperimentConfig::target() const {
  SyntheticTaskSpec t = source;
  t.domain_seed = target_domain_seed;
  return t;
}

ModelConfig ExperimentConfig::model_config() const {
  ModelConfig m;
  m.encoder.input_dim = source.feature_dim;
  m.encoder.hidden_dim = encoder_hidden;
  m.encoder.layers = encoder_layers;
  m.vocab_size = Vocab::synthetic(source.vocab_size).model_vocab_size();
  m.embed_dim = embed_dim;
  m.predictor_dim = predictor_dim;
  m.joint_dim = joint_dim;
  m.validate();
  return m;
}

nlohmann::json experiment_json(const ExperimentConfig& c) {
  auto train_json = [](const TrainConfig& t) {
    return nlohmann::json{{"lambda", t.lambda},       {"lr", t.lr},
                          {"epochs", t.epochs},       {"batch_size", t.batch_size},
                          {"seed", t.seed},           {"grad_clip", t.grad_clip}};
  };
  return {{"source", task_spec_json(c.source)},
          {"target_domain_seed", c.target_domain_seed},
          {"train_utts", c.train_utts},
          {"test_utts", c.test_utts},
          {"dev_utts", c.dev_utts},
          {"adapt_sentences", c.adapt_sentences},
          {"ppl_sentences", c.ppl_sentences},
          {"model", config_json(c.model_config())},
          {"model_seed", c.model_seed},
          {"train", train_json(c.train)},
          {"adapt",
           {{"sweeps", c.adapt.sweeps},
            {"lr", c.adapt.lr},
            {"batch_size", c.adapt.batch_size},
            {"seed", c.adapt.seed},
            {"grad_clip", c.adapt.grad_clip}}},
          {"fusion_lm", train_json(c.fusion_lm)},
          {"beam",
           {{"beam_size", c.beam.beam_size},
            {"max_symbols_per_frame", c.beam.max_symbols_per_frame}}},
          {"fusion_grid", c.fusion_grid}};
}

TaskData make_task(const ExperimentConfig& cfg) {
  const SyntheticTaskSpec src = cfg.source, tgt = cfg.target();
  TaskData d;
  d.vocab = Vocab::synthetic(src.vocab_size);
  d.source_train = gen_domain(src, cfg.train_utts, "train");
  d.source_test = gen_domain(src, cfg.test_utts, "test");
  d.source_text = gen_domain(src, cfg.ppl_sentences, "ppl", false).text;
  d.target_adapt = gen_domain(tgt, cfg.adapt_sentences, "adapt", false).text;
  d.target_test = gen_domain(tgt, cfg.test_utts, "test");
  d.target_dev = gen_domain(tgt, cfg.dev_utts, "dev");
  d.target_text = gen_domain(tgt, cfg.ppl_sentences, "ppl", false).text;
  return d;
}

FusionResult tune_fusion(const TransducerModel& model, const RecurrentLm& lm,
                         std::span<const Utterance> dev,
                         std::span<const Utterance> test, const BeamConfig& base,
                         const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("tune_fusion: empty weight grid");
  FusionResult r;
  double best = 0.0;
  bool first = true;
  for (double mu : grid) {
    BeamConfig cfg = base;
    cfg.fusion_weight = mu;
    cfg.fusion_lm = &lm;
    const double w = eval_wer(model, dev, cfg).wer;
    r.dev_wer.emplace_back(mu, w);
    if (first || w < best || (w == best && mu < r.best_weight)) {
      best = w;
      r.best_weight = mu;
      first = false;
    }
  }
  BeamConfig cfg = base;
  cfg.fusion_weight = r.best_weight;
  cfg.fusion_lm = &lm;
  r.test_wer = eval_wer(model, test, cfg).wer;
  return r;
}

}  // namespace ft
