// src/trainer.cc

#include "ft/trainer.h"

#include <cmath>
#include <fstream>
#include <numeric>

#include "ft/parallel.h"

namespace ft {

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(grad_clip >= 0.0)) throw std::invalid_argument("grad_clip must be >= 0");
}

void AdaptConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(grad_clip >= 0.0)) throw std::invalid_argument("grad_clip must be >= 0");
}

nlohmann::json metric_json(const MetricRecord& r) {
  nlohmann::json j = {{"step", r.step}, {"phase", r.phase}, {"epoch", r.epoch}};
  auto put = [&](const char* key, double v) {
    if (!std::isnan(v)) j[key] = v;
  };
  put("loss", r.loss);
  put("transducer", r.transducer);
  put("lm_nll", r.lm_nll);
  put("ppl", r.ppl);
  put("wer", r.wer);
  return j;
}

void MetricLog::append(const MetricRecord& r) {
  if (!records_.empty() && r.step < records_.back().step) {
    throw std::invalid_argument("metric log steps must not decrease");
  }
  records_.push_back(r);
}

std::string MetricLog::jsonl() const {
  std::string out;
  for (const auto& r : records_) out += metric_json(r).dump() + "\n";
  return out;
}

void MetricLog::write_jsonl(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << jsonl();
}

Adam::Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Parameter* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
      p.value[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.data()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter* p : params) {
      for (double& g : p->grad.data()) g *= s;
    }
  }
  return norm;
}

namespace {

struct ItemLoss {
  Var total;
  double transducer = MetricRecord::kUnset;
  double lm_nll = MetricRecord::kUnset;
};

struct LoopSpec {
  std::string phase;
  double lr;
  std::size_t epochs;
  std::size_t batch_size;
  std::uint64_t seed;
  double grad_clip;
  std::size_t threads;
};

// Shared minibatch loop. Per-utterance gradients go to private buffers and
// are summed in batch order, so the result does not depend on thread count.
MetricLog run_loop(const std::vector<Parameter*>& params, std::size_t n,
                   const LoopSpec& spec,
                   const std::function<ItemLoss(Tape&, std::size_t)>& loss_fn,
                   const std::function<std::string(std::size_t)>& item_name,
                   const EpochHook& hook, bool hook_before_first) {
  if (n == 0) throw std::invalid_argument(spec.phase + ": empty corpus");
  const std::size_t threads = spec.threads ? spec.threads : worker_threads();
  Adam adam(params, spec.lr);
  Rng rng(derive_seed(spec.seed, 17));
  MetricLog log;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  if (hook_before_first && hook) {
    MetricRecord r;
    r.phase = spec.phase;
    hook(r);
    log.append(r);
  }
  for (std::size_t epoch = 1; epoch <= spec.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double sum_total = 0.0, sum_t = 0.0, sum_lm = 0.0;
    for (std::size_t start = 0; start < n; start += spec.batch_size) {
      const std::size_t b = std::min(spec.batch_size, n - start);
      std::vector<GradBuffer> bufs(b);
      std::vector<ItemLoss> losses(b);
      std::vector<double> totals(b);
      parallel_for(b, threads, [&](std::size_t j) {
        const std::size_t idx = order[start + j];
        const auto fail = [&](const std::string& why) {
          return TrainingError(spec.phase + ": non-finite loss at step " +
                               std::to_string(adam.steps() + 1) + ", item " +
                               item_name(idx) + ": " + why);
        };
        try {
          Tape tape;
          ItemLoss l = loss_fn(tape, idx);
          totals[j] = l.total.value().item();
          if (!std::isfinite(totals[j])) throw fail("loss " + std::to_string(totals[j]));
          tape.backward(l.total, bufs[j]);
          losses[j] = l;
          losses[j].total = Var();
        } catch (const NumericError& e) {
          throw fail(e.what());
        }
      });
      for (Parameter* p : params) p->zero_grad();
      for (std::size_t j = 0; j < b; ++j) {
        bufs[j].flush_into(params);
        sum_total += totals[j];
        sum_t += losses[j].transducer;
        sum_lm += losses[j].lm_nll;
      }
      const double inv = 1.0 / static_cast<double>(b);
      for (Parameter* p : params) {
        for (double& g : p->grad.data()) g *= inv;
      }
      clip_grad_norm(params, spec.grad_clip);
      adam.step();
    }
    MetricRecord r;
    r.step = adam.steps();
    r.phase = spec.phase;
    r.epoch = epoch;
    const double dn = static_cast<double>(n);
    r.loss = sum_total / dn;
    r.transducer = sum_t / dn;
    r.lm_nll = sum_lm / dn;
    if (hook) hook(r);
    log.append(r);
  }
  return log;
}

std::vector<Parameter*> lm_params(RecurrentLm& lm) { return lm.parameters(); }

}  // namespace

MetricLog train(TransducerModel& model, std::span<const Utterance> corpus,
                const TrainConfig& cfg, const EpochHook& hook) {
  cfg.validate();
  for (const auto& u : corpus) {
    for (int tok : u.tokens) {
      if (tok < 1 || static_cast<std::size_t>(tok) > model.vocab_size()) {
        throw std::invalid_argument("train: utterance " + u.utt_id + " has token " +
                                    std::to_string(tok) + " outside the model vocabulary");
      }
    }
  }
  const LoopSpec spec{"train", cfg.lr, cfg.epochs, cfg.batch_size,
                      cfg.seed, cfg.grad_clip, cfg.threads};
  const bool factorized = model.kind() == ModelKind::kFactorized;
  return run_loop(
      model.parameters(), corpus.size(), spec,
      [&](Tape& tape, std::size_t i) {
        const UtteranceLoss l =
            model.loss_on_tape(tape, corpus[i].features, corpus[i].tokens, cfg.lambda);
        return ItemLoss{l.total, l.transducer,
                        factorized ? l.lm_nll : MetricRecord::kUnset};
      },
      [&](std::size_t i) { return corpus[i].utt_id; }, hook, false);
}

MetricLog train_lm(RecurrentLm& lm, const TextCorpus& text, const TrainConfig& cfg,
                   const EpochHook& hook) {
  cfg.validate();
  const LoopSpec spec{"train_lm", cfg.lr, cfg.epochs, cfg.batch_size,
                      cfg.seed, cfg.grad_clip, cfg.threads};
  return run_loop(
      lm_params(lm), text.size(), spec,
      [&](Tape& tape, std::size_t i) {
        const Var nll = lm.nll(tape, text[i]);
        return ItemLoss{nll, MetricRecord::kUnset, nll.value().item()};
      },
      [](std::size_t i) { return "sentence " + std::to_string(i); }, hook, false);
}

MetricLog adapt_lm(FactorizedTransducer& model, const TextCorpus& text,
                   const AdaptConfig& cfg, const EpochHook& hook) {
  cfg.validate();
  RecurrentLm& lm = model.vocab_predictor();
  const LoopSpec spec{"adapt", cfg.lr, cfg.sweeps, cfg.batch_size,
                      cfg.seed, cfg.grad_clip, cfg.threads};
  return run_loop(
      lm_params(lm), text.size(), spec,
      [&](Tape& tape, std::size_t i) {
        const Var nll = lm.nll(tape, text[i]);
        return ItemLoss{nll, MetricRecord::kUnset, nll.value().item()};
      },
      [](std::size_t i) { return "sentence " + std::to_string(i); }, hook, true);
}

double eval_ppl(const RecurrentLm& lm, const TextCorpus& text, std::size_t threads) {
  if (text.empty()) throw std::invalid_argument("eval_ppl: empty corpus");
  std::vector<double> nll(text.size());
  parallel_for(text.size(), threads ? threads : worker_threads(),
               [&](std::size_t i) { nll[i] = lm.nll(text[i]); });
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    total += nll[i];
    count += text[i].size() + 1;
  }
  return std::exp(total / static_cast<double>(count));
}

double eval_ppl(const FactorizedTransducer& model, const TextCorpus& text,
                std::size_t threads) {
  return eval_ppl(model.vocab_predictor(), text, threads);
}

WerReport eval_wer(const TransducerModel& model, std::span<const Utterance> corpus,
                   const BeamConfig& cfg, std::size_t threads) {
  std::vector<Tensor> feats;
  feats.reserve(corpus.size());
  for (const auto& u : corpus) feats.push_back(u.features);
  const auto hyps = decode_all(model, feats, cfg, threads ? threads : worker_threads());
  WerReport rep;
  TextCorpus refs, outs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    rep.rows.push_back({corpus[i].utt_id, corpus[i].tokens, hyps[i].tokens,
                        edit_distance(corpus[i].tokens, hyps[i].tokens), hyps[i].score});
    refs.push_back(corpus[i].tokens);
    outs.push_back(hyps[i].tokens);
  }
  rep.wer = wer(refs, outs);
  return rep;
}

}  // namespace ft
