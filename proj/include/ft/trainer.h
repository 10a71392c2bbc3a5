// include/ft/trainer.h
//
// Training from scratch, text-only adaptation of the vocabulary predictor,
// and perplexity / error-rate evaluation.

#ifndef FT_TRAINER_H_
#define FT_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ft/data.h"
#include "ft/decode.h"
#include "ft/model.h"
#include "json.hpp"

namespace ft {

struct TrainConfig {
  double lambda = 0.5;
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  double grad_clip = 5.0;  // global norm; 0 disables
  std::size_t threads = 0; // 0: worker_threads()

  void validate() const;
};

struct AdaptConfig {
  std::size_t sweeps = 4;
  double lr = 1e-4;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  double grad_clip = 5.0;
  std::size_t threads = 0;

  void validate() const;
};

struct MetricRecord {
  static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

  std::size_t step = 0;  // optimizer updates so far
  std::string phase;     // "train", "adapt", ...
  std::size_t epoch = 0;
  double loss = kUnset;
  double transducer = kUnset;
  double lm_nll = kUnset;
  double ppl = kUnset;
  double wer = kUnset;
};

class MetricLog {
 public:
  // Steps must not decrease.
  void append(const MetricRecord& r);
  const std::vector<MetricRecord>& records() const { return records_; }
  const MetricRecord& back() const { return records_.back(); }
  bool empty() const { return records_.empty(); }

  std::string jsonl() const;
  void write_jsonl(const std::string& path) const;

 private:
  std::vector<MetricRecord> records_;
};

nlohmann::json metric_json(const MetricRecord& r);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);
  // Applies one update from each parameter's grad field.
  void step();
  std::size_t steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

// Scales all gradients so their global L2 norm is at most max_norm; returns
// the norm before scaling.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

// Called after each epoch (or sweep) with the record about to be logged, so
// the caller can fill in evaluation metrics.
using EpochHook = std::function<void(MetricRecord&)>;

// Minimises the mean per-utterance objective (transducer loss plus
// lambda * LM NLL for factorized models) over minibatches.
MetricLog train(TransducerModel& model, std::span<const Utterance> corpus,
                const TrainConfig& cfg, const EpochHook& hook = {});

// Maximum-likelihood training of a standalone LM; lambda is ignored.
MetricLog train_lm(RecurrentLm& lm, const TextCorpus& text, const TrainConfig& cfg,
                   const EpochHook& hook = {});

// Fine-tunes only the vocabulary predictor on text. The hook also runs once
// before the first sweep with epoch 0.
MetricLog adapt_lm(FactorizedTransducer& model, const TextCorpus& text,
                   const AdaptConfig& cfg, const EpochHook& hook = {});

// exp(total NLL / predicted tokens), end of sequence included.
double eval_ppl(const RecurrentLm& lm, const TextCorpus& text, std::size_t threads = 0);
double eval_ppl(const FactorizedTransducer& model, const TextCorpus& text,
                std::size_t threads = 0);

struct WerRow {
  std::string utt_id;
  std::vector<int> ref, hyp;
  EditCounts edits;
  double score = 0.0;
};

struct WerReport {
  double wer = 0.0;
  std::vector<WerRow> rows;
};

WerReport eval_wer(const TransducerModel& model, std::span<const Utterance> corpus,
                   const BeamConfig& cfg, std::size_t threads = 0);

}  // namespace ft

#endif  // FT_TRAINER_H_
