// include/ft/experiment.h
//
// The two-domain experiment shared by the command line and the acceptance
// suite: corpora, model/optimizer defaults, and the composite steps.

#ifndef FT_EXPERIMENT_H_
#define FT_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ft/data.h"
#include "ft/decode.h"
#include "ft/trainer.h"
#include "json.hpp"

namespace ft {

struct ExperimentConfig {
  SyntheticTaskSpec source;  // noise_sigma 0.5, confusion_spread 0.3
  // Target domain = source spec with this domain seed.
  std::uint64_t target_domain_seed = 2;

  std::size_t train_utts = 2000;
  std::size_t test_utts = 500;
  std::size_t dev_utts = 200;
  std::size_t adapt_sentences = 5000;
  std::size_t ppl_sentences = 500;

  std::size_t encoder_hidden = 64;
  std::size_t encoder_layers = 2;
  std::size_t embed_dim = 32;
  std::size_t predictor_dim = 64;
  std::size_t joint_dim = 64;
  std::uint64_t model_seed = 1;

  TrainConfig train;         // lambda is set per run
  AdaptConfig adapt;
  TrainConfig fusion_lm;     // external LM on the adaptation text
  BeamConfig beam;           // decoding for every WER
  std::vector<double> fusion_grid = {0.0, 0.1, 0.2, 0.3, 0.5, 0.8};

  ExperimentConfig();
  SyntheticTaskSpec target() const;
  ModelConfig model_config() const;
};

nlohmann::json experiment_json(const ExperimentConfig& cfg);

struct TaskData {
  Vocab vocab;
  Corpus source_train, source_test;
  TextCorpus source_text;  // held-out LM evaluation text
  TextCorpus target_adapt; // adaptation text, no audio
  Corpus target_test, target_dev;
  TextCorpus target_text;
};

TaskData make_task(const ExperimentConfig& cfg);

struct FusionResult {
  double best_weight = 0.0;
  std::vector<std::pair<double, double>> dev_wer;  // (weight, WER)
  double test_wer = 0.0;
};

// Picks the weight with the lowest dev WER (ties: smaller weight) and scores
// the test set with it.
FusionResult tune_fusion(const TransducerModel& model, const RecurrentLm& lm,
                         std::span<const Utterance> dev,
                         std::span<const Utterance> test,
                         const BeamConfig& base, const std::vector<double>& grid);

}  // namespace ft

#endif  // FT_EXPERIMENT_H_
