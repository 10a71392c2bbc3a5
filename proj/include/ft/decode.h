// include/ft/decode.h
//
// Greedy and frame-synchronous beam decoding, shallow fusion with an external
// language model, and token error scoring.

#ifndef FT_DECODE_H_
#define FT_DECODE_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ft/model.h"
#include "json.hpp"

namespace ft {

struct Hypothesis {
  std::vector<int> tokens;
  // score = am_score + fusion_weight * lm_score
  double score = 0.0;
  double am_score = 0.0;
  double lm_score = 0.0;
  PredictorState state;
  std::optional<LmState> lm_state;
};

struct BeamConfig {
  std::size_t beam_size = 4;
  std::size_t max_symbols_per_frame = 3;
  double fusion_weight = 0.0;
  const RecurrentLm* fusion_lm = nullptr;

  void validate(std::size_t vocab_size) const;
};

Hypothesis greedy_decode(const TransducerModel& model, const Tensor& features,
                         std::size_t max_symbols_per_frame = 3);

// Hypotheses ranked best first, at most beam_size of them.
std::vector<Hypothesis> beam_decode(const TransducerModel& model,
                                    const Tensor& features,
                                    const BeamConfig& cfg);

// Decodes every input with `threads` workers; result i belongs to input i.
// beam_size 1 without fusion uses the greedy decoder.
std::vector<Hypothesis> decode_all(const TransducerModel& model,
                                   std::span<const Tensor> features,
                                   const BeamConfig& cfg, std::size_t threads);

struct EditCounts {
  std::size_t subs = 0;
  std::size_t ins = 0;
  std::size_t dels = 0;

  std::size_t errors() const { return subs + ins + dels; }
  bool operator==(const EditCounts&) const = default;
};

// Unit-cost Levenshtein alignment. On equal cost, a substitution or match is
// preferred over a deletion, and a deletion over an insertion.
EditCounts edit_distance(std::span<const int> ref, std::span<const int> hyp);

// Corpus-pooled error rate in percent.
double wer(std::span<const std::vector<int>> refs,
           std::span<const std::vector<int>> hyps);

nlohmann::json hypothesis_json(const std::string& utt_id, const Hypothesis& h);

}  // namespace ft

#endif  // FT_DECODE_H_
