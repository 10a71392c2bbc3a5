// include/ft/data.h
//
// Vocabulary, synthetic two-domain task generation, corpus and feature
// archives, checkpoints, and vocabulary-predictor replacement.

#ifndef FT_DATA_H_
#define FT_DATA_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ft/model.h"
#include "ft/rng.h"
#include "ft/tensor.h"
#include "json.hpp"

namespace ft {

// Token ids: 0 blank, 1 <s>, 2 </s>, 3 <unk>, then content words. The model
// output space is ids 1..size()-1.
class Vocab {
 public:
  Vocab() : Vocab(std::vector<std::string>{}) {}
  explicit Vocab(const std::vector<std::string>& words);
  // Words w00, w01, ...
  static Vocab synthetic(std::size_t num_words);

  std::size_t size() const { return tokens_.size(); }
  std::size_t num_words() const { return size() - kNumReserved; }
  std::size_t model_vocab_size() const { return size() - 1; }
  const std::string& token(int id) const;
  // Unknown or reserved strings map to <unk>.
  int id(const std::string& word) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

std::vector<int> tokenize(const Vocab& vocab, const std::string& line);
std::string detokenize(const Vocab& vocab, std::span<const int> ids);

struct Utterance {
  std::string utt_id;
  Tensor features;          // [T x d]
  std::vector<int> tokens;  // reference ids, no reserved ids
};

using TextCorpus = std::vector<std::vector<int>>;

struct SyntheticTaskSpec {
  std::size_t vocab_size = 30;  // content words
  std::size_t feature_dim = 16;
  std::size_t dup_min = 2;
  std::size_t dup_max = 4;
  double noise_sigma = 0.3;
  std::uint64_t domain_seed = 1;
  // Bigram logits are standard normal draws divided by this.
  double bigram_temperature = 0.5;
  std::size_t min_len = 4;
  std::size_t max_len = 10;
  // Shared by every domain of one task, so domains differ only in text.
  std::uint64_t acoustic_seed = 1000;
  // Words are rendered from group centers plus a per-word offset of scale
  // confusion_spread; group members are acoustically confusable.
  std::size_t confusion_group_size = 3;
  double confusion_spread = 0.5;

  void validate() const;
  bool operator==(const SyntheticTaskSpec&) const = default;
};

// key = value lines, '#' comments.
SyntheticTaskSpec parse_task_spec(const std::string& text);
std::string format_task_spec(const SyntheticTaskSpec& spec);
SyntheticTaskSpec load_task_spec(const std::string& path);
void save_task_spec(const SyntheticTaskSpec& spec, const std::string& path);
nlohmann::json task_spec_json(const SyntheticTaskSpec& spec);

// Fixed generative structure of one domain.
struct DomainModel {
  Vocab vocab;
  // Row 0 follows <s>, row i follows word i-1; columns are words. [W+1 x W]
  Tensor bigram;
  // Per-word rendering templates, [W x d].
  Tensor embeddings;
};

DomainModel domain_model(const SyntheticTaskSpec& spec);

// Mean over history rows of KL(a_row || b_row), in nats.
double bigram_kl(const Tensor& a, const Tensor& b);

// Renders a token sequence as frames; deterministic in `rng`.
Tensor render_features(const SyntheticTaskSpec& spec, const DomainModel& domain,
                       std::span<const int> tokens, Rng& rng);

struct Corpus {
  TextCorpus text;
  std::vector<Utterance> utts;  // empty for text-only corpora
};

// Pure function of (spec, n, split).
Corpus gen_domain(const SyntheticTaskSpec& spec, std::size_t n,
                  const std::string& split, bool with_audio = true);

TextCorpus references(std::span<const Utterance> utts);

void write_text(const std::string& path, const Vocab& vocab,
                const TextCorpus& text);
TextCorpus read_text(const std::string& path, const Vocab& vocab);

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CorruptFileError : public FormatError {
 public:
  using FormatError::FormatError;
};
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};
class KindError : public FormatError {
 public:
  using FormatError::FormatError;
};

void write_feature_archive(const std::string& path,
                           std::span<const Utterance> utts);
std::vector<Utterance> read_feature_archive(const std::string& path);

nlohmann::json config_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelKind kind = ModelKind::kStandard;
  ModelConfig config;
  Vocab vocab;
  std::unique_ptr<TransducerModel> transducer;  // standard / factorized
  std::optional<RecurrentLm> lm;                // language model
};

void save_checkpoint(const TransducerModel& model, const Vocab& vocab,
                     const std::string& path);
void save_checkpoint(const RecurrentLm& lm, const Vocab& vocab,
                     const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
// Loads and requires the stored kind to be `expected`.
Checkpoint load_checkpoint(const std::string& path, ModelKind expected);

// Replaces the vocabulary predictor with `lm`. Blank branch and encoder are
// untouched.
void swap_vocab_predictor(FactorizedTransducer& model, const Vocab& model_vocab,
                          const RecurrentLm& lm, const Vocab& lm_vocab);
void swap_vocab_predictor(FactorizedTransducer& model, const Vocab& model_vocab,
                          const std::string& lm_checkpoint);

}  // namespace ft

#endif  // FT_DATA_H_
