// include/ft/model.h
//
// Standard and factorized transducers.
//
// Standard:    z(t,u)   = W_o relu(f_t + g_u)
// Factorized:  zb(t,u)  = W_b relu(f_t + gb_u)                  (1 logit)
//              zv_t     = W_enc relu(f_t)                       (V logits)
//              zv_u     = log_softmax(W_pred relu(gv_u))        (V logits)
//              row(t,u) = log_softmax([zb(t,u); zv_t + zv_u])
//
// Every affine map carries a bias. The vocabulary branch (gv_u -> zv_u) is a
// RecurrentLm that never sees acoustic input, so it can be evaluated, trained
// and replaced as a standalone language model.

#ifndef FT_MODEL_H_
#define FT_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ft/autodiff.h"
#include "ft/lattice.h"
#include "ft/layers.h"
#include "ft/tensor.h"
#include "ft/tokens.h"

namespace ft {

struct EncoderConfig {
  std::size_t input_dim = 16;
  std::size_t hidden_dim = 64;
  std::size_t layers = 2;
  bool causal = true;

  bool operator==(const EncoderConfig&) const = default;
};

struct ModelConfig {
  EncoderConfig encoder;
  // Non-blank output ids are 1..vocab_size.
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t predictor_dim = 64;
  std::size_t joint_dim = 64;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class ModelKind { kStandard, kFactorized, kLanguageModel };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& s);

// Causal recurrent encoder followed by a projection to the joint dimension.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& cfg, std::size_t joint_dim, Rng& rng);

  // f: [T x joint_dim]
  Tensor forward(const Tensor& features) const;
  Var forward(Tape& tape, const Tensor& features);

  void collect(std::vector<Parameter*>& out);

 private:
  void check_input(const Tensor& features) const;

  std::vector<GruCell> layers_;
  Linear proj_;
};

// Label-history network: embedding followed by one recurrent layer.
class Predictor {
 public:
  Predictor() = default;
  Predictor(const std::string& name, std::size_t num_ids, std::size_t embed_dim,
            std::size_t hidden_dim, Rng& rng);

  // Hidden rows for the input ids, [n x hidden].
  Tensor run(std::span<const int> ids) const;
  Var run(Tape& tape, std::span<const int> ids);
  Tensor step(int id, const Tensor& h) const;
  Tensor zero_state() const { return cell_.zero_state(); }

  std::size_t num_ids() const { return embed_.count(); }
  std::size_t hidden_dim() const { return cell_.hidden_dim(); }
  void collect(std::vector<Parameter*>& out);

 private:
  void check_ids(std::span<const int> ids) const;

  Embedding embed_;
  GruCell cell_;
};

struct LmState {
  Tensor hidden;    // [1 x P]
  Tensor log_probs; // [1 x V]; column k - 1 scores token id k
};

// Recurrent language model over ids 1..V with the end-of-sequence id as a
// predicted token. The factorized transducer's vocabulary predictor.
class RecurrentLm {
 public:
  RecurrentLm() = default;
  RecurrentLm(const ModelConfig& cfg, std::uint64_t seed);

  std::size_t vocab_size() const { return out_.out_dim(); }
  const ModelConfig& config() const { return config_; }

  // Next-token log-distribution after the history, [V].
  Tensor predict(std::span<const int> history) const;
  LmState start() const;
  LmState advance(const LmState& state, int token) const;

  // Log-distributions for every prefix of `tokens`, [(n+1) x V]; row u
  // follows tokens[0..u).
  Tensor prefix_log_probs(std::span<const int> tokens) const;
  Var prefix_log_probs(Tape& tape, std::span<const int> tokens);

  // -log P(tokens, eos).
  double nll(std::span<const int> tokens) const;
  Var nll(Tape& tape, std::span<const int> tokens);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  Tensor head(const Tensor& hidden) const;

  ModelConfig config_;
  Predictor net_;
  Linear out_;
};

// Negative log-likelihood from prefix log-probs, picking each next token and
// the final eos.
Var sequence_nll(Var prefix_log_probs, std::span<const int> tokens);

struct EncodedInput {
  Tensor f;            // [T x J]
  Tensor vocab_scores; // factorized only: zv_t, [T x V]
  std::size_t frames() const { return f.rows(); }
};

// Opaque per-hypothesis predictor state used by the decoders.
struct PredictorState {
  std::vector<Tensor> parts;
};

struct UtteranceLoss {
  Var total;
  double transducer = 0.0;
  double lm_nll = 0.0;
};

class TransducerModel {
 public:
  virtual ~TransducerModel() = default;

  virtual ModelKind kind() const = 0;
  virtual const ModelConfig& config() const = 0;
  std::size_t vocab_size() const { return config().vocab_size; }

  virtual EncodedInput encode_input(const Tensor& features) const = 0;
  virtual PredictorState initial_state() const = 0;
  virtual PredictorState advance(const PredictorState& state, int token) const = 0;
  // Log-distribution over {blank} + vocabulary at frame t, [1 x (V+1)].
  virtual Tensor output_row(const EncodedInput& enc, std::size_t t,
                            const PredictorState& state) const = 0;

  // Teacher-forced lattice for a reference transcript.
  virtual LatticeLogProbs lattice(const Tensor& features,
                                  std::span<const int> targets) const = 0;

  // Per-utterance training objective recorded on `tape`. `lambda` weights the
  // LM term and is ignored by models without one.
  virtual UtteranceLoss loss_on_tape(Tape& tape, const Tensor& features,
                                     std::span<const int> targets,
                                     double lambda) = 0;

  virtual std::vector<Parameter*> parameters() = 0;
  std::vector<const Parameter*> parameters() const;
  void zero_grad();
};

class StandardTransducer : public TransducerModel {
 public:
  StandardTransducer() = default;
  StandardTransducer(const ModelConfig& cfg, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::kStandard; }
  const ModelConfig& config() const override { return config_; }

  EncodedInput encode_input(const Tensor& features) const override;
  PredictorState initial_state() const override;
  PredictorState advance(const PredictorState& state, int token) const override;
  Tensor output_row(const EncodedInput& enc, std::size_t t,
                    const PredictorState& state) const override;
  LatticeLogProbs lattice(const Tensor& features,
                          std::span<const int> targets) const override;
  UtteranceLoss loss_on_tape(Tape& tape, const Tensor& features,
                             std::span<const int> targets,
                             double lambda) override;
  std::vector<Parameter*> parameters() override;
  using TransducerModel::parameters;

  // g: [(U+1) x J] for the history [bos, targets...].
  Tensor predictor_outputs(std::span<const int> targets) const;
  // Output layer applied to every (f_t, g_u) pair.
  LatticeLogProbs joint(const Tensor& f, const Tensor& g,
                        std::span<const int> targets) const;

  Linear& joint_out() { return joint_out_; }

 private:
  ModelConfig config_;
  Encoder encoder_;
  Predictor predictor_;
  Linear pred_proj_;
  Linear joint_out_;
};

class FactorizedTransducer : public TransducerModel {
 public:
  FactorizedTransducer() = default;
  FactorizedTransducer(const ModelConfig& cfg, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::kFactorized; }
  const ModelConfig& config() const override { return config_; }

  EncodedInput encode_input(const Tensor& features) const override;
  PredictorState initial_state() const override;
  PredictorState advance(const PredictorState& state, int token) const override;
  Tensor output_row(const EncodedInput& enc, std::size_t t,
                    const PredictorState& state) const override;
  LatticeLogProbs lattice(const Tensor& features,
                          std::span<const int> targets) const override;
  UtteranceLoss loss_on_tape(Tape& tape, const Tensor& features,
                             std::span<const int> targets,
                             double lambda) override;
  std::vector<Parameter*> parameters() override;
  using TransducerModel::parameters;

  // gb: [(U+1) x J] blank-predictor outputs for [bos, targets...].
  Tensor blank_predictor_outputs(std::span<const int> targets) const;
  // Blank logits for every (t, u) pair, [(T*(U+1)) x 1].
  Tensor blank_logits(const Tensor& f, const Tensor& gb) const;
  LatticeLogProbs joint(const Tensor& f, const Tensor& gb,
                        const Tensor& vocab_rows,
                        std::span<const int> targets) const;

  const RecurrentLm& vocab_predictor() const { return vocab_pred_; }
  RecurrentLm& vocab_predictor() { return vocab_pred_; }
  Linear& encoder_vocab_proj() { return enc_vocab_; }

  // Parameters of the encoder, blank branch and encoder vocabulary
  // projection; untouched by the LM term and by LM adaptation.
  std::vector<Parameter*> acoustic_parameters();

 private:
  ModelConfig config_;
  Encoder encoder_;
  Predictor blank_pred_;
  Linear blank_proj_;
  Linear blank_out_;
  Linear enc_vocab_;
  RecurrentLm vocab_pred_;
};

struct LossBreakdown {
  double total = 0.0;
  double transducer = 0.0;
  double lm_nll = 0.0;
  double lambda = 0.0;
};

// Module-level operations.
Tensor encode(const TransducerModel& model, const Tensor& features);
Tensor predict_vocab(const FactorizedTransducer& model,
                     std::span<const int> history);
LatticeLogProbs joint_standard(const StandardTransducer& model, const Tensor& f,
                               const Tensor& g, std::span<const int> targets);
LatticeLogProbs joint_factorized(const FactorizedTransducer& model,
                                 const Tensor& f, const Tensor& gb,
                                 const Tensor& vocab_rows,
                                 std::span<const int> targets);
LossBreakdown combined_loss(const FactorizedTransducer& model,
                            const Tensor& features, std::span<const int> tokens,
                            double lambda);
double lm_nll(const FactorizedTransducer& model, std::span<const int> tokens);

std::unique_ptr<TransducerModel> clone_model(const TransducerModel& model);

}  // namespace ft

#endif  // FT_MODEL_H_
