// src/model.cc

#include "ft/model.h"

#include <stdexcept>

namespace ft {

void ModelConfig::validate() const {
  if (vocab_size < 2) {
    throw std::invalid_argument("model vocabulary must hold at least 2 ids");
  }
  if (encoder.input_dim == 0 || encoder.hidden_dim == 0 ||
      encoder.layers == 0 || embed_dim == 0 || predictor_dim == 0 ||
      joint_dim == 0) {
    throw std::invalid_argument("model dimensions and layer count must be >= 1");
  }
  if (!encoder.causal) {
    throw std::invalid_argument("only causal encoders are supported");
  }
}

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kStandard:
      return "standard";
    case ModelKind::kFactorized:
      return "factorized";
    case ModelKind::kLanguageModel:
      return "lm";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "standard") return ModelKind::kStandard;
  if (s == "factorized") return ModelKind::kFactorized;
  if (s == "lm") return ModelKind::kLanguageModel;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

// ---------------------------------------------------------------------------
// Encoder

Encoder::Encoder(const EncoderConfig& cfg, std::size_t joint_dim, Rng& rng) {
  std::size_t in = cfg.input_dim;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    layers_.emplace_back("encoder.rnn" + std::to_string(l), in, cfg.hidden_dim,
                         rng);
    in = cfg.hidden_dim;
  }
  proj_ = Linear("encoder.proj", cfg.hidden_dim, joint_dim, rng);
}

void Encoder::check_input(const Tensor& features) const {
  if (features.rank() != 2 || features.cols() != layers_.front().input_dim()) {
    throw DimensionError("encoder expects [T x " +
                         std::to_string(layers_.front().input_dim()) +
                         "] features, got " + shape_string(features.shape()));
  }
}

Tensor Encoder::forward(const Tensor& features) const {
  check_input(features);
  Tensor h = features;
  for (const GruCell& layer : layers_) h = layer.run(h);
  return proj_.forward(h);
}

Var Encoder::forward(Tape& tape, const Tensor& features) {
  check_input(features);
  Var h = tape.constant(features);
  for (GruCell& layer : layers_) h = layer.run(tape, layer.bind(tape), h);
  return Linear::forward(proj_.bind(tape), h);
}

void Encoder::collect(std::vector<Parameter*>& out) {
  for (GruCell& layer : layers_) layer.collect(out);
  proj_.collect(out);
}

// ---------------------------------------------------------------------------
// Predictor

Predictor::Predictor(const std::string& name, std::size_t num_ids,
                     std::size_t embed_dim, std::size_t hidden_dim, Rng& rng)
    : embed_(name + ".embed", num_ids, embed_dim, rng),
      cell_(name + ".rnn", embed_dim, hidden_dim, rng) {}

void Predictor::check_ids(std::span<const int> ids) const {
  for (int id : ids) {
    if (id <= kBlank || static_cast<std::size_t>(id) >= num_ids()) {
      throw std::invalid_argument("token id " + std::to_string(id) +
                                  " is not a valid label history id");
    }
  }
}

Tensor Predictor::run(std::span<const int> ids) const {
  check_ids(ids);
  return cell_.run(embed_.lookup(ids));
}

Var Predictor::run(Tape& tape, std::span<const int> ids) {
  check_ids(ids);
  const Var x = embed_.lookup(tape, ids);
  return cell_.run(tape, cell_.bind(tape), x);
}

Tensor Predictor::step(int id, const Tensor& h) const {
  const int ids[] = {id};
  check_ids(ids);
  return cell_.step(embed_.lookup(ids), h);
}

void Predictor::collect(std::vector<Parameter*>& out) {
  embed_.collect(out);
  cell_.collect(out);
}

namespace {

std::vector<int> with_bos(std::span<const int> tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 1);
  ids.push_back(kBos);
  ids.insert(ids.end(), tokens.begin(), tokens.end());
  return ids;
}

void check_targets(std::span<const int> targets, std::size_t vocab_size) {
  for (int y : targets) {
    if (y <= kBlank || static_cast<std::size_t>(y) > vocab_size) {
      throw std::invalid_argument("target id " + std::to_string(y) +
                                  " outside [1, " + std::to_string(vocab_size) +
                                  "]");
    }
  }
}

std::vector<const Parameter*> to_const(const std::vector<Parameter*>& ps) {
  return {ps.begin(), ps.end()};
}

}  // namespace

// ---------------------------------------------------------------------------
// RecurrentLm

RecurrentLm::RecurrentLm(const ModelConfig& cfg, std::uint64_t seed)
    : config_(cfg) {
  cfg.validate();
  Rng rng(derive_seed(seed, 7));
  net_ = Predictor("lm", cfg.vocab_size + 1, cfg.embed_dim, cfg.predictor_dim,
                   rng);
  out_ = Linear("lm.out", cfg.predictor_dim, cfg.vocab_size, rng);
}

Tensor RecurrentLm::head(const Tensor& hidden) const {
  return log_softmax(out_.forward(relu(hidden)));
}

Tensor RecurrentLm::predict(std::span<const int> history) const {
  const Tensor all = prefix_log_probs(history);
  return take_row(all, all.rows() - 1).reshaped({vocab_size()});
}

LmState RecurrentLm::start() const {
  Tensor h = net_.step(kBos, net_.zero_state());
  Tensor lp = head(h);
  return {std::move(h), std::move(lp)};
}

LmState RecurrentLm::advance(const LmState& state, int token) const {
  Tensor h = net_.step(token, state.hidden);
  Tensor lp = head(h);
  return {std::move(h), std::move(lp)};
}

Tensor RecurrentLm::prefix_log_probs(std::span<const int> tokens) const {
  check_targets(tokens, vocab_size());
  return head(net_.run(with_bos(tokens)));
}

Var RecurrentLm::prefix_log_probs(Tape& tape, std::span<const int> tokens) {
  check_targets(tokens, vocab_size());
  const Var h = net_.run(tape, with_bos(tokens));
  return log_softmax(Linear::forward(out_.bind(tape), relu(h)));
}

double RecurrentLm::nll(std::span<const int> tokens) const {
  const Tensor lp = prefix_log_probs(tokens);
  double s = 0.0;
  for (std::size_t u = 0; u < tokens.size(); ++u) {
    s += lp.at(u, static_cast<std::size_t>(tokens[u] - 1));
  }
  s += lp.at(tokens.size(), kEos - 1);
  return -s;
}

Var RecurrentLm::nll(Tape& tape, std::span<const int> tokens) {
  return sequence_nll(prefix_log_probs(tape, tokens), tokens);
}

std::vector<Parameter*> RecurrentLm::parameters() {
  std::vector<Parameter*> out;
  net_.collect(out);
  out_.collect(out);
  return out;
}

std::vector<const Parameter*> RecurrentLm::parameters() const {
  return to_const(const_cast<RecurrentLm*>(this)->parameters());
}

Var sequence_nll(Var prefix_log_probs, std::span<const int> tokens) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  cells.reserve(tokens.size() + 1);
  for (std::size_t u = 0; u < tokens.size(); ++u) {
    cells.emplace_back(u, static_cast<std::size_t>(tokens[u] - 1));
  }
  cells.emplace_back(tokens.size(), static_cast<std::size_t>(kEos - 1));
  return scale(pick_sum(prefix_log_probs, cells), -1.0);
}

// ---------------------------------------------------------------------------
// TransducerModel

std::vector<const Parameter*> TransducerModel::parameters() const {
  return to_const(const_cast<TransducerModel*>(this)->parameters());
}

void TransducerModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

// ---------------------------------------------------------------------------
// StandardTransducer

StandardTransducer::StandardTransducer(const ModelConfig& cfg,
                                       std::uint64_t seed)
    : config_(cfg) {
  cfg.validate();
  Rng rng(derive_seed(seed, 1));
  encoder_ = Encoder(cfg.encoder, cfg.joint_dim, rng);
  predictor_ = Predictor("predictor", cfg.vocab_size + 1, cfg.embed_dim,
                         cfg.predictor_dim, rng);
  pred_proj_ = Linear("predictor.proj", cfg.predictor_dim, cfg.joint_dim, rng);
  joint_out_ = Linear("joint.out", cfg.joint_dim, cfg.vocab_size + 1, rng);
}

EncodedInput StandardTransducer::encode_input(const Tensor& features) const {
  return {encoder_.forward(features), Tensor()};
}

PredictorState StandardTransducer::initial_state() const {
  Tensor h = predictor_.step(kBos, predictor_.zero_state());
  Tensor g = pred_proj_.forward(h);
  return {{std::move(h), std::move(g)}};
}

PredictorState StandardTransducer::advance(const PredictorState& state,
                                           int token) const {
  Tensor h = predictor_.step(token, state.parts.at(0));
  Tensor g = pred_proj_.forward(h);
  return {{std::move(h), std::move(g)}};
}

Tensor StandardTransducer::output_row(const EncodedInput& enc, std::size_t t,
                                      const PredictorState& state) const {
  const Tensor& g = state.parts.at(1);
  return log_softmax(joint_out_.forward(relu(add(take_row(enc.f, t), g))));
}

Tensor StandardTransducer::predictor_outputs(std::span<const int> targets) const {
  check_targets(targets, config_.vocab_size);
  return pred_proj_.forward(predictor_.run(with_bos(targets)));
}

LatticeLogProbs StandardTransducer::joint(const Tensor& f, const Tensor& g,
                                          std::span<const int> targets) const {
  if (f.rank() != 2 || g.rank() != 2 || f.cols() != config_.joint_dim ||
      g.cols() != config_.joint_dim || g.rows() != targets.size() + 1) {
    throw DimensionError("joint_standard: f " + shape_string(f.shape()) +
                         " and g " + shape_string(g.shape()) + " for " +
                         std::to_string(targets.size()) + " targets");
  }
  const Tensor lp = log_softmax(joint_out_.forward(relu(pair_add(f, g))));
  return LatticeLogProbs(
      lp.reshaped({f.rows(), g.rows(), config_.vocab_size + 1}),
      std::vector<int>(targets.begin(), targets.end()));
}

LatticeLogProbs StandardTransducer::lattice(const Tensor& features,
                                            std::span<const int> targets) const {
  return joint(encoder_.forward(features), predictor_outputs(targets), targets);
}

UtteranceLoss StandardTransducer::loss_on_tape(Tape& tape,
                                               const Tensor& features,
                                               std::span<const int> targets,
                                               double /*lambda*/) {
  check_targets(targets, config_.vocab_size);
  const Var f = encoder_.forward(tape, features);
  const Var g = Linear::forward(pred_proj_.bind(tape),
                                predictor_.run(tape, with_bos(targets)));
  const Var lp = log_softmax(
      Linear::forward(joint_out_.bind(tape), relu(pair_add(f, g))));
  const Var loss = transducer_loss(lp, targets, features.rows());
  return {loss, loss.value().item(), 0.0};
}

std::vector<Parameter*> StandardTransducer::parameters() {
  std::vector<Parameter*> out;
  encoder_.collect(out);
  predictor_.collect(out);
  pred_proj_.collect(out);
  joint_out_.collect(out);
  return out;
}

// ---------------------------------------------------------------------------
// FactorizedTransducer

FactorizedTransducer::FactorizedTransducer(const ModelConfig& cfg,
                                           std::uint64_t seed)
    : config_(cfg) {
  cfg.validate();
  Rng rng(derive_seed(seed, 2));
  encoder_ = Encoder(cfg.encoder, cfg.joint_dim, rng);
  blank_pred_ = Predictor("blank_predictor", cfg.vocab_size + 1, cfg.embed_dim,
                          cfg.predictor_dim, rng);
  blank_proj_ =
      Linear("blank_predictor.proj", cfg.predictor_dim, cfg.joint_dim, rng);
  blank_out_ = Linear("joint.blank_out", cfg.joint_dim, 1, rng);
  enc_vocab_ = Linear("joint.encoder_vocab", cfg.joint_dim, cfg.vocab_size, rng);
  vocab_pred_ = RecurrentLm(cfg, derive_seed(seed, 3));
}

EncodedInput FactorizedTransducer::encode_input(const Tensor& features) const {
  Tensor f = encoder_.forward(features);
  Tensor zv = enc_vocab_.forward(relu(f));
  return {std::move(f), std::move(zv)};
}

PredictorState FactorizedTransducer::initial_state() const {
  Tensor hb = blank_pred_.step(kBos, blank_pred_.zero_state());
  Tensor gb = blank_proj_.forward(hb);
  LmState lm = vocab_pred_.start();
  return {{std::move(hb), std::move(gb), std::move(lm.hidden),
           std::move(lm.log_probs)}};
}

PredictorState FactorizedTransducer::advance(const PredictorState& state,
                                             int token) const {
  Tensor hb = blank_pred_.step(token, state.parts.at(0));
  Tensor gb = blank_proj_.forward(hb);
  LmState lm = vocab_pred_.advance({state.parts.at(2), state.parts.at(3)}, token);
  return {{std::move(hb), std::move(gb), std::move(lm.hidden),
           std::move(lm.log_probs)}};
}

Tensor FactorizedTransducer::output_row(const EncodedInput& enc, std::size_t t,
                                        const PredictorState& state) const {
  const Tensor zb =
      blank_out_.forward(relu(add(take_row(enc.f, t), state.parts.at(1))));
  const Tensor zv = add(take_row(enc.vocab_scores, t), state.parts.at(3));
  return log_softmax(concat_cols(zb, zv));
}

Tensor FactorizedTransducer::blank_predictor_outputs(
    std::span<const int> targets) const {
  check_targets(targets, config_.vocab_size);
  return blank_proj_.forward(blank_pred_.run(with_bos(targets)));
}

Tensor FactorizedTransducer::blank_logits(const Tensor& f,
                                          const Tensor& gb) const {
  return blank_out_.forward(relu(pair_add(f, gb)));
}

LatticeLogProbs FactorizedTransducer::joint(const Tensor& f, const Tensor& gb,
                                            const Tensor& vocab_rows,
                                            std::span<const int> targets) const {
  const std::size_t U1 = targets.size() + 1;
  if (f.rank() != 2 || gb.rank() != 2 || f.cols() != config_.joint_dim ||
      gb.cols() != config_.joint_dim || gb.rows() != U1 ||
      vocab_rows.rows() != U1 || vocab_rows.cols() != config_.vocab_size) {
    throw DimensionError("joint_factorized: f " + shape_string(f.shape()) +
                         ", gb " + shape_string(gb.shape()) + ", vocab rows " +
                         shape_string(vocab_rows.shape()) + " for " +
                         std::to_string(targets.size()) + " targets");
  }
  const Tensor zb = blank_logits(f, gb);
  const Tensor zv = pair_add(enc_vocab_.forward(relu(f)), vocab_rows);
  const Tensor lp = log_softmax(concat_cols(zb, zv));
  return LatticeLogProbs(lp.reshaped({f.rows(), U1, config_.vocab_size + 1}),
                         std::vector<int>(targets.begin(), targets.end()));
}

LatticeLogProbs FactorizedTransducer::lattice(
    const Tensor& features, std::span<const int> targets) const {
  return joint(encoder_.forward(features), blank_predictor_outputs(targets),
               vocab_pred_.prefix_log_probs(targets), targets);
}

UtteranceLoss FactorizedTransducer::loss_on_tape(Tape& tape,
                                                 const Tensor& features,
                                                 std::span<const int> targets,
                                                 double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  check_targets(targets, config_.vocab_size);
  const Var f = encoder_.forward(tape, features);
  const Var gb = Linear::forward(blank_proj_.bind(tape),
                                 blank_pred_.run(tape, with_bos(targets)));
  const Var zb = Linear::forward(blank_out_.bind(tape), relu(pair_add(f, gb)));
  const Var zv_t = Linear::forward(enc_vocab_.bind(tape), relu(f));
  const Var zv_u = vocab_pred_.prefix_log_probs(tape, targets);
  const Var lp = log_softmax(concat_cols(zb, pair_add(zv_t, zv_u)));
  const Var jt = transducer_loss(lp, targets, features.rows());
  const Var nll = sequence_nll(zv_u, targets);
  const Var total = add(jt, scale(nll, lambda));
  return {total, jt.value().item(), nll.value().item()};
}

std::vector<Parameter*> FactorizedTransducer::acoustic_parameters() {
  std::vector<Parameter*> out;
  encoder_.collect(out);
  blank_pred_.collect(out);
  blank_proj_.collect(out);
  blank_out_.collect(out);
  enc_vocab_.collect(out);
  return out;
}

std::vector<Parameter*> FactorizedTransducer::parameters() {
  std::vector<Parameter*> out = acoustic_parameters();
  for (Parameter* p : vocab_pred_.parameters()) out.push_back(p);
  return out;
}

// ---------------------------------------------------------------------------
// Module-level operations

Tensor encode(const TransducerModel& model, const Tensor& features) {
  return model.encode_input(features).f;
}

Tensor predict_vocab(const FactorizedTransducer& model,
                     std::span<const int> history) {
  return model.vocab_predictor().predict(history);
}

LatticeLogProbs joint_standard(const StandardTransducer& model, const Tensor& f,
                               const Tensor& g, std::span<const int> targets) {
  return model.joint(f, g, targets);
}

LatticeLogProbs joint_factorized(const FactorizedTransducer& model,
                                 const Tensor& f, const Tensor& gb,
                                 const Tensor& vocab_rows,
                                 std::span<const int> targets) {
  return model.joint(f, gb, vocab_rows, targets);
}

LossBreakdown combined_loss(const FactorizedTransducer& model,
                            const Tensor& features, std::span<const int> tokens,
                            double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  LossBreakdown out;
  out.lambda = lambda;
  out.transducer = transducer_loss(model.lattice(features, tokens));
  out.lm_nll = model.vocab_predictor().nll(tokens);
  out.total = out.transducer + lambda * out.lm_nll;
  return out;
}

double lm_nll(const FactorizedTransducer& model, std::span<const int> tokens) {
  return model.vocab_predictor().nll(tokens);
}

std::unique_ptr<TransducerModel> clone_model(const TransducerModel& model) {
  switch (model.kind()) {
    case ModelKind::kStandard:
      return std::make_unique<StandardTransducer>(
          static_cast<const StandardTransducer&>(model));
    case ModelKind::kFactorized:
      return std::make_unique<FactorizedTransducer>(
          static_cast<const FactorizedTransducer&>(model));
    case ModelKind::kLanguageModel:
      break;
  }
  throw std::invalid_argument("cannot clone model of this kind");
}

}  // namespace ft
