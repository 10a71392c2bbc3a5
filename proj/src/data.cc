// src/data.cc

#include "ft/data.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ft {

namespace {

const std::vector<std::string> kReservedNames = {"<blank>", "<s>", "</s>", "<unk>"};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Container: "<MAGIC> <version>\n<manifest length>\n<manifest><blob>", the blob
// being little-endian IEEE doubles.
std::string encode_blob(std::span<const double> values) {
  std::string out(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) {
      out[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
  return out;
}

std::vector<double> decode_blob(std::string_view bytes) {
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + b]))
              << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

void write_container(const std::string& path, const std::string& magic,
                     nlohmann::json manifest, std::span<const double> blob) {
  const std::string data = encode_blob(blob);
  manifest["blob_values"] = blob.size();
  manifest["checksum"] = hex64(fnv1a(data));
  const std::string text = manifest.dump(1);
  write_file(path, magic + " " + std::to_string(kCheckpointVersion) + "\n" +
                       std::to_string(text.size()) + "\n" + text + data);
}

struct Container {
  nlohmann::json manifest;
  std::vector<double> blob;
};

Container read_container(const std::string& path, const std::string& magic) {
  const std::string bytes = read_file(path);
  const auto corrupt = [&](const std::string& why) {
    return CorruptFileError(path + ": corrupt file (" + why + ")");
  };
  const std::size_t nl1 = bytes.find('\n');
  if (nl1 == std::string::npos) throw corrupt("missing header");
  std::istringstream header(bytes.substr(0, nl1));
  std::string got_magic;
  int version = -1;
  header >> got_magic >> version;
  if (got_magic != magic) throw corrupt("expected " + magic + " header");
  if (version != kCheckpointVersion) {
    throw VersionError(path + ": format version " + std::to_string(version) +
                       ", this build reads version " +
                       std::to_string(kCheckpointVersion));
  }
  const std::size_t nl2 = bytes.find('\n', nl1 + 1);
  if (nl2 == std::string::npos) throw corrupt("missing manifest length");
  std::size_t length = 0;
  try {
    length = std::stoull(bytes.substr(nl1 + 1, nl2 - nl1 - 1));
  } catch (const std::exception&) {
    throw corrupt("bad manifest length");
  }
  if (nl2 + 1 + length > bytes.size()) throw corrupt("truncated manifest");
  Container c;
  try {
    c.manifest = nlohmann::json::parse(bytes.substr(nl2 + 1, length));
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(std::string("manifest: ") + e.what());
  }
  const std::string_view data = std::string_view(bytes).substr(nl2 + 1 + length);
  try {
    if (data.size() != c.manifest.at("blob_values").get<std::size_t>() * 8) {
      throw corrupt("blob size mismatch");
    }
    if (hex64(fnv1a(data)) != c.manifest.at("checksum").get<std::string>()) {
      throw corrupt("checksum mismatch");
    }
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(std::string("manifest: ") + e.what());
  }
  c.blob = decode_blob(data);
  return c;
}

std::size_t sample(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Round-off: fall back to the last entry with mass.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return 0;
}

}  // namespace

Vocab::Vocab(const std::vector<std::string>& words) : tokens_(kReservedNames) {
  for (const auto& w : words) {
    if (w.empty() || w.find_first_of(" \t\r\n") != std::string::npos) {
      throw std::invalid_argument("vocab word must be non-empty without spaces");
    }
    tokens_.push_back(w);
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate vocab entry '" + tokens_[i] + "'");
    }
  }
}

Vocab Vocab::synthetic(std::size_t num_words) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < num_words; ++i) {
    std::ostringstream os;
    os << 'w' << std::setw(2) << std::setfill('0') << i;
    words.push_back(os.str());
  }
  return Vocab(words);
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocab::id(const std::string& word) const {
  const auto it = ids_.find(word);
  if (it == ids_.end() || it->second < kNumReserved) return kUnk;
  return it->second;
}

std::vector<int> tokenize(const Vocab& vocab, const std::string& line) {
  std::istringstream in(line);
  std::vector<int> out;
  for (std::string w; in >> w;) out.push_back(vocab.id(w));
  return out;
}

std::string detokenize(const Vocab& vocab, std::span<const int> ids) {
  std::string out;
  for (int id : ids) {
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

void SyntheticTaskSpec::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("task spec: " + m); };
  if (vocab_size < 2) fail("vocab_size must be >= 2");
  if (feature_dim < 1) fail("feature_dim must be >= 1");
  if (dup_min < 1 || dup_min > dup_max) fail("need 1 <= dup_min <= dup_max");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (!(bigram_temperature > 0.0)) fail("bigram_temperature must be > 0");
  if (min_len < 1 || min_len > max_len) fail("need 1 <= min_len <= max_len");
  if (confusion_group_size < 1) fail("confusion_group_size must be >= 1");
  if (!(confusion_spread >= 0.0)) fail("confusion_spread must be >= 0");
}

nlohmann::json task_spec_json(const SyntheticTaskSpec& s) {
  return {{"vocab_size", s.vocab_size},
          {"feature_dim", s.feature_dim},
          {"dup_min", s.dup_min},
          {"dup_max", s.dup_max},
          {"noise_sigma", s.noise_sigma},
          {"domain_seed", s.domain_seed},
          {"bigram_temperature", s.bigram_temperature},
          {"min_len", s.min_len},
          {"max_len", s.max_len},
          {"acoustic_seed", s.acoustic_seed},
          {"confusion_group_size", s.confusion_group_size},
          {"confusion_spread", s.confusion_spread}};
}

SyntheticTaskSpec parse_task_spec(const std::string& text) {
  SyntheticTaskSpec s;
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    const auto where = "task spec line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw std::invalid_argument(where + "expected key = value");
    auto trim = [](std::string v) {
      const auto a = v.find_first_not_of(" \t\r");
      const auto b = v.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : v.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      auto as_size = [&] {
        if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
        const auto v = std::stoull(value, &used);
        return static_cast<std::size_t>(v);
      };
      auto as_double = [&] { return std::stod(value, &used); };
      if (key == "vocab_size") s.vocab_size = as_size();
      else if (key == "feature_dim") s.feature_dim = as_size();
      else if (key == "dup_min") s.dup_min = as_size();
      else if (key == "dup_max") s.dup_max = as_size();
      else if (key == "noise_sigma") s.noise_sigma = as_double();
      else if (key == "domain_seed") s.domain_seed = as_size();
      else if (key == "bigram_temperature") s.bigram_temperature = as_double();
      else if (key == "min_len") s.min_len = as_size();
      else if (key == "max_len") s.max_len = as_size();
      else if (key == "acoustic_seed") s.acoustic_seed = as_size();
      else if (key == "confusion_group_size") s.confusion_group_size = as_size();
      else if (key == "confusion_spread") s.confusion_spread = as_double();
      else throw std::invalid_argument(where + "unknown key '" + key + "'");
      if (used != value.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::invalid_argument& e) {
      if (std::string(e.what()).starts_with("task spec")) throw;
      throw std::invalid_argument(where + "bad value '" + value + "' for " + key);
    } catch (const std::out_of_range&) {
      throw std::invalid_argument(where + "value out of range for " + key);
    }
  }
  s.validate();
  return s;
}

std::string format_task_spec(const SyntheticTaskSpec& s) {
  std::ostringstream os;
  os << std::setprecision(17);
  const nlohmann::json j = task_spec_json(s);
  for (const auto& [key, value] : j.items()) {
    os << key << " = " << value.dump() << "\n";
  }
  return os.str();
}

SyntheticTaskSpec load_task_spec(const std::string& path) {
  return parse_task_spec(read_file(path));
}

void save_task_spec(const SyntheticTaskSpec& spec, const std::string& path) {
  write_file(path, format_task_spec(spec));
}

DomainModel domain_model(const SyntheticTaskSpec& spec) {
  spec.validate();
  const std::size_t W = spec.vocab_size, d = spec.feature_dim;
  DomainModel m;
  m.vocab = Vocab::synthetic(W);

  Rng text_rng(derive_seed(spec.domain_seed, 11));
  m.bigram = Tensor({W + 1, W});
  for (std::size_t r = 0; r <= W; ++r) {
    auto row = m.bigram.row(r);
    for (double& v : row) v = text_rng.normal() / spec.bigram_temperature;
    // No immediate repeats: a repeated word would be rendered as one longer
    // run of identical frames.
    if (r > 0) row[r - 1] = kNegInf;
    const double lse = logsumexp(row);
    for (double& v : row) v = std::exp(v - lse);
  }

  Rng audio_rng(derive_seed(spec.acoustic_seed, 13));
  const std::size_t groups = (W + spec.confusion_group_size - 1) / spec.confusion_group_size;
  Tensor centers({groups, d});
  for (double& v : centers.data()) v = audio_rng.normal();
  m.embeddings = Tensor({W, d});
  for (std::size_t w = 0; w < W; ++w) {
    const auto center = centers.row(w / spec.confusion_group_size);
    auto row = m.embeddings.row(w);
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = center[j] + spec.confusion_spread * audio_rng.normal();
    }
  }
  return m;
}

double bigram_kl(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("bigram_kl: shape mismatch");
  double total = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto pa = a.row(r), pb = b.row(r);
    for (std::size_t c = 0; c < pa.size(); ++c) {
      if (pa[c] > 0.0) total += pa[c] * (std::log(pa[c]) - std::log(pb[c]));
    }
  }
  return total / static_cast<double>(a.rows());
}

Tensor render_features(const SyntheticTaskSpec& spec, const DomainModel& domain,
                       std::span<const int> tokens, Rng& rng) {
  if (tokens.empty()) throw std::invalid_argument("render_features: empty sequence");
  std::vector<std::size_t> dups;
  std::size_t frames = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    dups.push_back(static_cast<std::size_t>(
        rng.between(static_cast<int>(spec.dup_min), static_cast<int>(spec.dup_max))));
    frames += dups.back();
  }
  const std::size_t d = spec.feature_dim;
  Tensor x({frames, d});
  std::size_t t = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int w = tokens[i] - kNumReserved;
    if (w < 0 || static_cast<std::size_t>(w) >= spec.vocab_size) {
      throw std::invalid_argument("render_features: id " + std::to_string(tokens[i]) +
                                  " is not a content word");
    }
    const auto e = domain.embeddings.row(static_cast<std::size_t>(w));
    for (std::size_t k = 0; k < dups[i]; ++k, ++t) {
      auto row = x.row(t);
      for (std::size_t j = 0; j < d; ++j) {
        row[j] = e[j] + (spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0);
      }
    }
  }
  return x;
}

Corpus gen_domain(const SyntheticTaskSpec& spec, std::size_t n,
                  const std::string& split, bool with_audio) {
  if (n < 1) throw std::invalid_argument("gen_domain: n must be >= 1");
  const DomainModel dom = domain_model(spec);
  const std::uint64_t split_seed = derive_seed(spec.domain_seed, fnv1a(split));
  Rng text_rng(split_seed);
  Rng audio_rng(derive_seed(split_seed, spec.acoustic_seed));
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = static_cast<std::size_t>(
        text_rng.between(static_cast<int>(spec.min_len), static_cast<int>(spec.max_len)));
    std::vector<int> toks;
    std::size_t prev = 0;
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t w = sample(dom.bigram.row(prev), text_rng);
      toks.push_back(static_cast<int>(w) + kNumReserved);
      prev = w + 1;
    }
    if (with_audio) {
      std::ostringstream id;
      id << split << '-' << std::setw(5) << std::setfill('0') << i;
      c.utts.push_back({id.str(), render_features(spec, dom, toks, audio_rng), toks});
    }
    c.text.push_back(std::move(toks));
  }
  return c;
}

TextCorpus references(std::span<const Utterance> utts) {
  TextCorpus out;
  for (const auto& u : utts) out.push_back(u.tokens);
  return out;
}

void write_text(const std::string& path, const Vocab& vocab, const TextCorpus& text) {
  std::string out;
  for (const auto& s : text) out += detokenize(vocab, s) + "\n";
  write_file(path, out);
}

TextCorpus read_text(const std::string& path, const Vocab& vocab) {
  std::istringstream in(read_file(path));
  TextCorpus out;
  for (std::string line; std::getline(in, line);) {
    auto ids = tokenize(vocab, line);
    if (!ids.empty()) out.push_back(std::move(ids));
  }
  return out;
}

void write_feature_archive(const std::string& path, std::span<const Utterance> utts) {
  nlohmann::json index = nlohmann::json::array();
  std::vector<double> blob;
  for (const auto& u : utts) {
    index.push_back({{"utt_id", u.utt_id},
                     {"frames", u.features.rows()},
                     {"dim", u.features.cols()},
                     {"offset", blob.size()},
                     {"tokens", u.tokens}});
    blob.insert(blob.end(), u.features.data().begin(), u.features.data().end());
  }
  write_container(path, "FTFEAT", {{"utterances", index}}, blob);
}

std::vector<Utterance> read_feature_archive(const std::string& path) {
  const Container c = read_container(path, "FTFEAT");
  std::vector<Utterance> out;
  try {
    for (const auto& e : c.manifest.at("utterances")) {
      const auto T = e.at("frames").get<std::size_t>();
      const auto d = e.at("dim").get<std::size_t>();
      const auto off = e.at("offset").get<std::size_t>();
      if (T == 0 || d == 0 || off + T * d > c.blob.size()) {
        throw CorruptFileError(path + ": corrupt file (bad index entry)");
      }
      out.push_back({e.at("utt_id").get<std::string>(),
                     Tensor({T, d}, std::vector<double>(c.blob.begin() + off,
                                                        c.blob.begin() + off + T * d)),
                     e.at("tokens").get<std::vector<int>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path + ": corrupt file (" + e.what() + ")");
  }
  return out;
}

nlohmann::json config_json(const ModelConfig& cfg) {
  return {{"encoder",
           {{"input_dim", cfg.encoder.input_dim},
            {"hidden_dim", cfg.encoder.hidden_dim},
            {"layers", cfg.encoder.layers},
            {"causal", cfg.encoder.causal}}},
          {"vocab_size", cfg.vocab_size},
          {"embed_dim", cfg.embed_dim},
          {"predictor_dim", cfg.predictor_dim},
          {"joint_dim", cfg.joint_dim}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  const auto& e = j.at("encoder");
  cfg.encoder.input_dim = e.at("input_dim").get<std::size_t>();
  cfg.encoder.hidden_dim = e.at("hidden_dim").get<std::size_t>();
  cfg.encoder.layers = e.at("layers").get<std::size_t>();
  cfg.encoder.causal = e.at("causal").get<bool>();
  cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
  cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
  cfg.predictor_dim = j.at("predictor_dim").get<std::size_t>();
  cfg.joint_dim = j.at("joint_dim").get<std::size_t>();
  cfg.validate();
  return cfg;
}

namespace {

void save_params(const std::string& path, ModelKind kind, const ModelConfig& cfg,
                 const Vocab& vocab, const std::vector<const Parameter*>& params) {
  if (vocab.model_vocab_size() != cfg.vocab_size) {
    throw std::invalid_argument("vocab has " + std::to_string(vocab.model_vocab_size()) +
                                " output ids but model expects " +
                                std::to_string(cfg.vocab_size));
  }
  nlohmann::json list = nlohmann::json::array();
  std::vector<double> blob;
  for (const Parameter* p : params) {
    list.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"offset", blob.size()}});
    blob.insert(blob.end(), p->value.data().begin(), p->value.data().end());
  }
  write_container(path, "FTCKPT",
                  {{"kind", to_string(kind)},
                   {"config", config_json(cfg)},
                   {"vocab", vocab.tokens()},
                   {"params", list}},
                  blob);
}

void restore_params(const std::string& path, const Container& c,
                    const std::vector<Parameter*>& params) {
  const auto& list = c.manifest.at("params");
  if (list.size() != params.size()) {
    throw CorruptFileError(path + ": corrupt file (parameter count " +
                           std::to_string(list.size()) + ", expected " +
                           std::to_string(params.size()) + ")");
  }
  std::unordered_map<std::string, const nlohmann::json*> by_name;
  for (const auto& e : list) by_name[e.at("name").get<std::string>()] = &e;
  for (Parameter* p : params) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) {
      throw CorruptFileError(path + ": corrupt file (missing parameter " + p->name + ")");
    }
    const auto shape = it->second->at("shape").get<Shape>();
    const auto off = it->second->at("offset").get<std::size_t>();
    if (shape != p->value.shape() || off + p->value.size() > c.blob.size()) {
      throw CorruptFileError(path + ": corrupt file (parameter " + p->name +
                             " has shape " + shape_string(shape) + ")");
    }
    std::copy_n(c.blob.begin() + static_cast<std::ptrdiff_t>(off), p->value.size(),
                p->value.data().begin());
    p->zero_grad();
  }
}

}  // namespace

void save_checkpoint(const TransducerModel& model, const Vocab& vocab,
                     const std::string& path) {
  save_params(path, model.kind(), model.config(), vocab, model.parameters());
}

void save_checkpoint(const RecurrentLm& lm, const Vocab& vocab, const std::string& path) {
  save_params(path, ModelKind::kLanguageModel, lm.config(), vocab, lm.parameters());
}

Checkpoint load_checkpoint(const std::string& path) {
  const Container c = read_container(path, "FTCKPT");
  Checkpoint ck;
  try {
    ck.kind = parse_model_kind(c.manifest.at("kind").get<std::string>());
    ck.config = config_from_json(c.manifest.at("config"));
    auto tokens = c.manifest.at("vocab").get<std::vector<std::string>>();
    if (tokens.size() < kNumReserved ||
        !std::equal(kReservedNames.begin(), kReservedNames.end(), tokens.begin())) {
      throw CorruptFileError(path + ": corrupt file (bad vocab)");
    }
    ck.vocab = Vocab(std::vector<std::string>(tokens.begin() + kNumReserved, tokens.end()));
    if (ck.vocab.model_vocab_size() != ck.config.vocab_size) {
      throw CorruptFileError(path + ": corrupt file (vocab/config size mismatch)");
    }
    switch (ck.kind) {
      case ModelKind::kStandard:
        ck.transducer = std::make_unique<StandardTransducer>(ck.config, 0);
        restore_params(path, c, ck.transducer->parameters());
        break;
      case ModelKind::kFactorized:
        ck.transducer = std::make_unique<FactorizedTransducer>(ck.config, 0);
        restore_params(path, c, ck.transducer->parameters());
        break;
      case ModelKind::kLanguageModel:
        ck.lm.emplace(ck.config, 0);
        restore_params(path, c, ck.lm->parameters());
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path + ": corrupt file (" + e.what() + ")");
  } catch (const std::invalid_argument& e) {
    throw CorruptFileError(path + ": corrupt file (" + e.what() + ")");
  }
  return ck;
}

Checkpoint load_checkpoint(const std::string& path, ModelKind expected) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.kind != expected) {
    throw KindError(path + ": holds a " + to_string(ck.kind) + " model, expected " +
                    to_string(expected));
  }
  return ck;
}

void swap_vocab_predictor(FactorizedTransducer& model, const Vocab& model_vocab,
                          const RecurrentLm& lm, const Vocab& lm_vocab) {
  if (!(model_vocab == lm_vocab) || lm.vocab_size() != model.vocab_size()) {
    throw std::invalid_argument("swap_vocab_predictor: LM vocabulary (" +
                                std::to_string(lm_vocab.size()) +
                                " entries) differs from the model vocabulary (" +
                                std::to_string(model_vocab.size()) + " entries)");
  }
  const ModelConfig& a = model.config();
  const ModelConfig& b = lm.config();
  if (a.embed_dim != b.embed_dim || a.predictor_dim != b.predictor_dim) {
    throw std::invalid_argument(
        "swap_vocab_predictor: LM embedding/recurrent sizes differ from the model's");
  }
  model.vocab_predictor() = lm;
}

void swap_vocab_predictor(FactorizedTransducer& model, const Vocab& model_vocab,
                          const std::string& lm_checkpoint) {
  const Checkpoint ck = load_checkpoint(lm_checkpoint, ModelKind::kLanguageModel);
  swap_vocab_predictor(model, model_vocab, *ck.lm, ck.vocab);
}

}  // namespace ft
