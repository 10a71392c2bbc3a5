// tools/ft.cc
//
// Command-line entry point. Every command writes its outputs and a
// manifest.json of the resolved settings into the --out run directory.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ft/data.h"
#include "ft/decode.h"
#include "ft/experiment.h"
#include "ft/parallel.h"
#include "ft/trainer.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ft {
namespace {

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_manifest(const fs::path& dir, const std::string& command, json settings) {
  settings["command"] = command;
  write_text_file(dir / "manifest.json", settings.dump(2) + "\n");
}

std::string fmt(double v, int precision = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

// Plain-text table with right-aligned columns.
std::string table(const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      os << (c ? "  " : "") << std::setw(static_cast<int>(width[c])) << r[c];
    }
    os << "\n";
  };
  line(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  os << std::string(total + 2 * (width.size() - 1), '-') << "\n";
  for (const auto& r : rows) line(r);
  return os.str();
}

void emit_report(const fs::path& dir, const std::string& stem, const std::vector<json>& rows,
                 const std::string& rendered) {
  std::string lines;
  for (const auto& r : rows) lines += r.dump() + "\n";
  write_text_file(dir / (stem + ".jsonl"), lines);
  write_text_file(dir / (stem + ".txt"), rendered);
  std::cout << rendered;
}

struct ModelFlags {
  std::size_t hidden = 64, layers = 2, embed = 32, predictor = 64, joint = 64;

  void add(CLI::App* app) {
    app->add_option("--hidden", hidden, "encoder hidden size")->capture_default_str();
    app->add_option("--layers", layers, "encoder layers")->capture_default_str();
    app->add_option("--embed", embed, "predictor embedding size")->capture_default_str();
    app->add_option("--predictor", predictor, "predictor hidden size")->capture_default_str();
    app->add_option("--joint", joint, "joint size")->capture_default_str();
  }
  ModelConfig config(std::size_t input_dim, std::size_t vocab) const {
    ModelConfig m;
    m.encoder.input_dim = input_dim;
    m.encoder.hidden_dim = hidden;
    m.encoder.layers = layers;
    m.vocab_size = vocab;
    m.embed_dim = embed;
    m.predictor_dim = predictor;
    m.joint_dim = joint;
    m.validate();
    return m;
  }
};

struct DecodeFlags {
  std::size_t beam = 4;
  std::size_t max_symbols = 3;
  double fusion_weight = 0.3;
  std::string fusion_lm;
  std::optional<RecurrentLm> lm;

  void add(CLI::App* app) {
    app->add_option("--beam", beam, "beam size (1 = greedy)")->capture_default_str();
    app->add_option("--max-symbols", max_symbols, "labels per frame cap")->capture_default_str();
    app->add_option("--fusion-lm", fusion_lm, "external LM checkpoint for shallow fusion");
    app->add_option("--fusion-weight", fusion_weight, "shallow fusion weight")
        ->capture_default_str();
  }
  BeamConfig resolve(const Vocab& vocab) {
    BeamConfig cfg;
    cfg.beam_size = beam;
    cfg.max_symbols_per_frame = max_symbols;
    if (!fusion_lm.empty()) {
      Checkpoint ck = load_checkpoint(fusion_lm, ModelKind::kLanguageModel);
      if (!(ck.vocab == vocab)) throw std::invalid_argument("fusion LM vocabulary mismatch");
      lm = std::move(*ck.lm);
      cfg.fusion_lm = &*lm;
      cfg.fusion_weight = fusion_weight;
    }
    return cfg;
  }
  json manifest() const {
    return {{"beam", beam},
            {"max_symbols", max_symbols},
            {"fusion_lm", fusion_lm},
            {"fusion_weight", fusion_lm.empty() ? 0.0 : fusion_weight}};
  }
};

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty value list");
  return out;
}

fs::path prepare_out(const std::string& out) {
  fs::create_directories(out);
  return fs::path(out);
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& spec_path, std::uint64_t seed, bool seed_set,
                 const std::string& out, std::size_t n_train, std::size_t n_test,
                 std::size_t n_dev, std::size_t n_adapt, std::size_t n_ppl) {
  SyntheticTaskSpec spec = spec_path.empty() ? SyntheticTaskSpec{} : load_task_spec(spec_path);
  if (seed_set) spec.domain_seed = seed;
  const fs::path dir = prepare_out(out);
  const Vocab vocab = Vocab::synthetic(spec.vocab_size);
  save_task_spec(spec, (dir / "task.cfg").string());
  std::string vocab_text;
  for (const auto& t : vocab.tokens()) vocab_text += t + "\n";
  write_text_file(dir / "vocab.txt", vocab_text);

  std::vector<json> rows;
  std::vector<std::vector<std::string>> cells;
  auto audio = [&](const std::string& split, std::size_t n) {
    if (n == 0) return;
    const Corpus c = gen_domain(spec, n, split);
    write_feature_archive((dir / (split + ".feats")).string(), c.utts);
    write_text((dir / (split + ".txt")).string(), vocab, c.text);
    std::size_t frames = 0;
    for (const auto& u : c.utts) frames += u.features.rows();
    rows.push_back({{"split", split}, {"utterances", n}, {"frames", frames}});
    cells.push_back({split, std::to_string(n), std::to_string(frames)});
  };
  auto text = [&](const std::string& split, std::size_t n) {
    if (n == 0) return;
    write_text((dir / (split + ".txt")).string(), vocab, gen_domain(spec, n, split, false).text);
    rows.push_back({{"split", split}, {"sentences", n}});
    cells.push_back({split, std::to_string(n), "-"});
  };
  audio("train", n_train);
  audio("test", n_test);
  audio("dev", n_dev);
  text("adapt", n_adapt);
  text("ppl", n_ppl);
  write_manifest(dir, "gen-data",
                 {{"spec", task_spec_json(spec)},
                  {"sizes",
                   {{"train", n_train}, {"test", n_test}, {"dev", n_dev},
                    {"adapt", n_adapt}, {"ppl", n_ppl}}}});
  emit_report(dir, "splits", rows, table({"split", "count", "frames"}, cells));
  return 0;
}

std::vector<Utterance> load_feats(const std::string& path) {
  auto utts = read_feature_archive(path);
  if (utts.empty()) throw std::invalid_argument(path + ": no utterances");
  return utts;
}

Vocab load_vocab_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> words;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) words.push_back(line);
  }
  if (words.size() < kNumReserved) throw std::invalid_argument(path + ": too few entries");
  return Vocab(std::vector<std::string>(words.begin() + kNumReserved, words.end()));
}

std::string epoch_table(const MetricLog& log) {
  std::vector<std::vector<std::string>> cells;
  auto cell = [](double v, int p) { return std::isnan(v) ? std::string("-") : fmt(v, p); };
  for (const auto& r : log.records()) {
    cells.push_back({r.phase, std::to_string(r.epoch), std::to_string(r.step),
                     cell(r.loss, 4), cell(r.transducer, 4), cell(r.lm_nll, 4),
                     cell(r.ppl, 2), cell(r.wer, 2)});
  }
  return table({"phase", "epoch", "step", "loss", "transducer", "lm_nll", "ppl", "wer"},
               cells);
}

void emit_log(const fs::path& dir, const MetricLog& log) {
  log.write_jsonl((dir / "metrics.jsonl").string());
  const std::string t = epoch_table(log);
  write_text_file(dir / "metrics.txt", t);
  std::cout << t;
}

int cmd_train(const std::string& kind_name, const std::string& data_dir,
              const std::string& text_path, const std::string& out,
              const TrainConfig& tc, std::uint64_t model_seed, const ModelFlags& mf) {
  const ModelKind kind = parse_model_kind(kind_name);
  const fs::path dir = prepare_out(out);
  const Vocab vocab = load_vocab_file((fs::path(data_dir) / "vocab.txt").string());
  const SyntheticTaskSpec spec = load_task_spec((fs::path(data_dir) / "task.cfg").string());
  const ModelConfig cfg = mf.config(spec.feature_dim, vocab.model_vocab_size());
  json settings = {{"kind", to_string(kind)},
                   {"data", data_dir},
                   {"model", config_json(cfg)},
                   {"model_seed", model_seed},
                   {"lambda", tc.lambda},
                   {"lr", tc.lr},
                   {"epochs", tc.epochs},
                   {"batch_size", tc.batch_size},
                   {"seed", tc.seed},
                   {"grad_clip", tc.grad_clip}};
  MetricLog log;
  if (kind == ModelKind::kLanguageModel) {
    const std::string path =
        text_path.empty() ? (fs::path(data_dir) / "train.txt").string() : text_path;
    settings["text"] = path;
    RecurrentLm lm(cfg, model_seed);
    log = train_lm(lm, read_text(path, vocab), tc);
    save_checkpoint(lm, vocab, (dir / "model.ckpt").string());
  } else {
    const auto utts = load_feats((fs::path(data_dir) / "train.feats").string());
    std::unique_ptr<TransducerModel> model;
    if (kind == ModelKind::kStandard) {
      model = std::make_unique<StandardTransducer>(cfg, model_seed);
    } else {
      model = std::make_unique<FactorizedTransducer>(cfg, model_seed);
    }
    log = train(*model, utts, tc);
    save_checkpoint(*model, vocab, (dir / "model.ckpt").string());
  }
  write_manifest(dir, "train", settings);
  emit_log(dir, log);
  return 0;
}

int cmd_adapt(const std::string& checkpoint, const std::string& text_path,
              const std::string& eval_text, const std::string& eval_feats,
              const std::string& out, const AdaptConfig& ac, DecodeFlags df) {
  const fs::path dir = prepare_out(out);
  Checkpoint ck = load_checkpoint(checkpoint, ModelKind::kFactorized);
  auto& model = static_cast<FactorizedTransducer&>(*ck.transducer);
  const TextCorpus text = read_text(text_path, ck.vocab);
  const TextCorpus dev_text = eval_text.empty() ? TextCorpus{} : read_text(eval_text, ck.vocab);
  const std::vector<Utterance> test =
      eval_feats.empty() ? std::vector<Utterance>{} : load_feats(eval_feats);
  const BeamConfig bc = df.resolve(ck.vocab);
  const MetricLog log = adapt_lm(model, text, ac, [&](MetricRecord& r) {
    if (!dev_text.empty()) r.ppl = eval_ppl(model, dev_text);
    if (!test.empty()) r.wer = eval_wer(model, test, bc).wer;
    save_checkpoint(model, ck.vocab, (dir / ("sweep-" + std::to_string(r.epoch) + ".ckpt")).string());
  });
  save_checkpoint(model, ck.vocab, (dir / "model.ckpt").string());
  write_manifest(dir, "adapt",
                 {{"checkpoint", checkpoint},
                  {"text", text_path},
                  {"eval_text", eval_text},
                  {"eval_feats", eval_feats},
                  {"sweeps", ac.sweeps},
                  {"lr", ac.lr},
                  {"batch_size", ac.batch_size},
                  {"seed", ac.seed},
                  {"grad_clip", ac.grad_clip},
                  {"decode", df.manifest()}});
  emit_log(dir, log);
  return 0;
}

int cmd_decode(const std::string& checkpoint, const std::string& feats,
               const std::string& out, DecodeFlags df, bool score) {
  const fs::path dir = prepare_out(out);
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (!ck.transducer) throw KindError(checkpoint + ": not a transducer checkpoint");
  const auto utts = load_feats(feats);
  const BeamConfig bc = df.resolve(ck.vocab);
  std::vector<Tensor> xs;
  for (const auto& u : utts) xs.push_back(u.features);
  const auto hyps = decode_all(*ck.transducer, xs, bc, worker_threads());
  std::string lines;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    lines += hypothesis_json(utts[i].utt_id, hyps[i]).dump() + "\n";
  }
  write_text_file(dir / "hyps.jsonl", lines);
  json settings = {{"checkpoint", checkpoint}, {"feats", feats}, {"decode", df.manifest()}};
  if (!score) {
    write_manifest(dir, "decode", settings);
    std::cout << "decoded " << utts.size() << " utterances -> " << (dir / "hyps.jsonl").string()
              << "\n";
    return 0;
  }
  std::vector<json> rows;
  std::vector<std::vector<std::string>> cells;
  TextCorpus refs, outs;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const EditCounts e = edit_distance(utts[i].tokens, hyps[i].tokens);
    rows.push_back({{"utt_id", utts[i].utt_id},
                    {"ref", detokenize(ck.vocab, utts[i].tokens)},
                    {"hyp", detokenize(ck.vocab, hyps[i].tokens)},
                    {"subs", e.subs},
                    {"ins", e.ins},
                    {"dels", e.dels}});
    refs.push_back(utts[i].tokens);
    outs.push_back(hyps[i].tokens);
  }
  const double w = wer(refs, outs);
  rows.push_back({{"utt_id", "TOTAL"}, {"wer", w}, {"utterances", utts.size()}});
  cells.push_back({"utterances", std::to_string(utts.size())});
  cells.push_back({"wer", fmt(w)});
  write_manifest(dir, "eval", settings);
  emit_report(dir, "report", rows, table({"metric", "value"}, cells));
  return 0;
}

int cmd_ppl(const std::string& checkpoint, const std::string& text_path, const std::string& out) {
  const fs::path dir = prepare_out(out);
  const Checkpoint ck = load_checkpoint(checkpoint);
  const TextCorpus text = read_text(text_path, ck.vocab);
  double ppl = 0.0;
  if (ck.lm) {
    ppl = eval_ppl(*ck.lm, text);
  } else if (ck.kind == ModelKind::kFactorized) {
    ppl = eval_ppl(static_cast<const FactorizedTransducer&>(*ck.transducer), text);
  } else {
    throw KindError(checkpoint + ": a standard transducer has no separable LM");
  }
  write_manifest(dir, "ppl", {{"checkpoint", checkpoint}, {"text", text_path}});
  emit_report(dir, "ppl", {{{"ppl", ppl}, {"sentences", text.size()}}},
              table({"metric", "value"},
                    {{"sentences", std::to_string(text.size())}, {"ppl", fmt(ppl)}}));
  return 0;
}

int cmd_sweep_lambda(const std::string& values, const std::string& data_dir,
                     const std::string& out, TrainConfig tc, std::uint64_t model_seed,
                     const ModelFlags& mf, DecodeFlags df) {
  const fs::path dir = prepare_out(out);
  const std::vector<double> lambdas = parse_values(values);
  const fs::path data(data_dir);
  const Vocab vocab = load_vocab_file((data / "vocab.txt").string());
  const SyntheticTaskSpec spec = load_task_spec((data / "task.cfg").string());
  const ModelConfig cfg = mf.config(spec.feature_dim, vocab.model_vocab_size());
  const auto train_utts = load_feats((data / "train.feats").string());
  const auto test_utts = load_feats((data / "test.feats").string());
  const TextCorpus ppl_text = read_text((data / "ppl.txt").string(), vocab);
  const BeamConfig bc = df.resolve(vocab);

  std::vector<json> rows;
  std::vector<std::vector<std::string>> cells;
  for (double lambda : lambdas) {
    tc.lambda = lambda;
    FactorizedTransducer model(cfg, model_seed);
    const MetricLog log = train(model, train_utts, tc);
    std::ostringstream name;
    name << "lambda-" << lambda;
    const fs::path sub = dir / name.str();
    fs::create_directories(sub);
    save_checkpoint(model, vocab, (sub / "model.ckpt").string());
    log.write_jsonl((sub / "metrics.jsonl").string());
    const double ppl = eval_ppl(model, ppl_text);
    const double w = eval_wer(model, test_utts, bc).wer;
    rows.push_back({{"lambda", lambda}, {"ppl", ppl}, {"wer", w}});
    cells.push_back({fmt(lambda, 2), fmt(ppl), fmt(w)});
    std::cerr << "lambda " << lambda << ": ppl " << fmt(ppl) << " wer " << fmt(w) << "\n";
  }
  write_manifest(dir, "sweep-lambda",
                 {{"values", lambdas},
                  {"data", data_dir},
                  {"model", config_json(cfg)},
                  {"model_seed", model_seed},
                  {"lr", tc.lr},
                  {"epochs", tc.epochs},
                  {"batch_size", tc.batch_size},
                  {"seed", tc.seed},
                  {"grad_clip", tc.grad_clip},
                  {"decode", df.manifest()}});
  emit_report(dir, "sweep", rows, table({"lambda", "ppl", "wer"}, cells));
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Factorized transducer toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every command");

  std::string out, spec_path, checkpoint, data_dir, text_path, feats, values = "0,0.1,0.2,0.5,1.0";
  std::string eval_text, eval_feats, kind = "factorized";
  std::uint64_t seed = 1, model_seed = 1;
  std::size_t n_train = 2000, n_test = 500, n_dev = 200, n_adapt = 5000, n_ppl = 500;
  TrainConfig tc;
  tc.epochs = 20;
  AdaptConfig ac;
  ModelFlags mf;
  DecodeFlags df;

  auto* gen = app.add_subcommand("gen-data", "generate one synthetic domain");
  gen->add_option("--spec", spec_path, "task spec file (key = value)");
  auto* gen_seed = gen->add_option("--seed", seed, "domain seed (overrides the spec)");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--train", n_train, "training utterances")->capture_default_str();
  gen->add_option("--test", n_test, "test utterances")->capture_default_str();
  gen->add_option("--dev", n_dev, "dev utterances")->capture_default_str();
  gen->add_option("--adapt", n_adapt, "adaptation sentences (text only)")->capture_default_str();
  gen->add_option("--ppl", n_ppl, "held-out LM sentences")->capture_default_str();

  auto add_train_flags = [&](CLI::App* c) {
    c->add_option("--data", data_dir, "gen-data output directory")->required();
    c->add_option("--out", out, "run directory")->required();
    c->add_option("--seed", tc.seed, "data order seed")->capture_default_str();
    c->add_option("--model-seed", model_seed, "initialisation seed")->capture_default_str();
    c->add_option("--lr", tc.lr, "learning rate")->capture_default_str();
    c->add_option("--epochs", tc.epochs, "epochs")->capture_default_str();
    c->add_option("--batch", tc.batch_size, "batch size")->capture_default_str();
    c->add_option("--grad-clip", tc.grad_clip, "global gradient norm cap")->capture_default_str();
    mf.add(c);
  };
  auto* trn = app.add_subcommand("train", "train a transducer or language model");
  add_train_flags(trn);
  trn->add_option("--kind", kind, "standard | factorized | lm")
      ->check(CLI::IsMember({"standard", "factorized", "lm"}))
      ->capture_default_str();
  trn->add_option("--lambda", tc.lambda, "LM loss weight (factorized)")->capture_default_str();
  trn->add_option("--text", text_path, "training text for --kind lm (default DATA/train.txt)");

  auto* adp = app.add_subcommand("adapt", "fine-tune the vocabulary predictor on text");
  adp->add_option("--checkpoint", checkpoint, "factorized checkpoint")->required();
  adp->add_option("--text", text_path, "adaptation text")->required();
  adp->add_option("--eval-text", eval_text, "held-out text for per-sweep PPL");
  adp->add_option("--eval-feats", eval_feats, "feature archive for per-sweep WER");
  adp->add_option("--out", out, "run directory")->required();
  adp->add_option("--sweeps", ac.sweeps, "passes over the text")->capture_default_str();
  adp->add_option("--lr", ac.lr, "learning rate")->capture_default_str();
  adp->add_option("--batch", ac.batch_size, "batch size")->capture_default_str();
  adp->add_option("--seed", ac.seed, "data order seed")->capture_default_str();
  df.add(adp);

  auto* dec = app.add_subcommand("decode", "decode a feature archive");
  auto* evl = app.add_subcommand("eval", "decode and score a feature archive");
  for (auto* c : {dec, evl}) {
    c->add_option("--checkpoint", checkpoint, "transducer checkpoint")->required();
    c->add_option("--feats", feats, "feature archive")->required();
    c->add_option("--out", out, "run directory")->required();
    df.add(c);
  }

  auto* ppl = app.add_subcommand("ppl", "perplexity of an LM or factorized model");
  ppl->add_option("--checkpoint", checkpoint, "factorized or LM checkpoint")->required();
  ppl->add_option("--text", text_path, "text file")->required();
  ppl->add_option("--out", out, "run directory")->required();

  auto* swp = app.add_subcommand("sweep-lambda", "train factorized models over a lambda grid");
  add_train_flags(swp);
  swp->add_option("--values", values, "comma-separated lambdas")->capture_default_str();
  df.add(swp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      return cmd_gen_data(spec_path, seed, gen_seed->count() > 0, out, n_train, n_test, n_dev,
                          n_adapt, n_ppl);
    }
    if (*trn) return cmd_train(kind, data_dir, text_path, out, tc, model_seed, mf);
    if (*adp) return cmd_adapt(checkpoint, text_path, eval_text, eval_feats, out, ac, df);
    if (*dec) return cmd_decode(checkpoint, feats, out, df, false);
    if (*evl) return cmd_decode(checkpoint, feats, out, df, true);
    if (*ppl) return cmd_ppl(checkpoint, text_path, out);
    if (*swp) return cmd_sweep_lambda(values, data_dir, out, tc, model_seed, mf, df);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace ft

int main(int argc, char** argv) { return ft::run(argc, argv); }
