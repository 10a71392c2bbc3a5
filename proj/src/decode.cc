// src/decode.cc

#include "ft/decode.h"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

#include "ft/parallel.h"

namespace ft {

void BeamConfig::validate(std::size_t vocab_size) const {
  if (beam_size < 1) throw std::invalid_argument("beam_size must be >= 1");
  if (max_symbols_per_frame < 1) {
    throw std::invalid_argument("max_symbols_per_frame must be >= 1");
  }
  if (!(fusion_weight >= 0.0)) {
    throw std::invalid_argument("fusion weight must be >= 0");
  }
  if (fusion_weight > 0.0 && fusion_lm == nullptr) {
    throw std::invalid_argument("fusion weight > 0 requires a fusion LM");
  }
  if (fusion_lm != nullptr && fusion_lm->vocab_size() != vocab_size) {
    throw std::invalid_argument("fusion LM vocabulary size " +
                                std::to_string(fusion_lm->vocab_size()) +
                                " does not match model vocabulary size " +
                                std::to_string(vocab_size));
  }
}

Hypothesis greedy_decode(const TransducerModel& model, const Tensor& features,
                         std::size_t max_symbols_per_frame) {
  if (max_symbols_per_frame < 1) {
    throw std::invalid_argument("max_symbols_per_frame must be >= 1");
  }
  const EncodedInput enc = model.encode_input(features);
  Hypothesis h;
  h.state = model.initial_state();
  for (std::size_t t = 0; t < enc.frames(); ++t) {
    for (std::size_t emitted = 0;; ++emitted) {
      const Tensor row = model.output_row(enc, t, h.state);
      std::size_t best = kBlank;
      for (std::size_t k = 1; k < row.size(); ++k) {
        if (row[k] > row[best]) best = k;
      }
      if (best == kBlank || emitted == max_symbols_per_frame) {
        h.am_score += row[kBlank];
        break;
      }
      h.am_score += row[best];
      h.tokens.push_back(static_cast<int>(best));
      h.state = model.advance(h.state, static_cast<int>(best));
    }
  }
  h.score = h.am_score;
  return h;
}

namespace {

struct Candidate {
  std::size_t parent;
  int token;
  double am, lm, score;
};

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

std::vector<Hypothesis> beam_decode(const TransducerModel& model,
                                    const Tensor& features,
                                    const BeamConfig& cfg) {
  cfg.validate(model.vocab_size());
  const EncodedInput enc = model.encode_input(features);
  const double mu = cfg.fusion_weight;
  const std::size_t V = model.vocab_size();

  Hypothesis start;
  start.state = model.initial_state();
  if (cfg.fusion_lm != nullptr) start.lm_state = cfg.fusion_lm->start();
  std::vector<Hypothesis> beam = {std::move(start)};

  for (std::size_t t = 0; t < enc.frames(); ++t) {
    std::vector<Hypothesis> active = std::move(beam);
    // Hypotheses that have consumed frame t, keyed by token sequence.
    std::vector<Hypothesis> done;
    std::map<std::vector<int>, std::size_t> done_index;

    for (std::size_t step = 0; !active.empty(); ++step) {
      const bool may_emit = step < cfg.max_symbols_per_frame;
      std::vector<Candidate> token_cands;
      for (std::size_t i = 0; i < active.size(); ++i) {
        const Hypothesis& h = active[i];
        const Tensor row = model.output_row(enc, t, h.state);

        Hypothesis ended = h;
        ended.am_score += row[kBlank];
        ended.score = ended.am_score + mu * ended.lm_score;
        auto [it, fresh] = done_index.try_emplace(ended.tokens, done.size());
        if (fresh) {
          done.push_back(std::move(ended));
        } else if (ended.score > done[it->second].score) {
          done[it->second] = std::move(ended);
        }

        if (!may_emit) continue;
        for (std::size_t k = 1; k <= V; ++k) {
          const double lm =
              h.lm_state ? h.lm_score + h.lm_state->log_probs[k - 1] : 0.0;
          const double am = h.am_score + row[k];
          token_cands.push_back({i, static_cast<int>(k), am, lm, am + mu * lm});
        }
      }

      // Joint pruning over finished and extended hypotheses. The stable sort
      // keeps finished ones ahead of extensions on ties, then lower token ids.
      struct Entry {
        double score;
        bool is_done;
        std::size_t index;
      };
      std::vector<Entry> pool;
      for (std::size_t i = 0; i < done.size(); ++i) {
        pool.push_back({done[i].score, true, i});
      }
      for (std::size_t i = 0; i < token_cands.size(); ++i) {
        pool.push_back({token_cands[i].score, false, i});
      }
      std::stable_sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) {
        return a.score > b.score;
      });
      pool.resize(std::min(pool.size(), cfg.beam_size));

      std::vector<Hypothesis> kept_done;
      std::vector<Hypothesis> next_active;
      for (const Entry& e : pool) {
        if (e.is_done) {
          kept_done.push_back(std::move(done[e.index]));
          continue;
        }
        const Candidate& c = token_cands[e.index];
        const Hypothesis& parent = active[c.parent];
        Hypothesis h;
        h.tokens = parent.tokens;
        h.tokens.push_back(c.token);
        h.am_score = c.am;
        h.lm_score = c.lm;
        h.score = c.score;
        h.state = model.advance(parent.state, c.token);
        if (parent.lm_state) h.lm_state = cfg.fusion_lm->advance(*parent.lm_state, c.token);
        next_active.push_back(std::move(h));
      }
      done = std::move(kept_done);
      done_index.clear();
      for (std::size_t i = 0; i < done.size(); ++i) done_index[done[i].tokens] = i;
      active = std::move(next_active);
    }
    beam = std::move(done);
  }
  std::stable_sort(beam.begin(), beam.end(), better);
  return beam;
}

std::vector<Hypothesis> decode_all(const TransducerModel& model,
                                   std::span<const Tensor> features,
                                   const BeamConfig& cfg, std::size_t threads) {
  cfg.validate(model.vocab_size());
  std::vector<Hypothesis> out(features.size());
  const bool greedy = cfg.beam_size == 1 && cfg.fusion_weight == 0.0;
  parallel_for(features.size(), threads, [&](std::size_t i) {
    if (greedy) {
      out[i] = greedy_decode(model, features[i], cfg.max_symbols_per_frame);
    } else {
      out[i] = std::move(beam_decode(model, features[i], cfg).front());
    }
  });
  return out;
}

EditCounts edit_distance(std::span<const int> ref, std::span<const int> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& {
    return d[i * (m + 1) + j];
  };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1] ? 1 : 0);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  EditCounts c;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool differ = ref[i - 1] != hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (differ ? 1 : 0)) {
        if (differ) ++c.subs;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++c.dels;
      --i;
    } else {
      ++c.ins;
      --j;
    }
  }
  return c;
}

double wer(std::span<const std::vector<int>> refs,
           std::span<const std::vector<int>> hyps) {
  if (refs.size() != hyps.size()) {
    throw std::invalid_argument("wer: " + std::to_string(refs.size()) +
                                " references but " + std::to_string(hyps.size()) +
                                " hypotheses");
  }
  std::size_t errors = 0, words = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    errors += edit_distance(refs[i], hyps[i]).errors();
    words += refs[i].size();
  }
  if (words == 0) throw std::invalid_argument("wer: empty reference corpus");
  return 100.0 * static_cast<double>(errors) / static_cast<double>(words);
}

nlohmann::json hypothesis_json(const std::string& utt_id, const Hypothesis& h) {
  return {{"utt_id", utt_id},
          {"tokens", h.tokens},
          {"score", h.score},
          {"breakdown", {{"am", h.am_score}, {"lm", h.lm_score}}}};
}

}  // namespace ft
