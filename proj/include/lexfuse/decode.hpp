#pragma once

#include "lexfuse/bpe.hpp"
#include "lexfuse/fusion.hpp"
#include "lexfuse/model.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace lexfuse {

struct DecodeOptions {
  int beam = 1;
  int max_steps = -1;  // default cap: 2 * source length + 5
};

struct TraceStep {
  std::string token;
  char provenance = ExtendedDistribution::kNeural;
  double p_gen = std::numeric_limits<double>::quiet_NaN();
  int attended = -1;  // gate's argmax source position, -1 when neural
  double prenorm = 1.0;
};

struct SentenceTranslation {
  TokenSeq tokens;
  std::vector<TraceStep> trace;               // one per emitted token
  std::vector<std::vector<double>> alphas;    // one per emitted token
  double logp = 0.0;
  int steps = 0;  // accumulated log-probability terms, EOS included

  double score() const {
    return steps > 0 ? logp / steps : -std::numeric_limits<double>::infinity();
  }
};

namespace detail {

struct Choice {
  int slot = -1;
  std::string token;
  char provenance = ExtendedDistribution::kNeural;
  double step_logp = 0.0;
  int attended = -1;
};

// Full policy ordering over every emissible slot. Choice 0 is the greedy
// pick; a beam of one therefore reproduces greedy decoding exactly, and a
// beam covering every choice searches exhaustively.
inline std::vector<Choice> ranked_choices(Tape& t, Variant variant, const FusionStepState& step,
                                          const ExtendedDistribution& d, const TokenSeq& source,
                                          const BilingualLexicon& lex, const Vocab& tgt,
                                          double threshold, bool soft_gate) {
  const Tensor& probs = t.value(d.probs);
  const Tensor& p_dec = t.value(step.p_dec);
  const int vocab = tgt.size();
  const int total = d.size();

  std::vector<Choice> ranked;
  ranked.reserve(static_cast<std::size_t>(total));
  std::vector<char> offered(static_cast<std::size_t>(total), 0);
  auto offer = [&](int slot, char provenance, int attended) {
    if (slot < 0 || slot == Vocab::kPad || slot == Vocab::kBos) return;
    if (offered[static_cast<std::size_t>(slot)]) return;
    offered[static_cast<std::size_t>(slot)] = 1;
    const double p = std::max(probs[static_cast<std::size_t>(slot)], kLogFloor);
    ranked.push_back({slot, d.token_at(slot), provenance, std::log(p), attended});
  };

  auto by_prob = [&](const std::vector<double>& v, int begin, int end) {
    std::vector<int> order;
    for (int s = begin; s < end; ++s) order.push_back(s);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double pa = v[static_cast<std::size_t>(a)], pb = v[static_cast<std::size_t>(b)];
      if (pa != pb) return pa > pb;
      return a < b;
    });
    return order;
  };

  const bool gated = step.has_p_gen && !soft_gate;
  const double p_gen = step.has_p_gen ? t.scalar_value(step.p_gen) : 1.0;

  if (!gated) {
    // No gate (baseline family) or soft gating: rank by the mixed distribution.
    std::vector<double> ext(probs.data.begin(), probs.data.end());
    for (int s : by_prob(ext, 0, total)) offer(s, d.provenance_at(s), -1);
    return ranked;
  }

  const std::vector<double> alpha(t.value(step.alpha).data.begin(),
                                  t.value(step.alpha).data.end());
  if (variant == Variant::kPgCopy) {
    if (p_gen <= threshold) {
      // Copy mode: source surfaces in descending attention order.
      std::vector<int> pos(alpha.size());
      for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
      std::sort(pos.begin(), pos.end(), [&](int a, int b) {
        if (alpha[static_cast<std::size_t>(a)] != alpha[static_cast<std::size_t>(b)])
          return alpha[static_cast<std::size_t>(a)] > alpha[static_cast<std::size_t>(b)];
        return a < b;
      });
      for (int i : pos)
        offer(d.slot_of(source[static_cast<std::size_t>(i)]), ExtendedDistribution::kCopied, i);
    }
  } else if (p_gen < threshold) {
    // Dictionary mode: candidates of the attended source word, scored by the
    // decoder's opinion of each candidate.
    const std::vector<double>& ptr =
        step.has_beta ? t.value(step.beta).data : t.value(step.alpha).data;
    const int at = argmax_position(ptr);
    struct Scored {
      double score, q;
      std::string token;
    };
    std::vector<Scored> cands;
    for (const auto& c : lex.lookup(source[static_cast<std::size_t>(at)])) {
      const double score = tgt.contains(c.target)
                               ? p_dec[static_cast<std::size_t>(tgt.id_of(c.target))]
                               : c.weight * p_dec[static_cast<std::size_t>(Vocab::kUnk)];
      cands.push_back({score, c.weight, c.target});
    }
    std::sort(cands.begin(), cands.end(), [](const Scored& a, const Scored& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.q != b.q) return a.q > b.q;
      return a.token < b.token;
    });
    for (const auto& c : cands) offer(d.slot_of(c.token), ExtendedDistribution::kDictionary, at);
  }

  // Neural remainder: vocabulary by decoder probability, then leftover
  // extended slots by mixed probability.
  std::vector<double> pd(p_dec.data.begin(), p_dec.data.end());
  for (int s : by_prob(pd, 0, vocab)) offer(s, ExtendedDistribution::kNeural, -1);
  std::vector<double> ext(probs.data.begin(), probs.data.end());
  for (int s : by_prob(ext, vocab, total)) offer(s, d.provenance_at(s), -1);
  return ranked;
}

struct Hypothesis {
  DecoderState state;
  int prev_id = Vocab::kBos;
  double logp = 0.0;
  int steps = 0;
  TokenSeq tokens;
  std::vector<TraceStep> trace;
  std::vector<std::vector<double>> alphas;
  bool done = false;
};

struct EvalGuard {
  TranslationModel* m;
  bool was;
  explicit EvalGuard(TranslationModel& model) : m(&model), was(model.training()) {
    m->set_train(false);
  }
  ~EvalGuard() { m->set_train(was); }
};

}  // namespace detail

inline SentenceTranslation translate_sentence(TranslationModel& model, const TokenSeq& source,
                                              const Vocab& src_vocab, const Vocab& tgt_vocab,
                                              const BilingualLexicon& lex,
                                              const DecodeOptions& opt = {}) {
  if (opt.beam < 1) throw std::invalid_argument("beam width must be >= 1");
  SentenceTranslation best;
  if (source.empty()) return best;

  detail::EvalGuard guard(model);
  const Variant variant = model.config().variant;
  Tape t;
  EncoderStates enc = model.encode(t, src_vocab.encode(source));
  std::vector<Tensor> features;
  const std::vector<Tensor>* feat = nullptr;
  if (uses_pc(variant)) {
    features = build_entry_features(source, lex, tgt_vocab);
    feat = &features;
  }

  const int cap =
      opt.max_steps > 0 ? opt.max_steps : 2 * static_cast<int>(source.size()) + 5;
  std::vector<detail::Hypothesis> live(1);
  live[0].state = model.init_decoder(t, enc);
  std::vector<detail::Hypothesis> finished;

  for (int step_idx = 0; step_idx < cap && !live.empty(); ++step_idx) {
    std::vector<detail::Hypothesis> pool;
    for (detail::Hypothesis& hyp : live) {
      DecoderState st = hyp.state;
      FusionStepState step = model.decode_step(t, st, hyp.prev_id, enc, feat);
      ExtendedDistribution d = fused_distribution(t, variant, step, source, lex, tgt_vocab);
      std::vector<detail::Choice> ranked =
          detail::ranked_choices(t, variant, step, d, source, lex, tgt_vocab,
                                 model.config().threshold, model.config().soft_gate);
      const std::vector<double>& alpha = t.value(step.alpha).data;
      const double p_gen =
          step.has_p_gen ? t.scalar_value(step.p_gen) : std::numeric_limits<double>::quiet_NaN();
      const double prenorm = t.scalar_value(d.prenorm);
      const std::size_t width = std::min<std::size_t>(static_cast<std::size_t>(opt.beam),
                                                      ranked.size());
      for (std::size_t k = 0; k < width; ++k) {
        const detail::Choice& c = ranked[k];
        detail::Hypothesis child = hyp;
        child.state = st;
        child.logp += c.step_logp;
        child.steps += 1;
        if (c.slot == Vocab::kEos) {
          child.done = true;
        } else {
          child.tokens.push_back(c.token);
          child.trace.push_back({c.token, c.provenance, p_gen, c.attended, prenorm});
          child.alphas.push_back(alpha);
          child.prev_id = tgt_vocab.contains(c.token) ? tgt_vocab.id_of(c.token) : Vocab::kUnk;
        }
        pool.push_back(std::move(child));
      }
    }
    std::sort(pool.begin(), pool.end(),
              [](const detail::Hypothesis& a, const detail::Hypothesis& b) {
                if (a.logp != b.logp) return a.logp > b.logp;
                return a.tokens < b.tokens;
              });
    live.clear();
    for (detail::Hypothesis& h : pool) {
      if (h.done)
        finished.push_back(std::move(h));
      else if (static_cast<int>(live.size()) < opt.beam)
        live.push_back(std::move(h));
    }
  }
  for (detail::Hypothesis& h : live) finished.push_back(std::move(h));

  const detail::Hypothesis* winner = nullptr;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const detail::Hypothesis& h : finished) {
    const double s =
        h.steps > 0 ? h.logp / h.steps : -std::numeric_limits<double>::infinity();
    if (winner == nullptr || s > best_score ||
        (s == best_score && h.tokens < winner->tokens)) {
      winner = &h;
      best_score = s;
    }
  }
  if (winner == nullptr) return best;

  best.tokens = winner->tokens;
  best.trace = winner->trace;
  best.alphas = winner->alphas;
  best.logp = winner->logp;
  best.steps = winner->steps;

  // PN variants repair UNKs after the fact; the net itself never points.
  if (variant == Variant::kPnCopy || variant == Variant::kLexPn) {
    TokenSeq repaired = variant == Variant::kPnCopy
                            ? pn_replace(best.tokens, best.alphas, source)
                            : lexpn_replace(best.tokens, best.alphas, source, lex);
    for (std::size_t k = 0; k < repaired.size(); ++k) {
      if (repaired[k] == best.tokens[k]) continue;
      const int at = argmax_position(best.alphas[k]);
      best.trace[k].token = repaired[k];
      best.trace[k].attended = at;
      best.trace[k].provenance =
          (variant == Variant::kLexPn &&
           !lex.lookup(source[static_cast<std::size_t>(at)]).empty())
              ? ExtendedDistribution::kDictionary
              : ExtendedDistribution::kCopied;
    }
    best.tokens = std::move(repaired);
  }
  return best;
}

struct TranslateOptions {
  int beam = 1;
  int max_steps = -1;
  bool merge_back = false;  // undo subword segmentation on the output
  std::ostream* trace = nullptr;
};

inline std::vector<TokenSeq> translate_corpus(TranslationModel& model,
                                              const std::vector<TokenSeq>& sources,
                                              const Vocab& src_vocab, const Vocab& tgt_vocab,
                                              const BilingualLexicon& lex,
                                              const TranslateOptions& opt = {}) {
  std::vector<TokenSeq> out;
  out.reserve(sources.size());
  DecodeOptions dopt;
  dopt.beam = opt.beam;
  dopt.max_steps = opt.max_steps;
  for (std::size_t line = 0; line < sources.size(); ++line) {
    SentenceTranslation st =
        translate_sentence(model, sources[line], src_vocab, tgt_vocab, lex, dopt);
    if (opt.trace != nullptr) {
      nlohmann::json steps = nlohmann::json::array();
      for (const TraceStep& s : st.trace) {
        nlohmann::json rec;
        rec["token"] = s.token;
        rec["provenance"] = std::string(1, s.provenance);
        if (std::isfinite(s.p_gen))
          rec["p_gen"] = s.p_gen;
        else
          rec["p_gen"] = nullptr;
        rec["attended"] = s.attended;
        rec["prenorm"] = s.prenorm;
        steps.push_back(rec);
      }
      nlohmann::json row;
      row["line"] = line;
      row["steps"] = steps;
      (*opt.trace) << row.dump() << '\n';
    }
    out.push_back(opt.merge_back ? bpe_merge_back(st.tokens) : st.tokens);
  }
  return out;
}

}  // namespace lexfuse
