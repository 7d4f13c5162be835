#pragma once

#include "lexfuse/lexicon.hpp"
#include "lexfuse/model.hpp"

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace lexfuse {

// Distribution over target vocab plus the copy/translation candidates this
// step introduced. Slots [0, vocab) are the neural lexicon; extra slots map
// to out-of-vocabulary surfaces with a provenance tag.
struct ExtendedDistribution {
  static constexpr char kNeural = 'n';
  static constexpr char kCopied = 'c';
  static constexpr char kDictionary = 'd';

  Var probs;            // normalized
  Var prenorm;          // scalar diagnostic: mass before renormalization
  const Vocab* tgt = nullptr;
  std::vector<std::string> extra_tokens;
  std::vector<char> extra_provenance;
  std::shared_ptr<MixTable> table;  // keeps the tape's mix reference alive

  int size() const { return tgt->size() + static_cast<int>(extra_tokens.size()); }

  std::string token_at(int slot) const {
    const int v = tgt->size();
    if (slot < v) return tgt->token_of(slot);
    return extra_tokens[static_cast<std::size_t>(slot - v)];
  }

  char provenance_at(int slot) const {
    if (slot < tgt->size()) return kNeural;
    return extra_provenance[static_cast<std::size_t>(slot - tgt->size())];
  }

  // Slot for a surface form: vocab id when in the neural lexicon, else the
  // extra slot introduced this step, else -1.
  int slot_of(const std::string& token) const {
    if (tgt->contains(token)) return tgt->id_of(token);
    for (std::size_t k = 0; k < extra_tokens.size(); ++k)
      if (extra_tokens[k] == token) return tgt->size() + static_cast<int>(k);
    return -1;
  }
};

inline std::vector<Tensor> build_entry_features(const TokenSeq& source,
                                                const BilingualLexicon& lex, const Vocab& tgt) {
  std::vector<Tensor> out;
  out.reserve(source.size());
  for (const auto& w : source) out.push_back(Tensor::vector(entry_features(w, lex, tgt).bits()));
  return out;
}

namespace detail {

struct SlotPlan {
  std::shared_ptr<MixTable> table = std::make_shared<MixTable>();
  std::vector<std::string> extra_tokens;
  std::vector<char> extra_provenance;
};

inline int plan_slot(SlotPlan& plan, const Vocab& tgt, const std::string& token,
                     char provenance, std::unordered_map<std::string, int>& extra_index) {
  if (tgt.contains(token)) return tgt.id_of(token);
  auto it = extra_index.find(token);
  if (it != extra_index.end()) return it->second;
  const int slot = tgt.size() + static_cast<int>(plan.extra_tokens.size());
  plan.extra_tokens.push_back(token);
  plan.extra_provenance.push_back(provenance);
  extra_index.emplace(token, slot);
  return slot;
}

// Copy plan: every source position contributes its own surface with weight 1.
inline SlotPlan copy_plan(const TokenSeq& source, const Vocab& tgt) {
  SlotPlan plan;
  std::unordered_map<std::string, int> extra_index;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const int slot = plan_slot(plan, tgt, source[i], ExtendedDistribution::kCopied, extra_index);
    plan.table->entries.push_back({static_cast<int>(i), slot, 1.0});
  }
  return plan;
}

// Dictionary plan: position i contributes each candidate of Lex(x_i) with
// weight q(t|x_i).
inline SlotPlan lex_plan(const TokenSeq& source, const BilingualLexicon& lex, const Vocab& tgt) {
  SlotPlan plan;
  std::unordered_map<std::string, int> extra_index;
  for (std::size_t i = 0; i < source.size(); ++i) {
    for (const auto& cand : lex.lookup(source[i])) {
      const int slot =
          plan_slot(plan, tgt, cand.target, ExtendedDistribution::kDictionary, extra_index);
      plan.table->entries.push_back({static_cast<int>(i), slot, cand.weight});
    }
  }
  return plan;
}

inline ExtendedDistribution finish(Tape& t, SlotPlan plan, Var p_dec, Var gen_scale,
                                   Var pos_weights, const Vocab& tgt, bool renormalize) {
  plan.table->vocab_size = tgt.size();
  plan.table->extended_size = tgt.size() + static_cast<int>(plan.extra_tokens.size());
  ExtendedDistribution out;
  out.tgt = &tgt;
  out.extra_tokens = std::move(plan.extra_tokens);
  out.extra_provenance = std::move(plan.extra_provenance);
  out.table = plan.table;
  Var mixed = t.mix(p_dec, gen_scale, pos_weights, *out.table);
  out.prenorm = t.sum(mixed);
  out.probs = renormalize ? t.div_vs(mixed, out.prenorm) : mixed;
  return out;
}

}  // namespace detail

// Baseline: the decoder distribution itself, no extra slots.
inline ExtendedDistribution baseline_distribution(Tape& t, const FusionStepState& step,
                                                  const Vocab& tgt) {
  ExtendedDistribution out;
  out.tgt = &tgt;
  out.probs = step.p_dec;
  out.prenorm = t.sum(step.p_dec);
  return out;
}

// p_gen P_dec(w) + (1-p_gen) sum_{x_i = w} alpha_i; exact distribution, no
// renormalization needed.
inline ExtendedDistribution pg_copy(Tape& t, const FusionStepState& step, const TokenSeq& source,
                                    const Vocab& tgt) {
  Var pos = t.scale_vs(step.alpha, t.one_minus(step.p_gen));
  return detail::finish(t, detail::copy_plan(source, tgt), step.p_dec, step.p_gen, pos, tgt,
                        false);
}

// p_gen P_dec(w) + (1-p_gen) sum_i alpha_i q(w|x_i), renormalized.
inline ExtendedDistribution lexpg(Tape& t, const FusionStepState& step, const TokenSeq& source,
                                  const BilingualLexicon& lex, const Vocab& tgt) {
  Var pos = t.scale_vs(step.alpha, t.one_minus(step.p_gen));
  return detail::finish(t, detail::lex_plan(source, lex, tgt), step.p_dec, step.p_gen, pos, tgt,
                        true);
}

// As lexpg with the separately trained pointer weights beta in place of alpha.
inline ExtendedDistribution lexpg_s(Tape& t, const FusionStepState& step, const TokenSeq& source,
                                    const BilingualLexicon& lex, const Vocab& tgt) {
  Var pos = t.scale_vs(step.beta, t.one_minus(step.p_gen));
  return detail::finish(t, detail::lex_plan(source, lex, tgt), step.p_dec, step.p_gen, pos, tgt,
                        true);
}

// p_gen P_dec(w) + sum_i PC_i alpha_i q(w|x_i) with (p_gen, PC) one softmax.
inline ExtendedDistribution lexpg_f(Tape& t, const FusionStepState& step, const TokenSeq& source,
                                    const BilingualLexicon& lex, const Vocab& tgt) {
  Var pos = t.mul(step.pc, step.alpha);
  return detail::finish(t, detail::lex_plan(source, lex, tgt), step.p_dec, step.p_gen, pos, tgt,
                        true);
}

// p_gen P_dec(w) + sum_i beta_i ((1-p_gen) + PC_i)/2 q(w|x_i), renormalized.
inline ExtendedDistribution lexpg_sf(Tape& t, const FusionStepState& step, const TokenSeq& source,
                                     const BilingualLexicon& lex, const Vocab& tgt) {
  Var avg = t.scale_const(t.add_vs(step.pc, t.one_minus(step.p_gen)), 0.5);
  Var pos = t.mul(step.beta, avg);
  return detail::finish(t, detail::lex_plan(source, lex, tgt), step.p_dec, step.p_gen, pos, tgt,
                        true);
}

// Dispatch on the variant tag; baseline and the PN variants fall back to the
// decoder distribution (their behavior lives in decoding, not the head).
inline ExtendedDistribution fused_distribution(Tape& t, Variant variant,
                                               const FusionStepState& step,
                                               const TokenSeq& source,
                                               const BilingualLexicon& lex, const Vocab& tgt) {
  switch (variant) {
    case Variant::kBaseline:
    case Variant::kPnCopy:
    case Variant::kLexPn: return baseline_distribution(t, step, tgt);
    case Variant::kPgCopy: return pg_copy(t, step, source, tgt);
    case Variant::kLexPg: return lexpg(t, step, source, lex, tgt);
    case Variant::kLexPgS: return lexpg_s(t, step, source, lex, tgt);
    case Variant::kLexPgF: return lexpg_f(t, step, source, lex, tgt);
    case Variant::kLexPgSf: return lexpg_sf(t, step, source, lex, tgt);
  }
  throw std::invalid_argument("unknown variant");
}

// UNK replacement by attention argmax (ties to the lowest source index).
inline int argmax_position(const std::vector<double>& weights) {
  int best = 0;
  for (std::size_t i = 1; i < weights.size(); ++i)
    if (weights[i] > weights[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

inline TokenSeq pn_replace(const TokenSeq& output, const std::vector<std::vector<double>>& alphas,
                           const TokenSeq& source) {
  if (output.size() != alphas.size())
    throw std::invalid_argument("one attention vector per emitted token required");
  TokenSeq out = output;
  for (std::size_t k = 0; k < out.size(); ++k)
    if (out[k] == "<unk>")
      out[k] = source[static_cast<std::size_t>(argmax_position(alphas[k]))];
  return out;
}

// UNK -> top-weighted dictionary translation of the attended source word;
// falls back to plain copy when the word has no entry.
inline TokenSeq lexpn_replace(const TokenSeq& output,
                              const std::vector<std::vector<double>>& alphas,
                              const TokenSeq& source, const BilingualLexicon& lex) {
  if (output.size() != alphas.size())
    throw std::invalid_argument("one attention vector per emitted token required");
  TokenSeq out = output;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k] != "<unk>") continue;
    const std::string& src_word =
        source[static_cast<std::size_t>(argmax_position(alphas[k]))];
    auto cands = lex.lookup(src_word);
    out[k] = cands.empty() ? src_word : cands.front().target;
  }
  return out;
}

}  // namespace lexfuse
