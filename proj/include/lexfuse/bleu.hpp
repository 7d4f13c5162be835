#pragma once

#include "lexfuse/corpus.hpp"
#include "lexfuse/lexicon.hpp"

#include <array>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace lexfuse {

struct BleuReport {
  double bleu = 0.0;  // 0..100
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  long long hyp_len = 0;
  long long ref_len = 0;
};

// Corpus-level BLEU-4, case-sensitive, clipped counts summed over the corpus,
// BP = min(1, exp(1 - ref/hyp)). Any zero precision zeroes the score unless
// add-one smoothing is requested.
inline BleuReport bleu(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs,
                       bool smooth = false) {
  if (hyps.size() != refs.size())
    throw std::invalid_argument("hypothesis/reference line counts differ");
  if (hyps.empty()) throw std::invalid_argument("empty evaluation corpus");

  std::array<long long, 4> matched{}, total{};
  BleuReport r;
  for (std::size_t line = 0; line < hyps.size(); ++line) {
    const TokenSeq& h = hyps[line];
    const TokenSeq& g = refs[line];
    r.hyp_len += static_cast<long long>(h.size());
    r.ref_len += static_cast<long long>(g.size());
    for (int n = 1; n <= 4; ++n) {
      std::map<std::vector<std::string>, long long> hc, gc;
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= h.size(); ++i)
        ++hc[std::vector<std::string>(h.begin() + static_cast<long>(i),
                                      h.begin() + static_cast<long>(i) + n)];
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= g.size(); ++i)
        ++gc[std::vector<std::string>(g.begin() + static_cast<long>(i),
                                      g.begin() + static_cast<long>(i) + n)];
      for (const auto& [ng, c] : hc) {
        auto it = gc.find(ng);
        if (it != gc.end()) matched[static_cast<std::size_t>(n - 1)] += std::min(c, it->second);
        total[static_cast<std::size_t>(n - 1)] += c;
      }
    }
  }

  double log_sum = 0.0;
  bool zero = false;
  for (int n = 0; n < 4; ++n) {
    double m = static_cast<double>(matched[static_cast<std::size_t>(n)]);
    double t = static_cast<double>(total[static_cast<std::size_t>(n)]);
    if (smooth) {
      m += 1.0;
      t += 1.0;
    }
    const double p = t > 0.0 ? m / t : 0.0;
    r.precisions[static_cast<std::size_t>(n)] = p;
    if (p <= 0.0)
      zero = true;
    else
      log_sum += std::log(p);
  }
  r.brevity_penalty =
      r.hyp_len == 0 ? 0.0
                     : std::min(1.0, std::exp(1.0 - static_cast<double>(r.ref_len) /
                                                        static_cast<double>(r.hyp_len)));
  r.bleu = (zero || r.hyp_len == 0) ? 0.0 : r.brevity_penalty * std::exp(log_sum / 4.0) * 100.0;
  return r;
}

struct CoverageReport {
  long long src_nlex_size = 0;  // real tokens, specials excluded
  long long tgt_nlex_size = 0;
  long long src_unk_types = 0;  // corpus source types outside the neural lexicon
  long long tgt_unk_types = 0;
  long long covered_unk_types = 0;  // source UNK types with a dictionary entry
  double coverage_fraction = 1.0;
  long long shared_types = 0;  // types occurring on both corpus sides
};

inline CoverageReport coverage_report(const ParallelCorpus& corpus, const Vocab& src_vocab,
                                      const Vocab& tgt_vocab, const BilingualLexicon& lex) {
  std::set<std::string> src_types, tgt_types;
  for (const auto& p : corpus.pairs) {
    src_types.insert(p.source.begin(), p.source.end());
    tgt_types.insert(p.target.begin(), p.target.end());
  }
  CoverageReport r;
  r.src_nlex_size = src_vocab.size() - 4;
  r.tgt_nlex_size = tgt_vocab.size() - 4;
  for (const auto& t : src_types) {
    if (!src_vocab.contains(t)) {
      ++r.src_unk_types;
      if (lex.contains(t)) ++r.covered_unk_types;
    }
    if (tgt_types.count(t)) ++r.shared_types;
  }
  for (const auto& t : tgt_types)
    if (!tgt_vocab.contains(t)) ++r.tgt_unk_types;
  r.coverage_fraction = r.src_unk_types == 0 ? 1.0
                                             : static_cast<double>(r.covered_unk_types) /
                                                   static_cast<double>(r.src_unk_types);
  return r;
}

}  // namespace lexfuse
