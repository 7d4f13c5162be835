#pragma once

#include "lexfuse/corpus.hpp"
#include "lexfuse/lexicon.hpp"

#include <array>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lexfuse {

// t(target | source) with a NULL token on the conditioning side.
struct TranslationTable {
  static constexpr const char* kNull = "<null>";
  static constexpr double kFloor = 1e-12;

  std::map<std::string, std::map<std::string, double>> probs;

  double prob(const std::string& src, const std::string& tgt) const {
    auto it = probs.find(src);
    if (it == probs.end()) return kFloor;
    auto jt = it->second.find(tgt);
    return jt == it->second.end() ? kFloor : std::max(jt->second, kFloor);
  }
};

struct Model1Result {
  TranslationTable table;
  std::vector<double> log_likelihoods;  // one entry per EM iteration, pre-update
};

inline Model1Result model1_em(const ParallelCorpus& corpus, int iterations) {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (corpus.pairs.empty()) throw std::invalid_argument("empty corpus");

  const std::string null_tok = TranslationTable::kNull;
  TranslationTable table;
  {  // uniform initialization over co-occurring targets
    std::map<std::string, std::set<std::string>> cooc;
    for (const auto& p : corpus.pairs) {
      for (const auto& t : p.target) {
        cooc[null_tok].insert(t);
        for (const auto& s : p.source) cooc[s].insert(t);
      }
    }
    for (const auto& [s, tgts] : cooc) {
      const double u = 1.0 / static_cast<double>(tgts.size());
      for (const auto& t : tgts) table.probs[s][t] = u;
    }
  }

  Model1Result result;
  for (int it = 0; it < iterations; ++it) {
    std::map<std::string, std::map<std::string, double>> counts;
    double ll = 0.0;
    for (const auto& p : corpus.pairs) {
      const double denom_positions = static_cast<double>(p.source.size() + 1);
      for (const auto& t : p.target) {
        double z = table.prob(null_tok, t);
        for (const auto& s : p.source) z += table.prob(s, t);
        ll += std::log(z) - std::log(denom_positions);
        counts[null_tok][t] += table.prob(null_tok, t) / z;
        for (const auto& s : p.source) counts[s][t] += table.prob(s, t) / z;
      }
    }
    result.log_likelihoods.push_back(ll);
    for (auto& [s, row] : counts) {
      double total = 0.0;
      for (const auto& [t, c] : row) total += c;
      auto& trow = table.probs[s];
      for (const auto& [t, c] : row) trow[t] = c / total;
    }
  }
  result.table = std::move(table);
  return result;
}

struct AlignmentLinks {
  int src_len = 0;
  int tgt_len = 0;
  std::set<std::pair<int, int>> links;  // (source index, target index)

  AlignmentLinks transposed() const {
    AlignmentLinks out;
    out.src_len = tgt_len;
    out.tgt_len = src_len;
    for (const auto& [i, j] : links) out.links.emplace(j, i);
    return out;
  }
};

// Each target position links to its argmax source position; ties go to the
// lowest source index; NULL wins only when strictly more probable.
inline AlignmentLinks viterbi_align(const TranslationTable& table, const SentencePair& pair) {
  AlignmentLinks out;
  out.src_len = static_cast<int>(pair.source.size());
  out.tgt_len = static_cast<int>(pair.target.size());
  for (int j = 0; j < out.tgt_len; ++j) {
    const std::string& t = pair.target[static_cast<std::size_t>(j)];
    double best = table.prob(TranslationTable::kNull, t);
    int best_i = -1;
    for (int i = 0; i < out.src_len; ++i) {
      const double p = table.prob(pair.source[static_cast<std::size_t>(i)], t);
      if (best_i == -1 ? p >= best : p > best) {
        best = p;
        best_i = i;
      }
    }
    if (best_i >= 0) out.links.emplace(best_i, j);
  }
  return out;
}

inline AlignmentLinks intersect(const AlignmentLinks& forward, const AlignmentLinks& backward) {
  if (forward.src_len != backward.src_len || forward.tgt_len != backward.tgt_len)
    throw std::invalid_argument("alignment link sets cover different pair lengths");
  AlignmentLinks out;
  out.src_len = forward.src_len;
  out.tgt_len = forward.tgt_len;
  for (const auto& l : forward.links)
    if (backward.links.count(l)) out.links.insert(l);
  return out;
}

inline BilingualLexicon extract_dictionary(const ParallelCorpus& corpus,
                                           const std::vector<AlignmentLinks>& links,
                                           long long min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  if (links.size() != corpus.pairs.size())
    throw std::invalid_argument("one link set per sentence pair required");
  std::map<std::pair<std::string, std::string>, long long> counts;
  for (std::size_t k = 0; k < corpus.pairs.size(); ++k) {
    const auto& p = corpus.pairs[k];
    for (const auto& [i, j] : links[k].links) {
      if (i < 0 || j < 0 || i >= static_cast<int>(p.source.size()) ||
          j >= static_cast<int>(p.target.size()))
        throw std::out_of_range("alignment link outside sentence bounds");
      ++counts[{p.source[static_cast<std::size_t>(i)], p.target[static_cast<std::size_t>(j)]}];
    }
  }
  BilingualLexicon lex;
  for (const auto& [st, c] : counts)
    if (c >= min_count) lex.add(st.first, st.second, c);
  return lex;
}

inline std::string to_pharaoh(const AlignmentLinks& a) {
  std::string out;
  for (const auto& [i, j] : a.links) {
    if (!out.empty()) out += ' ';
    out += std::to_string(i) + "-" + std::to_string(j);
  }
  return out;
}

inline AlignmentLinks from_pharaoh(const std::string& line, int src_len, int tgt_len) {
  AlignmentLinks a;
  a.src_len = src_len;
  a.tgt_len = tgt_len;
  std::istringstream ss(line);
  std::string item;
  while (ss >> item) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) throw std::runtime_error("bad pharaoh link: " + item);
    const int i = std::stoi(item.substr(0, dash));
    const int j = std::stoi(item.substr(dash + 1));
    if (i < 0 || j < 0 || i >= src_len || j >= tgt_len)
      throw std::out_of_range("pharaoh link outside sentence bounds");
    a.links.emplace(i, j);
  }
  return a;
}

// HMM jump-model refinement (Vogel-style) over Model 1 emissions. Jumps are
// bucketed by clamped distance; forward-backward re-estimates both the jump
// distribution and the emission table. NULL stays a Model 1 concern: after
// HMM Viterbi, a link is dropped when NULL is strictly more probable.
struct HmmModel {
  static constexpr int kMaxJump = 7;
  TranslationTable emissions;
  std::array<double, 2 * kMaxJump + 1> jump{};  // index d + kMaxJump

  double jump_prob(int from, int to, int src_len) const {
    const int d = std::clamp(to - from, -kMaxJump, kMaxJump);
    double z = 0.0;
    for (int i = 0; i < src_len; ++i)
      z += jump[static_cast<std::size_t>(std::clamp(i - from, -kMaxJump, kMaxJump) + kMaxJump)];
    return jump[static_cast<std::size_t>(d + kMaxJump)] / z;
  }
};

inline HmmModel hmm_refine(const ParallelCorpus& corpus, const TranslationTable& init,
                           int iterations) {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  HmmModel model;
  model.emissions = init;
  model.jump.fill(1.0 / static_cast<double>(model.jump.size()));

  for (int it = 0; it < iterations; ++it) {
    std::map<std::string, std::map<std::string, double>> em_counts;
    std::array<double, 2 * HmmModel::kMaxJump + 1> jump_counts{};
    for (const auto& p : corpus.pairs) {
      const int l = static_cast<int>(p.source.size());
      const int m = static_cast<int>(p.target.size());
      auto emit = [&](int j, int i) {
        return model.emissions.prob(p.source[static_cast<std::size_t>(i)],
                                    p.target[static_cast<std::size_t>(j)]);
      };
      // scaled forward-backward
      std::vector<std::vector<double>> alpha(static_cast<std::size_t>(m),
                                             std::vector<double>(static_cast<std::size_t>(l)));
      std::vector<std::vector<double>> beta = alpha;
      std::vector<double> scale(static_cast<std::size_t>(m), 0.0);
      for (int i = 0; i < l; ++i)
        alpha[0][static_cast<std::size_t>(i)] = emit(0, i) / static_cast<double>(l);
      for (int j = 0; j < m; ++j) {
        if (j > 0) {
          for (int i2 = 0; i2 < l; ++i2) {
            double s = 0.0;
            for (int i1 = 0; i1 < l; ++i1)
              s += alpha[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(i1)] *
                   model.jump_prob(i1, i2, l);
            alpha[static_cast<std::size_t>(j)][static_cast<std::size_t>(i2)] = s * emit(j, i2);
          }
        }
        double z = 0.0;
        for (int i = 0; i < l; ++i) z += alpha[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        scale[static_cast<std::size_t>(j)] = z > 0 ? z : 1.0;
        for (int i = 0; i < l; ++i)
          alpha[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] /= scale[static_cast<std::size_t>(j)];
      }
      for (int i = 0; i < l; ++i) beta[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(i)] = 1.0;
      for (int j = m - 2; j >= 0; --j)
        for (int i1 = 0; i1 < l; ++i1) {
          double s = 0.0;
          for (int i2 = 0; i2 < l; ++i2)
            s += model.jump_prob(i1, i2, l) * emit(j + 1, i2) *
                 beta[static_cast<std::size_t>(j + 1)][static_cast<std::size_t>(i2)];
          beta[static_cast<std::size_t>(j)][static_cast<std::size_t>(i1)] =
              s / scale[static_cast<std::size_t>(j + 1)];
        }
      for (int j = 0; j < m; ++j) {
        double zg = 0.0;
        for (int i = 0; i < l; ++i)
          zg += alpha[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] *
                beta[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        if (zg <= 0) continue;
        for (int i = 0; i < l; ++i) {
          const double g = alpha[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] *
                           beta[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] / zg;
          em_counts[p.source[static_cast<std::size_t>(i)]][p.target[static_cast<std::size_t>(j)]] += g;
        }
      }
      for (int j = 0; j + 1 < m; ++j) {
        double zx = 0.0;
        std::vector<std::vector<double>> xi(static_cast<std::size_t>(l),
                                            std::vector<double>(static_cast<std::size_t>(l)));
        for (int i1 = 0; i1 < l; ++i1)
          for (int i2 = 0; i2 < l; ++i2) {
            const double v = alpha[static_cast<std::size_t>(j)][static_cast<std::size_t>(i1)] *
                             model.jump_prob(i1, i2, l) * emit(j + 1, i2) *
                             beta[static_cast<std::size_t>(j + 1)][static_cast<std::size_t>(i2)];
            xi[static_cast<std::size_t>(i1)][static_cast<std::size_t>(i2)] = v;
            zx += v;
          }
        if (zx <= 0) continue;
        for (int i1 = 0; i1 < l; ++i1)
          for (int i2 = 0; i2 < l; ++i2)
            jump_counts[static_cast<std::size_t>(
                std::clamp(i2 - i1, -HmmModel::kMaxJump, HmmModel::kMaxJump) + HmmModel::kMaxJump)] +=
                xi[static_cast<std::size_t>(i1)][static_cast<std::size_t>(i2)] / zx;
      }
    }
    for (auto& [s, row] : em_counts) {
      double total = 0.0;
      for (const auto& [t, c] : row) total += c;
      if (total <= 0) continue;
      auto& trow = model.emissions.probs[s];
      for (const auto& [t, c] : row) trow[t] = c / total;
    }
    double jz = 0.0;
    for (double c : jump_counts) jz += c;
    if (jz > 0)
      for (std::size_t d = 0; d < model.jump.size(); ++d)
        model.jump[d] = std::max(jump_counts[d] / jz, 1e-9);
  }
  return model;
}

inline AlignmentLinks hmm_viterbi(const HmmModel& model, const TranslationTable& model1,
                                  const SentencePair& pair) {
  const int l = static_cast<int>(pair.source.size());
  const int m = static_cast<int>(pair.target.size());
  AlignmentLinks out;
  out.src_len = l;
  out.tgt_len = m;
  auto emit = [&](int j, int i) {
    return model.emissions.prob(pair.source[static_cast<std::size_t>(i)],
                                pair.target[static_cast<std::size_t>(j)]);
  };
  std::vector<std::vector<double>> delta(static_cast<std::size_t>(m),
                                         std::vector<double>(static_cast<std::size_t>(l)));
  std::vector<std::vector<int>> back(static_cast<std::size_t>(m),
                                     std::vector<int>(static_cast<std::size_t>(l), -1));
  for (int i = 0; i < l; ++i)
    delta[0][static_cast<std::size_t>(i)] = std::log(emit(0, i)) - std::log(static_cast<double>(l));
  for (int j = 1; j < m; ++j)
    for (int i2 = 0; i2 < l; ++i2) {
      double best = -INFINITY;
      int arg = 0;
      for (int i1 = 0; i1 < l; ++i1) {
        const double v = delta[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(i1)] +
                         std::log(model.jump_prob(i1, i2, l));
        if (v > best) {
          best = v;
          arg = i1;
        }
      }
      delta[static_cast<std::size_t>(j)][static_cast<std::size_t>(i2)] = best + std::log(emit(j, i2));
      back[static_cast<std::size_t>(j)][static_cast<std::size_t>(i2)] = arg;
    }
  int cur = 0;
  for (int i = 1; i < l; ++i)
    if (delta[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(i)] >
        delta[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(cur)])
      cur = i;
  std::vector<int> path(static_cast<std::size_t>(m));
  for (int j = m - 1; j >= 0; --j) {
    path[static_cast<std::size_t>(j)] = cur;
    if (j > 0) cur = back[static_cast<std::size_t>(j)][static_cast<std::size_t>(cur)];
  }
  for (int j = 0; j < m; ++j) {
    const int i = path[static_cast<std::size_t>(j)];
    const std::string& t = pair.target[static_cast<std::size_t>(j)];
    if (model1.prob(TranslationTable::kNull, t) >
        model1.prob(pair.source[static_cast<std::size_t>(i)], t))
      continue;  // NULL strictly wins
    out.links.emplace(i, j);
  }
  return out;
}

// Bidirectional alignment with intersection, one link set per pair.
inline std::vector<AlignmentLinks> align_corpus(const ParallelCorpus& corpus, int iterations,
                                                bool use_hmm = false, int hmm_iterations = 3) {
  ParallelCorpus reversed;
  reversed.pairs.reserve(corpus.pairs.size());
  for (const auto& p : corpus.pairs) reversed.pairs.push_back({p.target, p.source});

  Model1Result fwd = model1_em(corpus, iterations);
  Model1Result bwd = model1_em(reversed, iterations);

  HmmModel fwd_hmm, bwd_hmm;
  if (use_hmm) {
    fwd_hmm = hmm_refine(corpus, fwd.table, hmm_iterations);
    bwd_hmm = hmm_refine(reversed, bwd.table, hmm_iterations);
  }

  std::vector<AlignmentLinks> intersected;
  intersected.reserve(corpus.pairs.size());
  for (std::size_t k = 0; k < corpus.pairs.size(); ++k) {
    const auto& p = corpus.pairs[k];
    const SentencePair r{p.target, p.source};
    AlignmentLinks f =
        use_hmm ? hmm_viterbi(fwd_hmm, fwd.table, p) : viterbi_align(fwd.table, p);
    AlignmentLinks b =
        use_hmm ? hmm_viterbi(bwd_hmm, bwd.table, r) : viterbi_align(bwd.table, r);
    intersected.push_back(intersect(f, b.transposed()));
  }
  return intersected;
}

// Full extraction pipeline: align both directions, intersect, count.
inline BilingualLexicon build_dictionary(const ParallelCorpus& corpus, int iterations,
                                         long long min_count, bool use_hmm = false,
                                         int hmm_iterations = 3) {
  return extract_dictionary(corpus, align_corpus(corpus, iterations, use_hmm, hmm_iterations),
                            min_count);
}

}  // namespace lexfuse
