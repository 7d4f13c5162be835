#pragma once

#include "lexfuse/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace lexfuse {

struct LexCandidate {
  std::string target;
  long long count = 0;
  double weight = 0.0;  // relative frequency q(t|s) within the returned list
};

// Symbolic bilingual dictionary: source word -> weighted target candidates.
// Immutable snapshot semantics; merge produces a new snapshot.
class BilingualLexicon {
 public:
  static constexpr int kMaxCandidates = 16;

  void add(const std::string& src, const std::string& tgt, long long count) {
    if (count <= 0) throw std::invalid_argument("lexicon counts must be positive");
    entries_[src][tgt] += count;
  }

  bool contains(const std::string& src) const { return entries_.count(src) != 0; }
  std::size_t source_count() const { return entries_.size(); }

  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& [s, m] : entries_) n += m.size();
    return n;
  }

  // Candidates by descending count (ties lexicographic), capped, with
  // weights renormalized over the returned list.
  std::vector<LexCandidate> lookup(const std::string& src) const {
    auto it = entries_.find(src);
    if (it == entries_.end()) return {};
    std::vector<LexCandidate> cands;
    cands.reserve(it->second.size());
    for (const auto& [tgt, c] : it->second) cands.push_back({tgt, c, 0.0});
    std::sort(cands.begin(), cands.end(), [](const LexCandidate& a, const LexCandidate& b) {
      if (a.count != b.count) return a.count > b.count;
      return a.target < b.target;
    });
    if (cands.size() > kHardCap) cands.resize(kHardCap);
    double total = 0.0;
    for (const auto& c : cands) total += static_cast<double>(c.count);
    for (auto& c : cands) c.weight = static_cast<double>(c.count) / total;
    return cands;
  }

  BilingualLexicon merged(const BilingualLexicon& additions) const {
    BilingualLexicon out = *this;
    for (const auto& [src, m] : additions.entries_)
      for (const auto& [tgt, c] : m) out.entries_[src][tgt] += c;
    return out;
  }

  // TSV: source<TAB>target<TAB>count, sorted by source then descending count.
  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (const auto& [src, m] : entries_) {
      std::vector<std::pair<long long, std::string>> rows;
      for (const auto& [tgt, c] : m) rows.emplace_back(c, tgt);
      std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      for (const auto& [c, tgt] : rows) f << src << '\t' << tgt << '\t' << c << '\n';
    }
  }

  static BilingualLexicon load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    BilingualLexicon lex;
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto t1 = line.find('\t');
      const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
      if (t2 == std::string::npos) throw std::runtime_error("bad dictionary line: " + line);
      lex.add(line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1),
              std::stoll(line.substr(t2 + 1)));
    }
    return lex;
  }

  const std::map<std::string, std::map<std::string, long long>>& raw() const { return entries_; }

 private:
  static constexpr std::size_t kHardCap = kMaxCandidates;
  std::map<std::string, std::map<std::string, long long>> entries_;
};

struct EntryFeatures {
  bool in_dictionary = false;
  bool unique_translation = false;
  bool source_in_target_neural_lexicon = false;

  std::vector<double> bits() const {
    return {in_dictionary ? 1.0 : 0.0, unique_translation ? 1.0 : 0.0,
            source_in_target_neural_lexicon ? 1.0 : 0.0};
  }
};

inline EntryFeatures entry_features(const std::string& word, const BilingualLexicon& lex,
                                    const Vocab& tgt_vocab) {
  EntryFeatures f;
  auto cands = lex.lookup(word);
  f.in_dictionary = !cands.empty();
  f.unique_translation = cands.size() == 1;
  f.source_in_target_neural_lexicon = tgt_vocab.contains(word);
  return f;
}

}  // namespace lexfuse
