#pragma once

#include "lexfuse/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace lexfuse {

// Byte-pair encoding over whitespace tokens. Words are segmented into
// UTF-8 codepoints plus a separate end-of-word symbol; learned merges are
// replayed in order at apply time. Emitted subword units carry a "@@"
// continuation suffix, which is reserved: real tokens must not end in it.
struct BpeModel {
  static constexpr const char* kEndOfWord = "</w>";
  static constexpr const char* kContinuation = "@@";
  std::vector<std::pair<std::string, std::string>> merges;

  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (const auto& [l, r] : merges) f << l << ' ' << r << '\n';
  }

  static BpeModel load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    BpeModel m;
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto sp = line.find(' ');
      if (sp == std::string::npos) throw std::runtime_error("bad merge rule: " + line);
      m.merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
    }
    return m;
  }
};

inline std::vector<std::string> utf8_codepoints(const std::string& word) {
  std::vector<std::string> cps;
  std::size_t i = 0;
  while (i < word.size()) {
    const unsigned char c = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if ((c & 0x80u) == 0)
      len = 1;
    else if ((c & 0xE0u) == 0xC0u)
      len = 2;
    else if ((c & 0xF0u) == 0xE0u)
      len = 3;
    else if ((c & 0xF8u) == 0xF0u)
      len = 4;
    len = std::min(len, word.size() - i);
    cps.push_back(word.substr(i, len));
    i += len;
  }
  return cps;
}

namespace detail {

inline std::vector<std::string> word_symbols(const std::string& word) {
  std::vector<std::string> syms = utf8_codepoints(word);
  syms.push_back(BpeModel::kEndOfWord);
  return syms;
}

inline void merge_in_place(std::vector<std::string>& syms, const std::string& left,
                           const std::string& right) {
  std::vector<std::string> out;
  out.reserve(syms.size());
  std::size_t i = 0;
  while (i < syms.size()) {
    if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
      out.push_back(left + right);
      i += 2;
    } else {
      out.push_back(syms[i]);
      ++i;
    }
  }
  syms = std::move(out);
}

}  // namespace detail

inline BpeModel bpe_learn(const std::vector<TokenSeq>& side, int num_merges) {
  if (num_merges < 0) throw std::invalid_argument("num_merges must be >= 0");
  std::map<std::string, long long> word_freq;
  for (const auto& sent : side)
    for (const auto& tok : sent) ++word_freq[tok];

  std::vector<std::pair<std::vector<std::string>, long long>> words;
  words.reserve(word_freq.size());
  for (const auto& [w, f] : word_freq) words.emplace_back(detail::word_symbols(w), f);

  BpeModel model;
  for (int step = 0; step < num_merges; ++step) {
    std::map<std::pair<std::string, std::string>, long long> pair_freq;
    for (const auto& [syms, f] : words)
      for (std::size_t i = 0; i + 1 < syms.size(); ++i)
        pair_freq[{syms[i], syms[i + 1]}] += f;
    if (pair_freq.empty()) break;
    auto best = pair_freq.begin();
    for (auto it = std::next(pair_freq.begin()); it != pair_freq.end(); ++it)
      if (it->second > best->second) best = it;  // std::map order breaks ties lexicographically
    const auto [l, r] = best->first;
    model.merges.emplace_back(l, r);
    for (auto& [syms, f] : words) detail::merge_in_place(syms, l, r);
  }
  return model;
}

inline std::vector<std::string> bpe_apply_word(const std::string& word, const BpeModel& model) {
  if (word.size() >= 2 && word.compare(word.size() - 2, 2, BpeModel::kContinuation) == 0)
    throw std::invalid_argument("token ends with reserved marker '@@': " + word);
  std::vector<std::string> syms = detail::word_symbols(word);
  for (const auto& [l, r] : model.merges) detail::merge_in_place(syms, l, r);

  // Strip the end-of-word symbol and mark non-final units.
  const std::string eow = BpeModel::kEndOfWord;
  if (syms.back() == eow)
    syms.pop_back();
  else
    syms.back().resize(syms.back().size() - eow.size());
  for (std::size_t i = 0; i + 1 < syms.size(); ++i) syms[i] += BpeModel::kContinuation;
  return syms;
}

inline TokenSeq bpe_apply(const TokenSeq& sent, const BpeModel& model) {
  TokenSeq out;
  for (const auto& tok : sent) {
    auto units = bpe_apply_word(tok, model);
    out.insert(out.end(), units.begin(), units.end());
  }
  return out;
}

inline TokenSeq bpe_merge_back(const TokenSeq& units) {
  TokenSeq out;
  std::string cur;
  for (const auto& u : units) {
    if (u.size() >= 2 && u.compare(u.size() - 2, 2, BpeModel::kContinuation) == 0) {
      cur += u.substr(0, u.size() - 2);
    } else {
      cur += u;
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);  // dangling continuation: keep what we have
  return out;
}

}  // namespace lexfuse
