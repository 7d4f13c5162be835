#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace lexfuse {

using TokenSeq = std::vector<std::string>;

inline TokenSeq split_tokens(const std::string& line) {
  TokenSeq out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline std::string join_tokens(const TokenSeq& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

struct SentencePair {
  TokenSeq source;
  TokenSeq target;
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;

  // Line-aligned plain-text files, one sentence per line, tokens
  // space-separated. Pairs with an empty side are dropped.
  static ParallelCorpus load(const std::string& src_path, const std::string& tgt_path) {
    std::ifstream src(src_path), tgt(tgt_path);
    if (!src) throw std::runtime_error("cannot open " + src_path);
    if (!tgt) throw std::runtime_error("cannot open " + tgt_path);
    ParallelCorpus c;
    std::string sline, tline;
    long long lineno = 0;
    while (true) {
      const bool got_s = static_cast<bool>(std::getline(src, sline));
      const bool got_t = static_cast<bool>(std::getline(tgt, tline));
      ++lineno;
      if (got_s != got_t)
        throw std::runtime_error("line count mismatch at line " + std::to_string(lineno) + ": " +
                                 (got_s ? tgt_path : src_path) + " ended first");
      if (!got_s) break;
      SentencePair p{split_tokens(sline), split_tokens(tline)};
      if (p.source.empty() || p.target.empty()) continue;
      c.pairs.push_back(std::move(p));
    }
    return c;
  }

  ParallelCorpus filtered(std::size_t max_len) const {
    ParallelCorpus c;
    for (const auto& p : pairs)
      if (p.source.size() <= max_len && p.target.size() <= max_len) c.pairs.push_back(p);
    return c;
  }

  std::vector<TokenSeq> source_side() const {
    std::vector<TokenSeq> s;
    s.reserve(pairs.size());
    for (const auto& p : pairs) s.push_back(p.source);
    return s;
  }
  std::vector<TokenSeq> target_side() const {
    std::vector<TokenSeq> s;
    s.reserve(pairs.size());
    for (const auto& p : pairs) s.push_back(p.target);
    return s;
  }
};

// Frequency-thresholded vocabulary: the neural lexicon. Ids 0..3 are
// reserved; real tokens get ids by descending count, ties lexicographic.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;

  Vocab() {
    for (const char* s : {"<pad>", "<unk>", "<s>", "</s>"}) {
      ids_.emplace(s, static_cast<int>(tokens_.size()));
      tokens_.emplace_back(s);
      counts_.push_back(0);
    }
  }

  static bool is_reserved_surface(const std::string& tok) {
    return tok == "<pad>" || tok == "<unk>" || tok == "<s>" || tok == "</s>";
  }

  static Vocab build(const std::vector<TokenSeq>& side, long long lexbar) {
    if (lexbar < 1) throw std::invalid_argument("lexbar must be >= 1");
    std::map<std::string, long long> counts;
    long long total = 0;
    for (const auto& sent : side) {
      for (const auto& tok : sent) {
        ++total;
        if (!is_reserved_surface(tok)) ++counts[tok];
      }
    }
    if (total == 0) throw std::invalid_argument("empty corpus side");
    std::vector<std::pair<long long, std::string>> kept;
    for (const auto& [tok, c] : counts)
      if (c >= lexbar) kept.emplace_back(c, tok);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    Vocab v;
    v.lexbar_ = lexbar;
    for (const auto& [c, tok] : kept) {
      v.ids_.emplace(tok, static_cast<int>(v.tokens_.size()));
      v.tokens_.push_back(tok);
      v.counts_.push_back(c);
    }
    return v;
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  long long lexbar() const { return lexbar_; }

  bool contains(const std::string& tok) const {
    if (is_reserved_surface(tok)) return false;
    return ids_.count(tok) != 0;
  }

  int id_of(const std::string& tok) const {
    if (is_reserved_surface(tok)) return kUnk;  // raw text never injects control ids
    auto it = ids_.find(tok);
    return it == ids_.end() ? kUnk : it->second;
  }

  const std::string& token_of(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("vocab id out of range");
    return tokens_[static_cast<std::size_t>(id)];
  }

  long long count_of(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("vocab id out of range");
    return counts_[static_cast<std::size_t>(id)];
  }

  std::vector<int> encode(const TokenSeq& sent) const {
    std::vector<int> ids;
    ids.reserve(sent.size());
    for (const auto& t : sent) ids.push_back(id_of(t));
    return ids;
  }

  // Target-side framing: <s> ... </s>.
  std::vector<int> encode_target(const TokenSeq& sent) const {
    std::vector<int> ids;
    ids.reserve(sent.size() + 2);
    ids.push_back(kBos);
    for (const auto& t : sent) ids.push_back(id_of(t));
    ids.push_back(kEos);
    return ids;
  }

  TokenSeq decode(const std::vector<int>& ids) const {
    TokenSeq out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(token_of(id));
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (int id = 4; id < size(); ++id)
      f << tokens_[static_cast<std::size_t>(id)] << '\t' << counts_[static_cast<std::size_t>(id)]
        << '\n';
  }

  static Vocab load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<std::pair<std::string, long long>> rows;
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw std::runtime_error("bad vocab line: " + line);
      rows.emplace_back(line.substr(0, tab), std::stoll(line.substr(tab + 1)));
    }
    return from_rows(rows, 1);
  }

  // Real-token rows in rank order; reserved ids excluded.
  std::vector<std::pair<std::string, long long>> rows() const {
    std::vector<std::pair<std::string, long long>> r;
    for (int id = 4; id < size(); ++id)
      r.emplace_back(tokens_[static_cast<std::size_t>(id)],
                     counts_[static_cast<std::size_t>(id)]);
    return r;
  }

  static Vocab from_rows(const std::vector<std::pair<std::string, long long>>& rows,
                         long long lexbar) {
    Vocab v;
    v.lexbar_ = lexbar;
    for (const auto& [tok, c] : rows) {
      if (is_reserved_surface(tok)) throw std::runtime_error("reserved surface in vocab rows");
      v.ids_.emplace(tok, static_cast<int>(v.tokens_.size()));
      v.tokens_.push_back(tok);
      v.counts_.push_back(c);
    }
    return v;
  }

 private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> tokens_;
  std::vector<long long> counts_;
  long long lexbar_ = 1;
};

}  // namespace lexfuse
