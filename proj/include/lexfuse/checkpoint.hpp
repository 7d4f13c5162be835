#pragma once

#include "lexfuse/corpus.hpp"
#include "lexfuse/model.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace lexfuse {
namespace detail {

// Explicit little-endian encoding keeps checkpoints portable and bit-stable.
inline void put_u64(std::ostream& f, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  f.write(b, 8);
}
inline void put_u32(std::ostream& f, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  f.write(b, 4);
}
inline void put_i64(std::ostream& f, std::int64_t v) { put_u64(f, static_cast<std::uint64_t>(v)); }
inline void put_f64(std::ostream& f, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(f, bits);
}
inline void put_str(std::ostream& f, const std::string& s) {
  put_u32(f, static_cast<std::uint32_t>(s.size()));
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint64_t get_u64(std::istream& f) {
  char b[8];
  f.read(b, 8);
  if (!f) throw std::runtime_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
  return v;
}
inline std::uint32_t get_u32(std::istream& f) {
  char b[4];
  f.read(b, 4);
  if (!f) throw std::runtime_error("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
  return v;
}
inline std::int64_t get_i64(std::istream& f) { return static_cast<std::int64_t>(get_u64(f)); }
inline double get_f64(std::istream& f) {
  std::uint64_t bits = get_u64(f);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}
inline std::string get_str(std::istream& f) {
  std::uint32_t n = get_u32(f);
  std::string s(n, '\0');
  f.read(s.data(), static_cast<std::streamsize>(n));
  if (!f) throw std::runtime_error("checkpoint truncated");
  return s;
}

inline void put_vocab(std::ostream& f, const Vocab& v) {
  put_i64(f, v.lexbar());
  const auto rows = v.rows();
  put_u64(f, rows.size());
  for (const auto& [tok, c] : rows) {
    put_str(f, tok);
    put_i64(f, c);
  }
}

inline Vocab get_vocab(std::istream& f) {
  const std::int64_t lexbar = get_i64(f);
  const std::uint64_t n = get_u64(f);
  std::vector<std::pair<std::string, long long>> rows;
  rows.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string tok = get_str(f);
    long long c = get_i64(f);
    rows.emplace_back(std::move(tok), c);
  }
  return Vocab::from_rows(rows, lexbar);
}

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'L', 'X', 'F', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Single-file binary checkpoint: config, both vocabularies, and every
// parameter tensor in creation order. The dictionary lives in its own TSV so
// it can be swapped without touching neural weights.
inline void save_checkpoint(const std::string& path, const TranslationModel& model,
                            const Vocab& src_vocab, const Vocab& tgt_vocab) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(kCheckpointMagic, 4);
  detail::put_u32(f, kCheckpointVersion);

  const ModelConfig& cfg = model.config();
  detail::put_u32(f, static_cast<std::uint32_t>(cfg.embedding_dim));
  detail::put_u32(f, static_cast<std::uint32_t>(cfg.hidden_dim));
  detail::put_u32(f, static_cast<std::uint32_t>(cfg.layers));
  detail::put_str(f, variant_name(cfg.variant));
  detail::put_f64(f, cfg.threshold);
  detail::put_u32(f, cfg.soft_gate ? 1 : 0);
  detail::put_f64(f, cfg.dropout);
  detail::put_u64(f, cfg.seed);
  detail::put_u32(f, static_cast<std::uint32_t>(cfg.src_vocab));
  detail::put_u32(f, static_cast<std::uint32_t>(cfg.tgt_vocab));

  detail::put_vocab(f, src_vocab);
  detail::put_vocab(f, tgt_vocab);

  const ParamStore& ps = model.params();
  detail::put_u64(f, ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Parameter& p = ps[i];
    detail::put_str(f, p.name);
    detail::put_u32(f, static_cast<std::uint32_t>(p.value.rank()));
    for (int d : p.value.shape) detail::put_u32(f, static_cast<std::uint32_t>(d));
    for (double v : p.value.data) detail::put_f64(f, v);
  }
  f.flush();
  if (!f) throw std::runtime_error("write failed for " + path);
}

struct LoadedModel {
  ModelConfig config;
  Vocab src_vocab;
  Vocab tgt_vocab;
  std::unique_ptr<TranslationModel> model;
};

inline LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const std::uint32_t version = detail::get_u32(f);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  LoadedModel out;
  ModelConfig& cfg = out.config;
  cfg.embedding_dim = static_cast<int>(detail::get_u32(f));
  cfg.hidden_dim = static_cast<int>(detail::get_u32(f));
  cfg.layers = static_cast<int>(detail::get_u32(f));
  cfg.variant = variant_from_name(detail::get_str(f));
  cfg.threshold = detail::get_f64(f);
  cfg.soft_gate = detail::get_u32(f) != 0;
  cfg.dropout = detail::get_f64(f);
  cfg.seed = detail::get_u64(f);
  cfg.src_vocab = static_cast<int>(detail::get_u32(f));
  cfg.tgt_vocab = static_cast<int>(detail::get_u32(f));

  out.src_vocab = detail::get_vocab(f);
  out.tgt_vocab = detail::get_vocab(f);
  if (out.src_vocab.size() != cfg.src_vocab || out.tgt_vocab.size() != cfg.tgt_vocab)
    throw std::runtime_error("checkpoint vocabulary sizes disagree with config");

  out.model = std::make_unique<TranslationModel>(cfg);
  ParamStore& ps = out.model->params();
  const std::uint64_t n = detail::get_u64(f);
  if (n != ps.size()) throw std::runtime_error("checkpoint parameter count disagrees with config");
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string name = detail::get_str(f);
    Parameter& p = ps[i];
    if (p.name != name)
      throw std::runtime_error("checkpoint parameter order mismatch at " + name);
    const std::uint32_t rank = detail::get_u32(f);
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(detail::get_u32(f)));
    if (shape != p.value.shape) throw std::runtime_error("checkpoint shape mismatch at " + name);
    for (double& v : p.value.data) v = detail::get_f64(f);
  }
  return out;
}

}  // namespace lexfuse
