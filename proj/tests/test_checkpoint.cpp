#include "lexfuse/checkpoint.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace lexfuse {
namespace {

Vocab tiny_vocab(std::vector<std::pair<std::string, long long>> rows, long long bar) {
  return Vocab::from_rows(rows, bar);
}

ModelConfig tiny_config(Variant v, const Vocab& sv, const Vocab& tv) {
  ModelConfig cfg;
  cfg.embedding_dim = 3;
  cfg.hidden_dim = 4;
  cfg.layers = 2;
  cfg.variant = v;
  cfg.threshold = 0.4;
  cfg.soft_gate = true;
  cfg.dropout = 0.1;
  cfg.seed = 99;
  cfg.src_vocab = sv.size();
  cfg.tgt_vocab = tv.size();
  return cfg;
}

std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

TEST(Checkpoint, RoundTripRestoresEverything) {
  Vocab sv = tiny_vocab({{"haus", 9}, {"auto", 4}}, 2);
  Vocab tv = tiny_vocab({{"house", 9}, {"car", 4}, {"taxi", 3}}, 3);
  TranslationModel model(tiny_config(Variant::kLexPgSf, sv, tv));
  // Perturb one weight so the restore is distinguishable from a fresh init.
  model.params().at("attn_v").value[1] = 0.123456789;

  const std::string path = ::testing::TempDir() + "/rt.lxfc";
  save_checkpoint(path, model, sv, tv);
  LoadedModel loaded = load_checkpoint(path);

  EXPECT_EQ(loaded.config.embedding_dim, 3);
  EXPECT_EQ(loaded.config.hidden_dim, 4);
  EXPECT_EQ(loaded.config.layers, 2);
  EXPECT_EQ(loaded.config.variant, Variant::kLexPgSf);
  EXPECT_DOUBLE_EQ(loaded.config.threshold, 0.4);
  EXPECT_TRUE(loaded.config.soft_gate);
  EXPECT_DOUBLE_EQ(loaded.config.dropout, 0.1);
  EXPECT_EQ(loaded.config.seed, 99u);

  EXPECT_EQ(loaded.src_vocab.size(), sv.size());
  EXPECT_EQ(loaded.tgt_vocab.size(), tv.size());
  EXPECT_EQ(loaded.src_vocab.id_of("haus"), sv.id_of("haus"));
  EXPECT_EQ(loaded.tgt_vocab.count_of(tv.id_of("taxi")), 3);
  EXPECT_EQ(loaded.src_vocab.lexbar(), 2);
  EXPECT_EQ(loaded.tgt_vocab.lexbar(), 3);

  const ParamStore& a = model.params();
  const ParamStore& b = loaded.model->params();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    ASSERT_EQ(a[i].value.shape, b[i].value.shape);
    for (std::size_t k = 0; k < a[i].value.numel(); ++k)
      EXPECT_DOUBLE_EQ(a[i].value[k], b[i].value[k]) << a[i].name;
  }
}

TEST(Checkpoint, SaveIsBitIdenticalAcrossCalls) {
  Vocab sv = tiny_vocab({{"a", 2}}, 1);
  Vocab tv = tiny_vocab({{"x", 2}}, 1);
  TranslationModel model(tiny_config(Variant::kLexPgF, sv, tv));
  const std::string p1 = ::testing::TempDir() + "/b1.lxfc";
  const std::string p2 = ::testing::TempDir() + "/b2.lxfc";
  save_checkpoint(p1, model, sv, tv);
  save_checkpoint(p2, model, sv, tv);
  EXPECT_EQ(file_bytes(p1), file_bytes(p2));
}

TEST(Checkpoint, SaveLoadSaveIsBitIdentical) {
  Vocab sv = tiny_vocab({{"a", 2}, {"b", 2}}, 1);
  Vocab tv = tiny_vocab({{"x", 2}, {"y", 2}}, 1);
  TranslationModel model(tiny_config(Variant::kPgCopy, sv, tv));
  const std::string p1 = ::testing::TempDir() + "/c1.lxfc";
  const std::string p2 = ::testing::TempDir() + "/c2.lxfc";
  save_checkpoint(p1, model, sv, tv);
  LoadedModel loaded = load_checkpoint(p1);
  save_checkpoint(p2, *loaded.model, loaded.src_vocab, loaded.tgt_vocab);
  EXPECT_EQ(file_bytes(p1), file_bytes(p2));
}

TEST(Checkpoint, RejectsGarbageAndTruncation) {
  const std::string bad = ::testing::TempDir() + "/bad.lxfc";
  {
    std::ofstream f(bad, std::ios::binary);
    f << "not a checkpoint at all";
  }
  EXPECT_THROW(load_checkpoint(bad), std::runtime_error);

  Vocab sv = tiny_vocab({{"a", 2}}, 1);
  Vocab tv = tiny_vocab({{"x", 2}}, 1);
  TranslationModel model(tiny_config(Variant::kBaseline, sv, tv));
  const std::string full = ::testing::TempDir() + "/full.lxfc";
  save_checkpoint(full, model, sv, tv);
  std::string bytes = file_bytes(full);
  const std::string cut = ::testing::TempDir() + "/cut.lxfc";
  {
    std::ofstream f(cut, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  EXPECT_THROW(load_checkpoint(cut), std::runtime_error);
  EXPECT_THROW(load_checkpoint(::testing::TempDir() + "/missing.lxfc"), std::runtime_error);
}

TEST(Checkpoint, VariantChangesParameterSetButFormatHolds) {
  Vocab sv = tiny_vocab({{"a", 2}}, 1);
  Vocab tv = tiny_vocab({{"x", 2}}, 1);
  for (Variant v : {Variant::kBaseline, Variant::kPnCopy, Variant::kPgCopy, Variant::kLexPn,
                    Variant::kLexPg, Variant::kLexPgS, Variant::kLexPgF, Variant::kLexPgSf}) {
    TranslationModel model(tiny_config(v, sv, tv));
    const std::string path = ::testing::TempDir() + "/var.lxfc";
    save_checkpoint(path, model, sv, tv);
    LoadedModel loaded = load_checkpoint(path);
    EXPECT_EQ(loaded.config.variant, v);
    EXPECT_EQ(loaded.model->params().size(), model.params().size());
  }
}

TEST(Checkpoint, HigherLexBarShrinksFile) {
  // A leaner neural lexicon means smaller embedding and output tensors.
  std::vector<std::pair<std::string, long long>> rows;
  for (int i = 0; i < 200; ++i) rows.emplace_back("w" + std::to_string(i), 10);
  Vocab big_s = tiny_vocab(rows, 1), big_t = tiny_vocab(rows, 1);
  Vocab small_s = tiny_vocab({{"w0", 10}, {"w1", 10}}, 8);
  Vocab small_t = small_s;
  TranslationModel big(tiny_config(Variant::kLexPgF, big_s, big_t));
  TranslationModel small(tiny_config(Variant::kLexPgF, small_s, small_t));
  const std::string p_big = ::testing::TempDir() + "/big.lxfc";
  const std::string p_small = ::testing::TempDir() + "/small.lxfc";
  save_checkpoint(p_big, big, big_s, big_t);
  save_checkpoint(p_small, small, small_s, small_t);
  EXPECT_GT(file_bytes(p_big).size(), 2 * file_bytes(p_small).size());
}

}  // namespace
}  // namespace lexfuse
