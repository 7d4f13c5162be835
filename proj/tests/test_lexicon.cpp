#include "lexfuse/lexicon.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <random>

using namespace lexfuse;

TEST(Lookup, AbsentWordGivesEmptyList) {
  BilingualLexicon lex;
  EXPECT_TRUE(lex.lookup("missing").empty());
}

TEST(Lookup, CountNormalization) {
  BilingualLexicon lex;
  lex.add("s", "t1", 3);
  lex.add("s", "t2", 1);
  auto cands = lex.lookup("s");
  ASSERT_EQ(cands.size(), 2u);
  EXPECT_EQ(cands[0].target, "t1");
  EXPECT_DOUBLE_EQ(cands[0].weight, 0.75);
  EXPECT_EQ(cands[1].target, "t2");
  EXPECT_DOUBLE_EQ(cands[1].weight, 0.25);
}

TEST(Lookup, MergeRenormalizes) {
  BilingualLexicon base;
  base.add("s", "t1", 3);
  base.add("s", "t2", 1);
  BilingualLexicon add;
  add.add("s", "t3", 4);
  BilingualLexicon merged = base.merged(add);
  auto cands = merged.lookup("s");
  ASSERT_EQ(cands.size(), 3u);
  // 4/8, 3/8, 1/8
  EXPECT_EQ(cands[0].target, "t3");
  EXPECT_DOUBLE_EQ(cands[0].weight, 0.5);
  EXPECT_EQ(cands[1].target, "t1");
  EXPECT_DOUBLE_EQ(cands[1].weight, 0.375);
  EXPECT_EQ(cands[2].target, "t2");
  EXPECT_DOUBLE_EQ(cands[2].weight, 0.125);
  // base unchanged (pure operation)
  EXPECT_EQ(base.lookup("s").size(), 2u);
}

TEST(Lookup, WeightsSumToOne) {
  std::mt19937_64 rng(7);
  BilingualLexicon lex;
  for (int s = 0; s < 40; ++s) {
    const int n = 1 + static_cast<int>(rng() % 25);  // some exceed the cap
    for (int t = 0; t < n; ++t)
      lex.add("s" + std::to_string(s), "t" + std::to_string(t),
              1 + static_cast<long long>(rng() % 9));
  }
  for (int s = 0; s < 40; ++s) {
    auto cands = lex.lookup("s" + std::to_string(s));
    ASSERT_FALSE(cands.empty());
    EXPECT_LE(cands.size(), static_cast<std::size_t>(BilingualLexicon::kMaxCandidates));
    double sum = 0.0;
    for (const auto& c : cands) sum += c.weight;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Lookup, CapKeepsHighestCounts) {
  BilingualLexicon lex;
  for (int t = 0; t < 20; ++t) lex.add("s", "t" + std::to_string(t), t + 1);
  auto cands = lex.lookup("s");
  ASSERT_EQ(cands.size(), static_cast<std::size_t>(BilingualLexicon::kMaxCandidates));
  EXPECT_EQ(cands.front().count, 20);
  EXPECT_EQ(cands.back().count, 5);  // counts 20..5 kept, 4..1 dropped
}

TEST(Lexicon, PositiveCountsEnforced) {
  BilingualLexicon lex;
  EXPECT_THROW(lex.add("s", "t", 0), std::invalid_argument);
  EXPECT_THROW(lex.add("s", "t", -2), std::invalid_argument);
}

TEST(Merge, IdentityAndCommutativity) {
  BilingualLexicon a, b, empty;
  a.add("s", "t", 2);
  a.add("u", "v", 1);
  b.add("s", "t", 3);
  b.add("w", "z", 5);
  BilingualLexicon ab = a.merged(b), ba = b.merged(a), ae = a.merged(empty);
  EXPECT_EQ(ab.raw(), ba.raw());
  EXPECT_EQ(ae.raw(), a.raw());
  EXPECT_EQ(ab.lookup("s")[0].count, 5);
}

TEST(Merge, Associative) {
  BilingualLexicon a, b, c;
  a.add("s", "t", 1);
  b.add("s", "t", 2);
  b.add("s", "u", 1);
  c.add("x", "y", 7);
  EXPECT_EQ(a.merged(b).merged(c).raw(), a.merged(b.merged(c)).raw());
}

TEST(EntryFeatures, BitPatterns) {
  BilingualLexicon lex;
  lex.add("uniq", "one", 2);
  lex.add("multi", "t1", 1);
  lex.add("multi", "t2", 1);
  lex.add("multi", "t3", 1);
  Vocab tgt = Vocab::build({split_tokens("uniq foo bar")}, 1);

  EntryFeatures none = entry_features("absent", lex, tgt);
  EXPECT_FALSE(none.in_dictionary);
  EXPECT_FALSE(none.unique_translation);
  EXPECT_FALSE(none.source_in_target_neural_lexicon);

  EntryFeatures all = entry_features("uniq", lex, tgt);
  EXPECT_TRUE(all.in_dictionary);
  EXPECT_TRUE(all.unique_translation);
  EXPECT_TRUE(all.source_in_target_neural_lexicon);
  EXPECT_EQ(all.bits(), (std::vector<double>{1.0, 1.0, 1.0}));

  EntryFeatures multi = entry_features("multi", lex, tgt);
  EXPECT_TRUE(multi.in_dictionary);
  EXPECT_FALSE(multi.unique_translation);
  EXPECT_FALSE(multi.source_in_target_neural_lexicon);
}

TEST(EntryFeatures, UniqueImpliesInDictionary) {
  std::mt19937_64 rng(13);
  BilingualLexicon lex;
  for (int s = 0; s < 30; ++s) {
    const int n = static_cast<int>(rng() % 3);
    for (int t = 0; t <= n; ++t)
      lex.add("s" + std::to_string(s), "t" + std::to_string(t), 1);
  }
  Vocab tgt = Vocab::build({split_tokens("t0 t1")}, 1);
  for (int s = 0; s < 40; ++s) {
    EntryFeatures f = entry_features("s" + std::to_string(s), lex, tgt);
    if (f.unique_translation) EXPECT_TRUE(f.in_dictionary);
  }
}

TEST(LexiconIo, TsvRoundTripSortedBySourceThenCount) {
  BilingualLexicon lex;
  lex.add("b", "y", 1);
  lex.add("a", "x", 2);
  lex.add("a", "w", 5);
  const std::string path = testing::TempDir() + "lex_roundtrip.tsv";
  lex.save(path);
  {
    std::ifstream f(path);
    std::string l1, l2, l3;
    std::getline(f, l1);
    std::getline(f, l2);
    std::getline(f, l3);
    EXPECT_EQ(l1, "a\tw\t5");
    EXPECT_EQ(l2, "a\tx\t2");
    EXPECT_EQ(l3, "b\ty\t1");
  }
  BilingualLexicon back = BilingualLexicon::load(path);
  EXPECT_EQ(back.raw(), lex.raw());
  std::remove(path.c_str());
}

TEST(LexiconIo, MalformedLineRejected) {
  const std::string path = testing::TempDir() + "lex_bad.tsv";
  {
    std::ofstream f(path);
    f << "only_two\tfields\n";
  }
  EXPECT_THROW(BilingualLexicon::load(path), std::runtime_error);
  std::remove(path.c_str());
}
