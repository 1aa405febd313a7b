#include "actc/embeddings.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "actc/vocab.hpp"

namespace actc {
namespace {

namespace fs = std::filesystem;

Vocab abc_vocab() {
  Vocab v(UnitKind::kWord);
  v.add_token("a");
  v.add_token("b");
  v.add_token("c");
  return v;
}

TEST(Cooccurrence, InverseDistanceWeights) {
  const Vocab v = abc_vocab();
  const int a = v.id_of("a"), b = v.id_of("b"), c = v.id_of("c");
  const CooccurrenceMatrix x = build_cooccurrence({{"a", "b", "c"}}, v, 2);
  EXPECT_DOUBLE_EQ(x.at(a, b), 1.0);
  EXPECT_DOUBLE_EQ(x.at(b, c), 1.0);
  EXPECT_DOUBLE_EQ(x.at(a, c), 0.5);
  EXPECT_DOUBLE_EQ(x.at(b, a), 1.0);  // symmetric
  EXPECT_DOUBLE_EQ(x.at(c, a), 0.5);
  EXPECT_DOUBLE_EQ(x.at(a, a), 0.0);
}

TEST(Cooccurrence, WindowLimitsReach) {
  const Vocab v = abc_vocab();
  const CooccurrenceMatrix x = build_cooccurrence({{"a", "b", "c"}}, v, 1);
  EXPECT_DOUBLE_EQ(x.at(v.id_of("a"), v.id_of("c")), 0.0);
  EXPECT_DOUBLE_EQ(x.at(v.id_of("a"), v.id_of("b")), 1.0);
}

TEST(Cooccurrence, UnknownTokensCountAsOov) {
  const Vocab v = abc_vocab();
  const CooccurrenceMatrix x = build_cooccurrence({{"a", "zzz", "b"}}, v, 2);
  EXPECT_DOUBLE_EQ(x.at(v.id_of("a"), Vocab::kOovId), 1.0);
  EXPECT_DOUBLE_EQ(x.at(Vocab::kOovId, v.id_of("b")), 1.0);
  EXPECT_DOUBLE_EQ(x.at(v.id_of("a"), v.id_of("b")), 0.5);
}

TEST(Cooccurrence, ReversedTextGivesSameCounts) {
  const Vocab v = abc_vocab();
  const std::vector<std::vector<std::string>> text = {{"a", "b", "a", "c"}, {"c", "c", "b"}};
  std::vector<std::vector<std::string>> reversed = text;
  for (auto& sent : reversed) std::reverse(sent.begin(), sent.end());
  const CooccurrenceMatrix x1 = build_cooccurrence(text, v, 3);
  const CooccurrenceMatrix x2 = build_cooccurrence(reversed, v, 3);
  EXPECT_EQ(x1.counts.size(), x2.counts.size());
  for (const auto& [ij, count] : x1.counts) EXPECT_DOUBLE_EQ(x2.at(ij.first, ij.second), count);
}

TEST(Cooccurrence, RepeatedSentencesAccumulate) {
  const Vocab v = abc_vocab();
  const CooccurrenceMatrix x = build_cooccurrence({{"a", "b"}, {"a", "b"}}, v, 1);
  EXPECT_DOUBLE_EQ(x.at(v.id_of("a"), v.id_of("b")), 2.0);
}

TEST(GloveWeight, CapsAtOne) {
  EXPECT_DOUBLE_EQ(detail::glove_weight(100.0), 1.0);
  EXPECT_DOUBLE_EQ(detail::glove_weight(250.0), 1.0);
  EXPECT_NEAR(detail::glove_weight(12.5), std::pow(0.125, 0.75), 1e-15);
  EXPECT_LT(detail::glove_weight(1.0), detail::glove_weight(2.0));
}

TEST(TrainEmbeddings, ObjectiveDecreases) {
  const Vocab v = abc_vocab();
  const std::vector<std::vector<std::string>> text = {
      {"a", "b", "c", "a", "b"}, {"c", "a", "c", "b"}, {"b", "b", "a", "c", "c", "a"}};
  const CooccurrenceMatrix x = build_cooccurrence(text, v, 3);
  std::vector<double> log;
  train_embeddings(x, v, 4, 40, 0.05, 7, &log);
  ASSERT_EQ(log.size(), 41u);
  EXPECT_LT(log.back(), log.front());
  EXPECT_LT(log.back(), 0.5 * log.front());
}

// One pair with count e: the model only has to hit ln(e) = 1 with a single
// bilinear term, so the weighted squared error is driven to ~zero.
TEST(TrainEmbeddings, SinglePairIsFitExactly) {
  const Vocab v = abc_vocab();
  CooccurrenceMatrix x;
  x.add(v.id_of("a"), v.id_of("b"), std::exp(1.0));
  std::vector<double> log;
  train_embeddings(x, v, 2, 500, 0.1, 3, &log);
  EXPECT_LT(log.back(), 1e-6);
}

TEST(TrainEmbeddings, RowsOnlyForWordsInCounts) {
  const Vocab v = abc_vocab();
  const CooccurrenceMatrix x = build_cooccurrence({{"a", "b"}}, v, 1);
  const EmbeddingTable t = train_embeddings(x, v, 3, 5, 0.05, 1);
  EXPECT_TRUE(t.has("a"));
  EXPECT_TRUE(t.has("b"));
  EXPECT_FALSE(t.has("c"));
  EXPECT_EQ(t.dim, 3);
}

TEST(TrainEmbeddings, DeterministicGivenSeed) {
  const Vocab v = abc_vocab();
  const CooccurrenceMatrix x = build_cooccurrence({{"a", "b", "c", "a"}}, v, 2);
  const EmbeddingTable t1 = train_embeddings(x, v, 4, 20, 0.05, 42);
  const EmbeddingTable t2 = train_embeddings(x, v, 4, 20, 0.05, 42);
  const EmbeddingTable t3 = train_embeddings(x, v, 4, 20, 0.05, 43);
  ASSERT_EQ(t1.rows.size(), t2.rows.size());
  for (const auto& [word, vec] : t1.rows) {
    ASSERT_TRUE(t2.has(word));
    EXPECT_TRUE(vec == t2.rows.at(word)) << word;
  }
  bool any_diff = false;
  for (const auto& [word, vec] : t1.rows) any_diff = any_diff || vec != t3.rows.at(word);
  EXPECT_TRUE(any_diff);
}

TEST(TrainEmbeddings, AllZeroCountsRejected) {
  const Vocab v = abc_vocab();
  CooccurrenceMatrix x;
  EXPECT_THROW(train_embeddings(x, v, 2, 5, 0.05, 1), std::invalid_argument);
}

TEST(PrepareInitTable, NormalizesAndScales) {
  const Vocab v = abc_vocab();
  EmbeddingTable t;
  t.dim = 2;
  t.rows["a"] = Eigen::Vector2d(3.0, 4.0);
  const EmbeddingTable prepared = prepare_init_table({t}, v);
  ASSERT_TRUE(prepared.has("a"));
  EXPECT_NEAR(prepared.rows.at("a")(0), 0.06, 1e-15);
  EXPECT_NEAR(prepared.rows.at("a")(1), 0.08, 1e-15);
  EXPECT_NEAR(prepared.rows.at("a").norm(), 0.1, 1e-15);
}

TEST(PrepareInitTable, AveragesAcrossTables) {
  const Vocab v = abc_vocab();
  EmbeddingTable t1, t2;
  t1.dim = t2.dim = 2;
  t1.rows["a"] = Eigen::Vector2d(1.0, 0.0);
  t2.rows["a"] = Eigen::Vector2d(0.0, 1.0);
  t1.rows["b"] = Eigen::Vector2d(2.0, 0.0);  // only present in one table
  const EmbeddingTable prepared = prepare_init_table({t1, t2}, v);
  const double diag = 0.1 / std::sqrt(2.0);
  EXPECT_NEAR(prepared.rows.at("a")(0), diag, 1e-15);
  EXPECT_NEAR(prepared.rows.at("a")(1), diag, 1e-15);
  EXPECT_NEAR(prepared.rows.at("b")(0), 0.1, 1e-15);
  EXPECT_NEAR(prepared.rows.at("b")(1), 0.0, 1e-15);
}

TEST(PrepareInitTable, DuplicateTablesMatchSingle) {
  const Vocab v = abc_vocab();
  EmbeddingTable t;
  t.dim = 3;
  t.rows["a"] = Eigen::Vector3d(0.3, -1.2, 2.0);
  t.rows["c"] = Eigen::Vector3d(-0.5, 0.25, 0.125);
  const EmbeddingTable one = prepare_init_table({t}, v);
  const EmbeddingTable two = prepare_init_table({t, t}, v);
  ASSERT_EQ(one.rows.size(), two.rows.size());
  for (const auto& [word, vec] : one.rows)
    EXPECT_LT((vec - two.rows.at(word)).norm(), 1e-15) << word;
}

TEST(PrepareInitTable, UnusableWordsAreLeftOut) {
  const Vocab v = abc_vocab();
  EmbeddingTable t;
  t.dim = 2;
  t.rows["a"] = Eigen::Vector2d(0.0, 0.0);  // averages to zero: undefined direction
  t.rows["b"] = Eigen::Vector2d(1.0, 1.0);
  const EmbeddingTable prepared = prepare_init_table({t}, v);
  EXPECT_FALSE(prepared.has("a"));
  EXPECT_TRUE(prepared.has("b"));
  EXPECT_FALSE(prepared.has("c"));  // absent from every table
}

TEST(PrepareInitTable, AllRowNormsArePointOne) {
  const Vocab v = abc_vocab();
  Rng rng(9);
  std::normal_distribution<double> normal(0.0, 2.0);
  EmbeddingTable t;
  t.dim = 5;
  for (const std::string word : {"a", "b", "c"}) {
    Eigen::VectorXd vec(5);
    for (int d = 0; d < 5; ++d) vec(d) = normal(rng);
    t.rows[word] = vec;
  }
  const EmbeddingTable prepared = prepare_init_table({t}, v);
  ASSERT_EQ(prepared.rows.size(), 3u);
  for (const auto& [word, vec] : prepared.rows) EXPECT_NEAR(vec.norm(), 0.1, 1e-9) << word;
}

TEST(PrepareInitTable, RejectsMismatchedDimensions) {
  EmbeddingTable t1, t2;
  t1.dim = 2;
  t2.dim = 3;
  EXPECT_THROW(prepare_init_table({t1, t2}, abc_vocab()), std::invalid_argument);
  EXPECT_THROW(prepare_init_table({}, abc_vocab()), std::invalid_argument);
}

TEST(EmbeddingFile, RoundTripIsExact) {
  const Vocab v = abc_vocab();
  const CooccurrenceMatrix x = build_cooccurrence({{"a", "b", "c", "b", "a"}}, v, 2);
  const EmbeddingTable t = train_embeddings(x, v, 4, 25, 0.05, 5);
  const std::string path = (fs::temp_directory_path() / "actc_emb_roundtrip.txt").string();
  save_embeddings(path, t);
  const EmbeddingTable loaded = load_embeddings(path);
  ASSERT_EQ(loaded.rows.size(), t.rows.size());
  EXPECT_EQ(loaded.dim, t.dim);
  for (const auto& [word, vec] : t.rows) {
    ASSERT_TRUE(loaded.has(word));
    for (Eigen::Index d = 0; d < vec.size(); ++d)
      EXPECT_DOUBLE_EQ(loaded.rows.at(word)(d), vec(d));
  }
  fs::remove(path);
}

}  // namespace
}  // namespace actc
