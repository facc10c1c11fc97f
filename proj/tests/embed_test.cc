#include <gtest/gtest.h>

#include <sstream>

#include "synthetic.h"
#include "udparse/embed.h"
#include "udparse/error.h"
#include "udparse/tagger.h"

namespace udparse {
namespace {

std::string TableText(size_t words, size_t dim, bool header) {
  std::ostringstream out;
  if (header) out << words << " " << dim << "\n";
  for (size_t i = 0; i < words; ++i) {
    out << "w" << i;
    for (size_t k = 0; k < dim; ++k) out << " " << (0.125 * static_cast<double>(i) - 0.5 * k);
    out << "\n";
  }
  return out.str();
}

TEST(StaticEmbeddingsTest, KeepFractionTruncatesByRank) {
  std::istringstream in(TableText(10, 3, false));
  const StaticEmbeddings e = StaticEmbeddings::Load(in, 0.1);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e.words()[0], "w0");
}

TEST(StaticEmbeddingsTest, KeepAllIsBitExact) {
  std::istringstream in(TableText(10, 3, false));
  const StaticEmbeddings e = StaticEmbeddings::Load(in, 1.0);
  ASSERT_EQ(e.size(), 10u);
  for (size_t i = 0; i < 10; ++i)
    for (size_t k = 0; k < 3; ++k)
      EXPECT_EQ(e.Vector(i)[k], 0.125 * static_cast<double>(i) - 0.5 * k);
}

TEST(StaticEmbeddingsTest, HeaderIsDetected) {
  std::istringstream in(TableText(20, 5, true));
  const StaticEmbeddings e = StaticEmbeddings::Load(in, 0.5);
  EXPECT_EQ(e.size(), 10u);
  EXPECT_EQ(e.dim(), 5u);
  EXPECT_EQ(e.table().rows(), 11u);  // plus the zero row for unknown words
}

TEST(StaticEmbeddingsTest, UnknownWordsMapToZeroRow) {
  std::istringstream in(TableText(4, 2, false));
  const StaticEmbeddings e = StaticEmbeddings::Load(in);
  EXPECT_EQ(e.Index("nope"), e.size());
  for (Real v : e.table().row(e.size())) EXPECT_EQ(v, 0.0);
}

TEST(StaticEmbeddingsTest, InconsistentDimensionIsAParseError) {
  std::istringstream in("a 1 2 3\nb 1 2\n");
  EXPECT_THROW(StaticEmbeddings::Load(in), ParseError);
}

TEST(StaticEmbeddingsTest, EmptyFileIsADataError) {
  std::istringstream in("");
  EXPECT_THROW(StaticEmbeddings::Load(in), DataError);
}

TEST(StaticEmbeddingsTest, SaveLoadRoundTrip) {
  std::istringstream in(TableText(6, 4, false));
  const StaticEmbeddings e = StaticEmbeddings::Load(in);
  std::stringstream ss;
  e.Save(ss);
  const StaticEmbeddings back = StaticEmbeddings::Load(ss);
  EXPECT_EQ(back.words(), e.words());
  EXPECT_EQ(back.table(), e.table());
}

TEST(TokenTableTest, VocabularyHonoursMinimumCount) {
  testing::Grammar g;
  Treebank tb = g.Corpus(2, 1);
  tb.sentences[0].tokens[0].form = "hapax";
  std::vector<size_t> counts;
  const Vocab v = TokenTable::BuildVocab({&tb}, 2, &counts);
  EXPECT_EQ(v[0], "<unk>");
  EXPECT_FALSE(v.Contains("hapax"));
  EXPECT_TRUE(v.Contains("."));
  EXPECT_EQ(counts.size(), v.size());
  EXPECT_EQ(counts[*v.Find(".")], 2u);
}

TEST(TokenTableTest, RareWordsAreReplacedOnlyWhileTraining) {
  TokenTable t;
  t.vocab = Vocab({"<unk>", "rare", "common"});
  t.counts = {0, 2, 50};
  t.min_count = 2;
  t.unk_replace = 0.5;
  Rng rng(1);
  size_t replaced = 0;
  for (int i = 0; i < 4000; ++i) {
    if (t.Index("rare", &rng) == 0) ++replaced;
    EXPECT_EQ(t.Index("common", &rng), 2u);
  }
  EXPECT_NEAR(static_cast<double>(replaced) / 4000.0, 0.5, 0.03);
  EXPECT_EQ(t.Index("rare", nullptr), 1u);
  EXPECT_EQ(t.Index("unseen", nullptr), 0u);
}

// A two-dimensional embedder over the words "x" and "y" whose parameters the
// tests set by hand.
struct HandEmbedder {
  ParameterSet params;
  WordEmbedder embedder;
  Treebank corpus;

  explicit HandEmbedder(std::shared_ptr<const StaticEmbeddings> pretrained,
                        std::shared_ptr<const BiLmModel> lm = nullptr,
                        LmMode mode = LmMode::kNone) {
    corpus = ReadConlluString(
        "1\tx\t_\t_\t_\t_\t0\troot\t_\t_\n2\ty\t_\t_\t_\t_\t1\tdep\t_\t_\n\n"
        "1\tx\t_\t_\t_\t_\t0\troot\t_\t_\n2\ty\t_\t_\t_\t_\t1\tdep\t_\t_\n\n");
    EmbedderConfig c;
    c.dim = 2;
    c.char_dim = 3;
    c.char_hidden = 2;
    c.lm_mode = mode;
    Rng rng(1);
    embedder = WordEmbedder::Create(params, "word", c, {&corpus}, std::move(pretrained),
                                    std::move(lm), rng);
  }
  void Zero() {
    for (Parameter* p : params.All()) p->value.Fill(0.0);
  }
  Tensor Compose(const std::vector<std::string>& forms) {
    Tape tape;
    return tape.value(embedder.Compose(tape, forms, nullptr, nullptr));
  }
};

std::shared_ptr<const StaticEmbeddings> Pretrained(std::vector<Real> x, std::vector<Real> y) {
  std::vector<Real> v = x;
  v.insert(v.end(), y.begin(), y.end());
  return std::make_shared<StaticEmbeddings>(std::vector<std::string>{"x", "y"},
                                            Tensor::Matrix(2, 2, v));
}

TEST(WordEmbedderTest, AllZeroComponentsGiveZeroVectors) {
  HandEmbedder h(Pretrained({0, 0}, {0, 0}));
  h.Zero();
  const Tensor out = h.Compose({"x", "y", "z"});
  for (Real v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(WordEmbedderTest, ComponentsAreSummed) {
  // w = (1, 0), p = (0, 1), v_hat = (1, 1) gives (2, 2).
  HandEmbedder h(Pretrained({0, 1}, {0, 1}));
  h.Zero();
  Parameter& tokens = h.params.Get("word.tokens");
  const size_t x = *Vocab({"<unk>", "x", "y"}).Find("x");
  tokens.value.at(x, 0) = 1.0;
  h.params.Get("word.chars.proj.b").value = Tensor::RowVector({1.0, 1.0});
  const Tensor out = h.Compose({"x"});
  EXPECT_EQ(out.at(0, 0), 2.0);
  EXPECT_EQ(out.at(0, 1), 2.0);
}

TEST(WordEmbedderTest, PermutationEquivariantWithoutLm) {
  HandEmbedder h(Pretrained({0.3, -1}, {2, 0.5}));
  const Tensor a = h.Compose({"x", "y", "q"});
  const Tensor b = h.Compose({"q", "x", "y"});
  for (size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(a.at(0, k), b.at(1, k));
    EXPECT_EQ(a.at(1, k), b.at(2, k));
    EXPECT_EQ(a.at(2, k), b.at(0, k));
  }
}

TEST(WordEmbedderTest, MismatchedPretrainedDimensionIsRejected) {
  auto wide = std::make_shared<StaticEmbeddings>(std::vector<std::string>{"x"},
                                                 Tensor::Matrix(1, 3, {1, 2, 3}));
  EXPECT_THROW(HandEmbedder h(wide), DimensionError);
}

TEST(WordEmbedderTest, SumRejectsMismatchedParts) {
  Tape tape;
  const Var parts[2] = {tape.Constant(Tensor::Zeros(2, 3)), tape.Constant(Tensor::Zeros(2, 4))};
  EXPECT_THROW(SumWordParts(tape, parts), DimensionError);
}

TEST(WordEmbedderTest, ZeroLmProjectionEqualsPlainMode) {
  std::vector<std::vector<std::string>> corpus = {{"x", "y"}, {"y", "x"}};
  BiLmConfig lc;
  lc.char_dim = 4;
  lc.filters_per_width = 3;
  lc.hidden = 4;
  lc.epochs = 1;
  auto lm = std::make_shared<BiLmModel>(TrainBiLm(corpus, lc));
  HandEmbedder plain(Pretrained({0.3, -1}, {2, 0.5}));
  HandEmbedder with_lm(Pretrained({0.3, -1}, {2, 0.5}), lm, LmMode::kSum012);
  for (Parameter* p : with_lm.params.All()) {
    if (p->name == "word.elmo") {
      p->value.Fill(0.0);
    } else {
      p->value = plain.params.Get(p->name).value;
    }
  }
  EXPECT_EQ(plain.Compose({"x", "y", "x"}), with_lm.Compose({"x", "y", "x"}));
}

TEST(WordEmbedderTest, TrainingNeverTouchesFrozenResources) {
  testing::Grammar g;
  const Treebank train = g.Corpus(10, 3);
  auto pretrained =
      std::make_shared<StaticEmbeddings>(testing::ClassEmbeddings(g, 16, 5));
  std::vector<std::vector<std::string>> corpus;
  for (const Sentence& s : train.sentences) corpus.push_back(s.Forms());
  BiLmConfig lc;
  lc.char_dim = 4;
  lc.filters_per_width = 4;
  lc.hidden = 8;
  lc.epochs = 1;
  auto lm = std::make_shared<BiLmModel>(TrainBiLm(corpus, lc));
  const Tensor table_before = pretrained->table();
  const auto lm_before = lm->params().Snapshot();

  TaggerConfig tc;
  tc.embed.dim = 16;
  tc.embed.lm_mode = LmMode::kSum012;
  tc.hidden = 8;
  tc.layers = 1;
  tc.mlp = 8;
  tc.train.epochs = 3;
  TrainTagger(train, train, tc, pretrained, lm);
  EXPECT_EQ(pretrained->table(), table_before);
  const auto lm_after = lm->params().Snapshot();
  ASSERT_EQ(lm_after.size(), lm_before.size());
  for (size_t i = 0; i < lm_after.size(); ++i) EXPECT_EQ(lm_after[i], lm_before[i]);
}

}  // namespace
}  // namespace udparse
