#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <random>

#include "udparse/bilm.h"
#include "udparse/error.h"

namespace udparse {
namespace {

BiLmConfig Small() {
  BiLmConfig c;
  c.char_dim = 4;
  c.filters_per_width = 4;
  c.hidden = 6;
  c.epochs = 1;
  return c;
}

const std::vector<std::vector<std::string>> kCorpus = {
    {"the", "cat", "sat"}, {"a", "dog", "sat", "down"}, {"the", "dog", "ran"}};

double Cosine(std::span<const Real> a, std::span<const Real> b) {
  double ab = 0, aa = 0, bb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

TEST(BiLmTest, VocabularyOrder) {
  const BiLmModel m = BiLmModel::Create(kCorpus, Small());
  const Vocab& v = m.words();
  EXPECT_EQ(v[0], kUnk);
  EXPECT_EQ(v[1], kBos);
  EXPECT_EQ(v[2], kEos);
  // "sat", "the" and "dog" occur twice; ties keep first occurrence.
  EXPECT_EQ(v[3], "the");
  EXPECT_EQ(v[4], "sat");
  EXPECT_EQ(v[5], "dog");
}

TEST(BiLmTest, FullWindowSampledSoftmaxIsBitIdentical) {
  const BiLmModel m = BiLmModel::Create(kCorpus, Small());
  for (const auto& s : kCorpus) {
    Tape t1, t2, t3;
    const double full = t1.value(m.Loss(t1, s, 0))[0];
    EXPECT_EQ(t2.value(m.Loss(t2, s, m.words().size()))[0], full);
    EXPECT_EQ(t3.value(m.Loss(t3, s, 8192))[0], full);
  }
}

TEST(BiLmTest, NarrowWindowNeverExceedsFullLoss) {
  const BiLmModel m = BiLmModel::Create(kCorpus, Small());
  for (const auto& s : kCorpus) {
    Tape t1, t2;
    EXPECT_LE(t2.value(m.Loss(t2, s, 3))[0], t1.value(m.Loss(t1, s, 0))[0]);
  }
}

TEST(BiLmTest, StatesAreCausal) {
  const BiLmModel m = TrainBiLm(kCorpus, Small());
  const std::vector<std::string> a = {"the", "cat", "sat", "down", "a"};
  std::vector<std::string> b = a;
  const size_t k = 2;
  b[k] = "dog";
  const auto la = m.LayerStates(a), lb = m.LayerStates(b);
  const size_t h = m.hidden();
  for (size_t layer = 1; layer < la.size(); ++layer) {
    for (size_t i = 0; i < a.size(); ++i) {
      bool fw_same = true, bw_same = true;
      for (size_t j = 0; j < h; ++j) {
        fw_same &= la[layer].at(i, j) == lb[layer].at(i, j);
        bw_same &= la[layer].at(i, h + j) == lb[layer].at(i, h + j);
      }
      EXPECT_EQ(fw_same, i < k) << "forward layer " << layer << " position " << i;
      EXPECT_EQ(bw_same, i > k) << "backward layer " << layer << " position " << i;
    }
  }
}

TEST(BiLmTest, LayerZeroIsTheDuplicatedTokenVector) {
  const BiLmModel m = TrainBiLm(kCorpus, Small());
  const Tensor v = m.Contextualize({"the", "dog", "zzz"}, LmMode::kLayer0);
  ASSERT_EQ(v.cols(), m.output_dim());
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < m.hidden(); ++j) EXPECT_EQ(v.at(i, j), v.at(i, m.hidden() + j));
}

TEST(BiLmTest, SumWithSilentLstmLayersEqualsLayerZero) {
  BiLmModel m = TrainBiLm(kCorpus, Small());
  for (Parameter* p : m.params().All()) {
    if (p->name.find("lstm") != std::string::npos || p->name.find(".fw") != std::string::npos ||
        p->name.find(".bw") != std::string::npos) {
      p->value.Fill(0.0);
    }
  }
  const std::vector<std::string> s = {"a", "cat", "ran"};
  EXPECT_EQ(m.Contextualize(s, LmMode::kSum012), m.Contextualize(s, LmMode::kLayer0));
}

TEST(BiLmTest, SameWordDiffersAcrossContexts) {
  BiLmConfig c = Small();
  c.epochs = 5;
  const BiLmModel m = TrainBiLm(kCorpus, c);
  const Tensor a = m.Contextualize({"the", "dog", "ran"}, LmMode::kSum012);
  const Tensor b = m.Contextualize({"a", "dog", "sat", "down"}, LmMode::kSum012);
  EXPECT_LT(Cosine(a.row(1), b.row(1)), 1.0 - 1e-9);
  // The token layer alone has no context.
  const Tensor a0 = m.Contextualize({"the", "dog", "ran"}, LmMode::kLayer0);
  const Tensor b0 = m.Contextualize({"a", "dog", "sat", "down"}, LmMode::kLayer0);
  for (size_t j = 0; j < a0.cols(); ++j) EXPECT_EQ(a0.at(1, j), b0.at(1, j));
}

TEST(BiLmTest, PeriodicCorpusIsPredictable) {
  std::vector<std::vector<std::string>> corpus(64);
  for (auto& s : corpus)
    for (int i = 0; i < 12; ++i) s.push_back(i % 2 ? "b" : "a");
  BiLmConfig c = Small();
  c.hidden = 8;
  c.layers = 1;
  c.epochs = 60;
  c.learning_rate = 2e-2;
  EXPECT_LE(TrainBiLm(corpus, c).Perplexity(corpus), 1.05);
}

TEST(BiLmTest, UniformSourceHasPerplexityFour) {
  // Long sentences keep the end-of-sentence mass, which cannot be
  // predicted from position, from inflating the estimate.
  std::mt19937_64 gen(5);
  const std::array<std::string, 4> symbols = {"a", "b", "c", "d"};
  auto sample = [&](size_t n) {
    std::vector<std::vector<std::string>> out(n);
    for (auto& s : out)
      for (int i = 0; i < 100; ++i) s.push_back(symbols[gen() % 4]);
    return out;
  };
  const auto train = sample(80), held_out = sample(20);
  BiLmConfig c = Small();
  c.hidden = 8;
  c.layers = 1;
  c.epochs = 20;
  c.learning_rate = 3e-3;
  EXPECT_NEAR(TrainBiLm(train, c).Perplexity(held_out), 4.0, 0.2);
}

TEST(BiLmTest, SaveLoadPreservesOutputs) {
  const BiLmModel m = TrainBiLm(kCorpus, Small());
  const std::string dir = (std::filesystem::temp_directory_path() / "udparse_bilm_test").string();
  m.Save(dir);
  const BiLmModel back = BiLmModel::Load(dir);
  const std::vector<std::string> s = {"the", "cat", "unseen"};
  EXPECT_EQ(back.Contextualize(s, LmMode::kSum012), m.Contextualize(s, LmMode::kSum012));
  EXPECT_EQ(back.Perplexity(kCorpus), m.Perplexity(kCorpus));
  std::filesystem::remove_all(dir);
}

TEST(BiLmTest, TrainingIsDeterministic) {
  const BiLmModel a = TrainBiLm(kCorpus, Small());
  const BiLmModel b = TrainBiLm(kCorpus, Small());
  EXPECT_EQ(a.Perplexity(kCorpus), b.Perplexity(kCorpus));
}

TEST(BiLmTest, BadInputsAreRejected) {
  EXPECT_THROW(TrainBiLm({}, Small()), DataError);
  EXPECT_THROW(TrainBiLm({{}}, Small()), DataError);
  BiLmConfig c = Small();
  c.sampled_softmax = true;
  c.window = 0;
  EXPECT_THROW(TrainBiLm(kCorpus, c), Error);
  EXPECT_EQ(ParseLmMode(LmModeName(LmMode::kLayer0)), LmMode::kLayer0);
  EXPECT_ANY_THROW(ParseLmMode("layer7"));
}

}  // namespace
}  // namespace udparse
