#include <gtest/gtest.h>

#include <functional>
#include <limits>

#include "oracles.h"
#include "udparse/decode.h"
#include "udparse/rng.h"

namespace udparse {
namespace {

Tensor TwoWord(double a01, double a21, double a02, double a12) {
  Tensor arc = Tensor::Zeros(3, 3);
  arc.at(0, 1) = a01;
  arc.at(2, 1) = a21;
  arc.at(0, 2) = a02;
  arc.at(1, 2) = a12;
  return arc;
}

TEST(DecodeTest, GreedyTreeIsKept) {
  const Tensor arc = TwoWord(5, 1, 1, 5);
  EXPECT_EQ(GreedyFixDecode(arc), (std::vector<int>{0, 1}));
  EXPECT_EQ(CleDecode(arc), (std::vector<int>{0, 1}));
  EXPECT_DOUBLE_EQ(TreeScore(arc, CleDecode(arc)), 10.0);
}

TEST(DecodeTest, TwoCycleIsRepairedThroughTheRoot) {
  // Greedy picks heads (2, 1); word 1 has the larger root score.
  const Tensor arc = TwoWord(3, 4, 1, 4);
  EXPECT_EQ(GreedyFixDecode(arc), (std::vector<int>{0, 1}));
}

TEST(DecodeTest, SingleWord) {
  const Tensor arc = Tensor::Zeros(2, 2);
  EXPECT_EQ(GreedyFixDecode(arc), (std::vector<int>{0}));
  EXPECT_EQ(CleDecode(arc), (std::vector<int>{0}));
}

TEST(DecodeTest, MultipleRootsKeepTheLargestMargin) {
  // All three words prefer the root; word 2 has the largest margin over its
  // best non-root head.
  Tensor arc = Tensor::Zeros(4, 4);
  arc.at(0, 1) = 5; arc.at(2, 1) = 4; arc.at(3, 1) = 0;
  arc.at(0, 2) = 5; arc.at(1, 2) = 1; arc.at(3, 2) = 0;
  arc.at(0, 3) = 5; arc.at(1, 3) = 0; arc.at(2, 3) = 3;
  EXPECT_EQ(GreedyFixDecode(arc), (std::vector<int>{2, 0, 2}));
}

TEST(DecodeTest, CleMatchesBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = 1 + rng.Below(6);
    const Tensor arc = testing::RandomArcs(n, rng);
    const auto heads = CleDecode(arc);
    ASSERT_TRUE(IsValidTree(heads));
    EXPECT_NEAR(TreeScore(arc, heads), testing::BruteForceBestTree(arc), 1e-9) << "trial " << trial;
  }
}

TEST(DecodeTest, GreedyFixIsValidAndBoundedByCle) {
  Rng rng(2);
  for (int trial = 0; trial < 2000; ++trial) {
    const size_t n = 1 + rng.Below(12);
    const Tensor arc = testing::RandomArcs(n, rng);
    const auto greedy = GreedyFixDecode(arc);
    ASSERT_TRUE(IsValidTree(greedy)) << "trial " << trial;
    EXPECT_LE(TreeScore(arc, greedy), TreeScore(arc, CleDecode(arc)) + 1e-9);
  }
}

TEST(DecodeTest, GreedyEqualsCleWhenArgmaxIsATree) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 2 + rng.Below(8);
    // Plant a random tree with a large margin.
    std::vector<int> tree(n);
    for (size_t i = 1; i < n; ++i) tree[i] = static_cast<int>(rng.Below(i)) + 1;
    tree[0] = 0;
    Tensor arc = testing::RandomArcs(n, rng);
    for (size_t d = 1; d <= n; ++d) arc.at(tree[d - 1], d) += 20.0;
    EXPECT_EQ(GreedyFixDecode(arc), tree);
    EXPECT_EQ(CleDecode(arc), tree);
  }
}

TEST(DecodeTest, ColumnShiftInvariance) {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const size_t n = 1 + rng.Below(10);
    const Tensor arc = testing::RandomArcs(n, rng);
    Tensor shifted = arc;
    for (size_t d = 1; d <= n; ++d) {
      const double c = rng.Uniform(-100.0, 100.0);
      for (size_t h = 0; h <= n; ++h) shifted.at(h, d) += c;
    }
    EXPECT_EQ(GreedyFixDecode(arc), GreedyFixDecode(shifted));
    EXPECT_EQ(CleDecode(arc), CleDecode(shifted));
  }
}

TEST(DecodeTest, ValidityChecker) {
  EXPECT_TRUE(IsValidTree({0}));
  EXPECT_TRUE(IsValidTree({2, 0, 2}));
  EXPECT_FALSE(IsValidTree({0, 0}));
  EXPECT_FALSE(IsValidTree({2, 1}));
  EXPECT_FALSE(IsValidTree({1}));
  EXPECT_FALSE(IsValidTree({0, 3, 2}));
}

TEST(DecodeTest, DecoderNames) {
  EXPECT_EQ(ParseDecoder("cle"), Decoder::kCle);
  EXPECT_EQ(ParseDecoder(DecoderName(Decoder::kGreedyFix)), Decoder::kGreedyFix);
  EXPECT_ANY_THROW(ParseDecoder("eisner"));
}

}  // namespace
}  // namespace udparse
