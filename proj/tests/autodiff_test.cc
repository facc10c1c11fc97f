#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.h"
#include "udparse/autodiff.h"
#include "udparse/error.h"

namespace udparse {
namespace {

using testing::CheckGradients;
using testing::PrimitiveCatalog;
using testing::RandomTensor;

TEST(AutodiffTest, EveryPrimitivePassesFiniteDifferences) {
  Rng rng(2024);
  for (const auto& prim : PrimitiveCatalog()) {
    for (int draw = 0; draw < 5; ++draw) {
      const auto result =
          CheckGradients(prim.graph, prim.inputs(rng), 1e-5, 1e-2, prim.training, 100 + draw);
      EXPECT_LE(result.max_rel_error, 1e-4) << prim.name << " draw " << draw << ": "
                                            << result.worst;
    }
  }
}

TEST(AutodiffTest, AffineWithIdentityAndZeroBiasIsIdentity) {
  Tape tape;
  const Tensor x = Tensor::Matrix(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor eye = Tensor::Matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Var y = tape.Affine(tape.Constant(x), tape.Constant(eye), tape.Constant(Tensor::Zeros(1, 3)));
  EXPECT_EQ(tape.value(y), x);
}

TEST(AutodiffTest, SoftmaxOfEqualLogitsIsUniform) {
  Tape tape;
  const Var p = tape.Softmax(tape.Constant(Tensor::RowVector({0.0, 0.0})));
  EXPECT_DOUBLE_EQ(tape.value(p)[0], 0.5);
  EXPECT_DOUBLE_EQ(tape.value(p)[1], 0.5);
}

TEST(AutodiffTest, LstmCellWithZeroInputsIsZero) {
  // i = f = o = sigmoid(0) = 0.5, g = tanh(0) = 0, so c' = 0 and h' = 0.
  Tape tape;
  const Var out = tape.LstmCell(tape.Constant(Tensor::Zeros(1, 8)), tape.Constant(Tensor::Zeros(1, 2)));
  for (Real v : tape.value(out).values()) EXPECT_EQ(v, 0.0);
}

TEST(AutodiffTest, LinearGradientIsInput) {
  ParameterSet params;
  Rng rng(3);
  Parameter& w = params.Add("w", {3, 4}, Init::kXavier, rng);
  const Tensor x = Tensor::Matrix(1, 4, {0.5, -1.0, 2.0, 3.0});
  Tape tape;
  tape.Backward(tape.Sum(tape.Linear(tape.Constant(x), tape.Param(w))));
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(w.grad.at(i, j), x[j]);
}

TEST(AutodiffTest, CrossEntropyGradientIsSoftmaxMinusOneHot) {
  ParameterSet params;
  Parameter& logits = params.Add("z", Tensor::RowVector({0.3, -1.2, 2.0}), true);
  Tape tape;
  const std::vector<size_t> target = {1};
  tape.Backward(tape.SoftmaxCrossEntropy(tape.Param(logits), target));
  const double z = std::exp(0.3) + std::exp(-1.2) + std::exp(2.0);
  EXPECT_NEAR(logits.grad[0], std::exp(0.3) / z, 1e-12);
  EXPECT_NEAR(logits.grad[1], std::exp(-1.2) / z - 1.0, 1e-12);
  EXPECT_NEAR(logits.grad[2], std::exp(2.0) / z, 1e-12);
}

TEST(AutodiffTest, UnreachableParameterKeepsZeroGradient) {
  ParameterSet params;
  Rng rng(4);
  Parameter& used = params.Add("used", {2, 2}, Init::kXavier, rng);
  Parameter& unused = params.Add("unused", {2, 2}, Init::kXavier, rng);
  Tape tape;
  tape.Param(unused);
  tape.Backward(tape.Sum(tape.Param(used)));
  for (Real g : unused.grad.values()) EXPECT_EQ(g, 0.0);
  for (Real g : used.grad.values()) EXPECT_EQ(g, 1.0);
}

TEST(AutodiffTest, NonScalarLossIsRejected) {
  Tape tape;
  const Var v = tape.Constant(Tensor::Zeros(2, 2));
  EXPECT_THROW(tape.Backward(v), DimensionError);
}

TEST(AutodiffTest, ShapeMismatchNamesPrimitive) {
  Tape tape;
  try {
    tape.MatMul(tape.Constant(Tensor::Zeros(2, 3)), tape.Constant(Tensor::Zeros(2, 3)));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
  }
}

TEST(AutodiffTest, NonFiniteForwardValueThrows) {
  Tape tape;
  const Var big = tape.Constant(Tensor::RowVector({1e308}));
  EXPECT_THROW(tape.Scale(big, 1e10), NumericError);
}

TEST(AutodiffTest, DropoutIsIdentityAtTestTime) {
  Tape tape(false);
  const Var x = tape.Constant(Tensor::RowVector({1.0, 2.0, 3.0}));
  const Var y = tape.Dropout(x, 0.5);
  EXPECT_EQ(y.id, x.id);
}

TEST(AutodiffTest, DropoutIsUnbiasedAtTrainTime) {
  Rng rng(5);
  Tape tape(true, &rng);
  const size_t n = 20000;
  const Var x = tape.Constant(Tensor({1, n}, 1.0));
  const Var y = tape.Dropout(x, 0.33);
  double mean = 0.0;
  for (Real v : tape.value(y).values()) mean += v;
  mean /= static_cast<double>(n);
  EXPECT_NEAR(mean, 1.0, 0.02);
}

TEST(AutodiffTest, BilinearMatchesExplicitForm) {
  Rng rng(6);
  const Tensor x = RandomTensor({3, 2}, rng);
  const Tensor u = RandomTensor({2, 2, 4}, rng);
  const Tensor y = RandomTensor({3, 4}, rng);
  Tape tape;
  const Tensor out = tape.value(tape.Bilinear(tape.Constant(x), tape.Constant(u), tape.Constant(y)));
  for (size_t i = 0; i < 3; ++i) {
    for (size_t r = 0; r < 2; ++r) {
      double expect = 0.0;
      for (size_t a = 0; a < 2; ++a)
        for (size_t b = 0; b < 4; ++b) expect += x.at(i, a) * u[(r * 2 + a) * 4 + b] * y.at(i, b);
      EXPECT_NEAR(out.at(i, r), expect, 1e-12);
    }
  }
}

TEST(AutodiffTest, ConvMaxPoolShortSequenceIsPadded) {
  Tape tape;
  // One 3-wide filter of ones over a 1-row input: only the first tap sees data.
  const Var out = tape.ConvMaxPool(tape.Constant(Tensor::Matrix(1, 1, {2.0})),
                                   tape.Constant(Tensor::Matrix(1, 3, {1, 1, 1})),
                                   tape.Constant(Tensor::Matrix(1, 1, {0.5})), 3);
  EXPECT_DOUBLE_EQ(tape.value(out)[0], 2.5);
}

}  // namespace
}  // namespace udparse
