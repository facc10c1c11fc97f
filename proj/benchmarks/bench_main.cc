#include <benchmark/benchmark.h>

#include <limits>
#include <vector>

#include "udparse/autodiff.h"
#include "udparse/decode.h"
#include "udparse/nn.h"
#include "udparse/params.h"
#include "udparse/rng.h"
#include "udparse/segment.h"
#include "udparse/tensor.h"

namespace udparse {
namespace {

Tensor RandomMatrix(size_t rows, size_t cols, Rng& rng) {
  Tensor t = Tensor::Zeros(rows, cols);
  for (Real& v : t.values()) v = rng.Normal();
  return t;
}

void BM_MatMulForwardBackward(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = RandomMatrix(n, n, rng), b = RandomMatrix(n, n, rng);
  for (auto _ : state) {
    Tape tape;
    const Var loss = tape.Sum(tape.MatMul(tape.Constant(a), tape.Constant(b)));
    tape.Backward(loss);
    benchmark::DoNotOptimize(tape.value(loss)[0]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n));
}
BENCHMARK(BM_MatMulForwardBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_BiLstmSentence(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  Rng rng(2);
  ParameterSet params;
  const nn::BiLstm lstm = nn::BiLstm::Create(params, "lstm", 100, 128, 2, rng);
  const Tensor x = RandomMatrix(n, 100, rng);
  for (auto _ : state) {
    Tape tape;
    const Var loss = tape.Sum(lstm.Run(tape, tape.Constant(x)));
    tape.Backward(loss);
    params.ZeroGrad();
    benchmark::DoNotOptimize(tape.value(loss)[0]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_BiLstmSentence)->Arg(10)->Arg(25)->Arg(50);

Tensor RandomArcs(size_t n, Rng& rng) {
  Tensor arc = Tensor::Zeros(n + 1, n + 1);
  for (size_t h = 0; h <= n; ++h)
    for (size_t d = 0; d <= n; ++d)
      arc.at(h, d) = h == d ? -std::numeric_limits<Real>::infinity() : rng.Uniform(-5.0, 5.0);
  return arc;
}

void BM_Decode(benchmark::State& state, Decoder decoder) {
  const size_t n = static_cast<size_t>(state.range(0));
  Rng rng(3);
  const Tensor arc = RandomArcs(n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(DecodeHeads(arc, decoder));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK_CAPTURE(BM_Decode, greedy_fix, Decoder::kGreedyFix)->Arg(10)->Arg(40)->Arg(100);
BENCHMARK_CAPTURE(BM_Decode, cle, Decoder::kCle)->Arg(10)->Arg(40)->Arg(100);

void BM_BiesViterbi(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  Rng rng(4);
  const Tensor scores = RandomMatrix(n, kBiesLabels, rng);
  for (auto _ : state) benchmark::DoNotOptimize(BiesViterbi(scores));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_BiesViterbi)->Arg(100)->Arg(1000);

}  // namespace
}  // namespace udparse
BENCHMARK_MAIN();
