#include "gradcheck.h"

namespace udparse::testing {

namespace {

size_t Dim(Rng& rng, size_t lo = 1, size_t hi = 8) { return lo + rng.Below(hi - lo + 1); }

// Values bounded away from zero so ReLU never sits on its kink.
Tensor AwayFromZero(std::vector<size_t> shape, Rng& rng) {
  Tensor t = RandomTensor(std::move(shape), rng, 0.1, 1.0);
  for (Real& v : t.values())
    if (rng.Bernoulli(0.5)) v = -v;
  return t;
}

using Inputs = std::vector<Tensor>;
using Vars = std::vector<Var>;
using Params = std::vector<Parameter*>;

}  // namespace

std::vector<PrimitiveCase> PrimitiveCatalog() {
  std::vector<PrimitiveCase> c;
  c.push_back({"matmul",
               [](Rng& r) {
                 const size_t m = Dim(r), k = Dim(r), n = Dim(r);
                 return Inputs{RandomTensor({m, k}, r), RandomTensor({k, n}, r)};
               },
               [](Tape& t, const Vars& v, const Params&) { return t.MatMul(v[0], v[1]); }});
  c.push_back({"transpose",
               [](Rng& r) { return Inputs{RandomTensor({Dim(r), Dim(r)}, r)}; },
               [](Tape& t, const Vars& v, const Params&) { return t.Transpose(v[0]); }});
  c.push_back({"affine",
               [](Rng& r) {
                 const size_t n = Dim(r), in = Dim(r), out = Dim(r);
                 return Inputs{RandomTensor({n, in}, r), RandomTensor({out, in}, r),
                               RandomTensor({1, out}, r)};
               },
               [](Tape& t, const Vars& v, const Params&) { return t.Affine(v[0], v[1], v[2]); }});
  c.push_back({"linear",
               [](Rng& r) {
                 const size_t n = Dim(r), in = Dim(r), out = Dim(r);
                 return Inputs{RandomTensor({n, in}, r), RandomTensor({out, in}, r)};
               },
               [](Tape& t, const Vars& v, const Params&) { return t.Linear(v[0], v[1]); }});
  c.push_back({"add",
               [](Rng& r) {
                 const size_t n = Dim(r), m = Dim(r);
                 return Inputs{RandomTensor({n, m}, r), RandomTensor({n, m}, r)};
               },
               [](Tape& t, const Vars& v, const Params&) { return t.Add(v[0], v[1]); }});
  c.push_back({"add_broadcast",
               [](Rng& r) {
                 const size_t n = Dim(r), m = Dim(r);
                 return Inputs{RandomTensor({n, m}, r), RandomTensor({1, m}, r)};
               },
               [](Tape& t, const Vars& v, const Params&) { return t.Add(v[0], v[1]); }});
  c.push_back({"sub",
               [](Rng& r) {
                 const size_t n = Dim(r), m = Dim(r);
                 return Inputs{RandomTensor({n, m}, r), RandomTensor({n, m}, r)};
               },
               [](Tape& t, const Vars& v, const Params&) { return t.Sub(v[0], v[1]); }});
  c.push_back({"mul",
               [](Rng& r) {
                 const size_t n = Dim(r), m = Dim(r);
                 return Inputs{RandomTensor({n, m}, r), RandomTensor({n, m}, r)};
               },
               [](Tape& t, const Vars& v, const Params&) { return t.Mul(v[0], v[1]); }});
  c.push_back({"scale",
               [](Rng& r) { return Inputs{RandomTensor({Dim(r), Dim(r)}, r)}; },
               [](Tape& t, const Vars& v, const Params&) { return t.Scale(v[0], -1.7); }});
  c.push_back({"addn",
               [](Rng& r) {
                 const size_t n = Dim(r), m = Dim(r), k = Dim(r, 1, 4);
                 Inputs in;
                 for (size_t i = 0; i < k; ++i) in.push_back(RandomTensor({n, m}, r));
                 return in;
               },
               [](Tape& t, const Vars& v, const Params&) { return t.AddN(v); }});
  c.push_back({"tanh",
               [](Rng& r) { return Inputs{RandomTensor({Dim(r), Dim(r)}, r, -2, 2)}; },
               [](Tape& t, const Vars& v, const Params&) { return t.Tanh(v[0]); }});
  c.push_back({"sigmoid",
               [](Rng& r) { return Inputs{RandomTensor({Dim(r), Dim(r)}, r, -3, 3)}; },
               [](Tape& t, const Vars& v, const Params&) { return t.Sigmoid(v[0]); }});
  c.push_back({"relu",
               [](Rng& r) { return Inputs{AwayFromZero({Dim(r), Dim(r)}, r)}; },
               [](Tape& t, const Vars& v, const Params&) { return t.Relu(v[0]); }});
  c.push_back({"concat",
               [](Rng& r) {
                 const size_t n = Dim(r), k = Dim(r, 1, 4);
                 Inputs in;
                 for (size_t i = 0; i < k; ++i) in.push_back(RandomTensor({n, Dim(r)}, r));
                 return in;
               },
               [](Tape& t, const Vars& v, const Params&) { return t.Concat(v); }});
  c.push_back({"stack_rows",
               [](Rng& r) {
                 const size_t m = Dim(r), k = Dim(r, 1, 4);
                 Inputs in;
                 for (size_t i = 0; i < k; ++i) in.push_back(RandomTensor({Dim(r), m}, r));
                 return in;
               },
               [](Tape& t, const Vars& v, const Params&) { return t.StackRows(v); }});
  c.push_back({"row",
               [](Rng& r) { return Inputs{RandomTensor({Dim(r, 2), Dim(r)}, r)}; },
               [](Tape& t, const Vars& v, const Params&) {
                 return t.Row(v[0], t.value(v[0]).rows() - 1);
               }});
  c.push_back({"rows",
               [](Rng& r) { return Inputs{RandomTensor({Dim(r, 2), Dim(r)}, r)}; },
               [](Tape& t, const Vars& v, const Params&) {
                 const size_t n = t.value(v[0]).rows();
                 // Repeated rows check gradient accumulation.
                 const std::vector<size_t> idx = {n - 1, 0, n - 1};
                 return t.Rows(v[0], idx);
               }});
  c.push_back({"slice_cols",
               [](Rng& r) { return Inputs{RandomTensor({Dim(r), Dim(r, 3)}, r)}; },
               [](Tape& t, const Vars& v, const Params&) {
                 const size_t m = t.value(v[0]).cols();
                 return t.SliceCols(v[0], 1, m - 2);
               }});
  c.push_back({"lookup",
               [](Rng& r) { return Inputs{RandomTensor({Dim(r, 3), Dim(r)}, r)}; },
               [](Tape& t, const Vars&, const Params& p) {
                 const size_t n = p[0]->value.rows();
                 const std::vector<size_t> ids = {2, 0, 2, n - 1};
                 return t.Lookup(*p[0], ids);
               }});
  c.push_back({"lstm_cell",
               [](Rng& r) {
                 const size_t h = Dim(r);
                 return Inputs{RandomTensor({1, 4 * h}, r, -2, 2), RandomTensor({1, h}, r)};
               },
               [](Tape& t, const Vars& v, const Params&) { return t.LstmCell(v[0], v[1]); }});
  c.push_back({"conv_max_pool",
               [](Rng& r) {
                 const size_t len = Dim(r), in = Dim(r, 1, 4), nf = Dim(r, 1, 5);
                 const size_t width = Dim(r, 1, 3);
                 return Inputs{RandomTensor({len, in}, r), RandomTensor({nf, width * in}, r),
                               RandomTensor({1, nf}, r)};
               },
               [](Tape& t, const Vars& v, const Params&) {
                 const size_t width = t.value(v[1]).cols() / t.value(v[0]).cols();
                 return t.ConvMaxPool(v[0], v[1], v[2], width);
               }});
  c.push_back({"dropout",
               [](Rng& r) { return Inputs{RandomTensor({Dim(r), Dim(r)}, r)}; },
               [](Tape& t, const Vars& v, const Params&) { return t.Dropout(v[0], 0.4); },
               true});
  c.push_back({"softmax",
               [](Rng& r) { return Inputs{RandomTensor({Dim(r), Dim(r)}, r, -2, 2)}; },
               [](Tape& t, const Vars& v, const Params&) { return t.Softmax(v[0]); }});
  c.push_back({"softmax_cross_entropy",
               [](Rng& r) { return Inputs{RandomTensor({Dim(r), Dim(r, 2)}, r, -2, 2)}; },
               [](Tape& t, const Vars& v, const Params&) {
                 const Tensor& x = t.value(v[0]);
                 std::vector<size_t> targets;
                 for (size_t i = 0; i < x.rows(); ++i) targets.push_back((i * 7 + 3) % x.cols());
                 return t.SoftmaxCrossEntropy(v[0], targets);
               }});
  c.push_back({"bilinear",
               [](Rng& r) {
                 const size_t n = Dim(r), dx = Dim(r), dy = Dim(r), rel = Dim(r, 1, 4);
                 return Inputs{RandomTensor({n, dx}, r), RandomTensor({rel, dx, dy}, r),
                               RandomTensor({n, dy}, r)};
               },
               [](Tape& t, const Vars& v, const Params&) { return t.Bilinear(v[0], v[1], v[2]); }});
  c.push_back({"sum",
               [](Rng& r) { return Inputs{RandomTensor({Dim(r), Dim(r)}, r)}; },
               [](Tape& t, const Vars& v, const Params&) { return t.Sum(v[0]); }});
  c.push_back({"mean",
               [](Rng& r) { return Inputs{RandomTensor({Dim(r), Dim(r)}, r)}; },
               [](Tape& t, const Vars& v, const Params&) { return t.Mean(v[0]); }});
  return c;
}

}  // namespace udparse::testing
