#include "udparse/nn.h"

namespace udparse::nn {

Dense Dense::Create(ParameterSet& params, const std::string& name, size_t in,
                    size_t out, Rng& rng, bool with_bias) {
  Dense d;
  d.weight = &params.Add(name + ".w", {out, in}, Init::kXavier, rng);
  if (with_bias) d.bias = &params.Add(name + ".b", {1, out}, Init::kZeros, rng);
  return d;
}

Dense Dense::Bind(ParameterSet& params, const std::string& name) {
  Dense d;
  d.weight = &params.Get(name + ".w");
  d.bias = params.Find(name + ".b");
  return d;
}

Var Dense::Apply(Tape& tape, Var x) const {
  if (bias) return tape.Affine(x, tape.Param(*weight), tape.Param(*bias));
  return tape.Linear(x, tape.Param(*weight));
}

Lstm Lstm::Create(ParameterSet& params, const std::string& name, size_t in,
                  size_t hidden, Rng& rng) {
  Lstm l;
  l.input_weight = &params.Add(name + ".wx", {4 * hidden, in}, Init::kXavier, rng);
  l.hidden_weight =
      &params.Add(name + ".wh", {4 * hidden, hidden}, Init::kOrthogonal, rng);
  l.bias = &params.Add(name + ".b", {1, 4 * hidden}, Init::kZeros, rng);
  return l;
}

Lstm Lstm::Bind(ParameterSet& params, const std::string& name) {
  Lstm l;
  l.input_weight = &params.Get(name + ".wx");
  l.hidden_weight = &params.Get(name + ".wh");
  l.bias = &params.Get(name + ".b");
  return l;
}

Var Lstm::Run(Tape& tape, Var inputs, bool reverse) const {
  const size_t n = tape.value(inputs).rows();
  const size_t h = hidden();
  const Var projected =
      tape.Affine(inputs, tape.Param(*input_weight), tape.Param(*bias));
  const Var recurrent_t = tape.Transpose(tape.Param(*hidden_weight));  // h x 4h
  Var state = tape.Constant(Tensor::Zeros(1, h));
  Var cell = tape.Constant(Tensor::Zeros(1, h));
  std::vector<Var> outputs(n);
  for (size_t step = 0; step < n; ++step) {
    const size_t t = reverse ? n - 1 - step : step;
    const Var gates = tape.Add(tape.Row(projected, t), tape.MatMul(state, recurrent_t));
    const Var both = tape.LstmCell(gates, cell);
    state = tape.SliceCols(both, 0, h);
    cell = tape.SliceCols(both, h, h);
    outputs[t] = state;
  }
  if (n == 0) return tape.Constant(Tensor::Zeros(0, h));
  return tape.StackRows(outputs);
}

BiLstm BiLstm::Create(ParameterSet& params, const std::string& name, size_t in,
                      size_t hidden, size_t layers, Rng& rng) {
  BiLstm b;
  size_t dim = in;
  for (size_t l = 0; l < layers; ++l) {
    const std::string prefix = name + ".l" + std::to_string(l);
    b.forward.push_back(Lstm::Create(params, prefix + ".fw", dim, hidden, rng));
    b.backward.push_back(Lstm::Create(params, prefix + ".bw", dim, hidden, rng));
    dim = 2 * hidden;
  }
  return b;
}

BiLstm BiLstm::Bind(ParameterSet& params, const std::string& name, size_t layers) {
  BiLstm b;
  for (size_t l = 0; l < layers; ++l) {
    const std::string prefix = name + ".l" + std::to_string(l);
    b.forward.push_back(Lstm::Bind(params, prefix + ".fw"));
    b.backward.push_back(Lstm::Bind(params, prefix + ".bw"));
  }
  return b;
}

std::vector<Var> BiLstm::RunLayers(Tape& tape, Var inputs, double dropout) const {
  std::vector<Var> out;
  Var x = inputs;
  for (size_t l = 0; l < layers(); ++l) {
    if (l > 0) x = tape.Dropout(x, dropout);
    const Var parts[2] = {forward[l].Run(tape, x, false),
                          backward[l].Run(tape, x, true)};
    x = tape.Concat(parts);
    out.push_back(x);
  }
  return out;
}

Var BiLstm::Run(Tape& tape, Var inputs, double dropout) const {
  if (layers() == 0) return inputs;
  return RunLayers(tape, inputs, dropout).back();
}

Mlp Mlp::Create(ParameterSet& params, const std::string& name, size_t in,
                size_t out, Rng& rng) {
  return Mlp{Dense::Create(params, name, in, out, rng)};
}

Mlp Mlp::Bind(ParameterSet& params, const std::string& name) {
  return Mlp{Dense::Bind(params, name)};
}

Var Mlp::Apply(Tape& tape, Var x, double dropout) const {
  return tape.Dropout(tape.Relu(layer.Apply(tape, x)), dropout);
}

}  // namespace udparse::nn
