#ifndef UDPARSE_NN_H_
#define UDPARSE_NN_H_

#include <cstddef>
#include <string>
#include <vector>

#include "udparse/autodiff.h"
#include "udparse/params.h"
#include "udparse/rng.h"

namespace udparse::nn {

// y = x W^T + b
struct Dense {
  Parameter* weight = nullptr;  // out x in
  Parameter* bias = nullptr;    // 1 x out, may be null

  static Dense Create(ParameterSet& params, const std::string& name, size_t in,
                      size_t out, Rng& rng, bool with_bias = true);
  static Dense Bind(ParameterSet& params, const std::string& name);
  Var Apply(Tape& tape, Var x) const;
  size_t in() const { return weight->value.cols(); }
  size_t out() const { return weight->value.rows(); }
};

// Single-direction LSTM layer; gate order (i, f, o, g).
struct Lstm {
  Parameter* input_weight = nullptr;   // 4h x in
  Parameter* hidden_weight = nullptr;  // 4h x h
  Parameter* bias = nullptr;           // 1 x 4h

  static Lstm Create(ParameterSet& params, const std::string& name, size_t in,
                     size_t hidden, Rng& rng);
  static Lstm Bind(ParameterSet& params, const std::string& name);
  size_t hidden() const { return hidden_weight->value.cols(); }

  // Runs over the rows of `inputs` (n x in) from the first row, or from the
  // last when `reverse`. Row t of the result is the state after reading input
  // t. Returns n x h.
  Var Run(Tape& tape, Var inputs, bool reverse) const;
};

// Stacked bidirectional LSTM; each layer outputs forward and backward states
// concatenated (n x 2h) and feeds the next layer.
struct BiLstm {
  std::vector<Lstm> forward;
  std::vector<Lstm> backward;

  static BiLstm Create(ParameterSet& params, const std::string& name, size_t in,
                       size_t hidden, size_t layers, Rng& rng);
  static BiLstm Bind(ParameterSet& params, const std::string& name, size_t layers);
  size_t layers() const { return forward.size(); }
  size_t output_dim(size_t input_dim) const {
    return layers() == 0 ? input_dim : 2 * forward.back().hidden();
  }

  // Returns the top layer output; with zero layers returns `inputs`.
  // `dropout` is applied to the input of every layer above the first.
  Var Run(Tape& tape, Var inputs, double dropout = 0.0) const;
  // All layer outputs, bottom first.
  std::vector<Var> RunLayers(Tape& tape, Var inputs, double dropout = 0.0) const;
};

// Single hidden layer with ReLU.
struct Mlp {
  Dense layer;
  static Mlp Create(ParameterSet& params, const std::string& name, size_t in,
                    size_t out, Rng& rng);
  static Mlp Bind(ParameterSet& params, const std::string& name);
  Var Apply(Tape& tape, Var x, double dropout = 0.0) const;
};

}  // namespace udparse::nn

#endif  // UDPARSE_NN_H_
