#ifndef UDPARSE_AUTODIFF_H_
#define UDPARSE_AUTODIFF_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "udparse/params.h"
#include "udparse/rng.h"
#include "udparse/tensor.h"

namespace udparse {

// Handle to a node on a Tape.
struct Var {
  uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

// Reverse-mode autodiff graph for one forward/backward pass. Nodes are
// appended in evaluation order, which is also a topological order.
//
// All primitives work on matrices (rank-1 tensors count as 1 x n). Every
// forward result is checked for NaN/Inf.
class Tape {
 public:
  // `rng` is required only when dropout is applied in training mode.
  explicit Tape(bool training = false, Rng* rng = nullptr)
      : training_(training), rng_(rng) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool training() const { return training_; }
  size_t size() const { return nodes_.size(); }

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  // Gradient of the last Backward() loss with respect to `v` (zeros if `v` is
  // unreachable or Backward has not run).
  const Tensor& grad(Var v);

  Var Constant(Tensor t);
  // Reads the parameter's current value; gradients flow back into
  // `p.grad` when `p.trainable`.
  Var Param(Parameter& p);

  Var MatMul(Var a, Var b);
  Var Transpose(Var a);
  // x: n x in, w: out x in, b: 1 x out. Returns x w^T + b.
  Var Affine(Var x, Var w, Var b);
  // Same as Affine without bias.
  Var Linear(Var x, Var w);

  // Elementwise; for Add and Sub `b` may also be a 1 x cols row broadcast
  // over the rows of a. Mul needs equal shapes.
  Var Add(Var a, Var b);
  Var Sub(Var a, Var b);
  Var Mul(Var a, Var b);
  Var Scale(Var a, Real c);
  Var AddN(std::span<const Var> terms);

  Var Tanh(Var a);
  Var Sigmoid(Var a);
  Var Relu(Var a);

  // Concatenates along the last axis; all parts share the row count.
  Var Concat(std::span<const Var> parts);
  // Stacks row blocks vertically; all parts share the column count.
  Var StackRows(std::span<const Var> parts);
  Var Row(Var a, size_t r);
  Var Rows(Var a, std::span<const size_t> rows);
  Var SliceCols(Var a, size_t begin, size_t len);

  // Row gather from a parameter table (n x d). Only the gathered rows receive
  // gradient.
  Var Lookup(Parameter& table, std::span<const size_t> ids);
  // Row gather from a frozen tensor; produces a constant.
  Var LookupConstant(const Tensor& table, std::span<const size_t> ids);

  // One LSTM cell step. gates: 1 x 4h pre-activations in (i, f, o, g) order;
  // cell: 1 x h. Returns 1 x 2h holding (h', c').
  Var LstmCell(Var gates, Var cell);

  // Width-`width` 1-D convolution over the rows of x (len x in), followed by a
  // max over positions. filters: nf x (width * in); bias: 1 x nf.
  // Sequences shorter than the width are zero-padded to one window.
  Var ConvMaxPool(Var x, Var filters, Var bias, size_t width);

  // Inverted dropout: scales kept units by 1/(1-rate) in training mode,
  // returns `a` itself otherwise.
  Var Dropout(Var a, double rate);

  Var Softmax(Var a);  // row-wise
  // Sum over rows of -log softmax(logits[r])[targets[r]]. Returns 1 x 1.
  Var SoftmaxCrossEntropy(Var logits, std::span<const size_t> targets);

  // x: n x dx, u: R x dx x dy, y: n x dy. Returns n x R with
  // out[i][r] = x_i^T U_r y_i.
  Var Bilinear(Var x, Var u, Var y);

  Var Sum(Var a);  // 1 x 1
  Var Mean(Var a);

  // Populates gradients of every node reachable from `loss`; `loss` must be
  // 1 x 1. Trainable parameters accumulate into Parameter::grad.
  void Backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, const Tensor&)> backward;
  };

  Var Push(Tensor value, const char* op,
           std::function<void(Tape&, const Tensor&)> backward);
  Tensor& GradRef(Var v);

  bool training_;
  Rng* rng_;
  std::vector<Node> nodes_;
  bool has_backward_ = false;
};

}  // namespace udparse

#endif  // UDPARSE_AUTODIFF_H_
