#include "udparse/tensor.h"

#include <cmath>
#include <functional>
#include <numeric>

#include "udparse/error.h"

namespace udparse {

Tensor::Tensor(std::vector<size_t> shape, Real fill) : shape_(std::move(shape)) {
  const size_t n = std::accumulate(shape_.begin(), shape_.end(), size_t{1},
                                   std::multiplies<size_t>());
  data_.assign(shape_.empty() ? 0 : n, fill);
}

Tensor::Tensor(std::vector<size_t> shape, std::vector<Real> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const size_t n = std::accumulate(shape_.begin(), shape_.end(), size_t{1},
                                   std::multiplies<size_t>());
  if ((shape_.empty() ? 0 : n) != data_.size()) {
    throw DimensionError("tensor: shape " + ShapeString(shape_) + " holds " +
                         std::to_string(n) + " values, got " +
                         std::to_string(data_.size()));
  }
}

size_t Tensor::rows() const {
  if (shape_.empty()) return 0;
  if (shape_.size() == 1) return 1;
  return data_.size() / shape_.back();
}

void Tensor::Fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::AllFinite() const {
  for (Real v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string ShapeString(const std::vector<size_t>& shape) {
  std::string out = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

}  // namespace udparse
