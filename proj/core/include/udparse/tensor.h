#ifndef UDPARSE_TENSOR_H_
#define UDPARSE_TENSOR_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace udparse {

using Real = double;

// Dense row-major tensor. Rank-1 tensors behave as 1 x n row vectors in the
// matrix-shaped accessors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<size_t> shape, Real fill = 0.0);
  Tensor(std::vector<size_t> shape, std::vector<Real> data);

  static Tensor Zeros(size_t rows, size_t cols) { return Tensor({rows, cols}); }
  static Tensor Matrix(size_t rows, size_t cols, std::vector<Real> data) {
    return Tensor({rows, cols}, std::move(data));
  }
  static Tensor RowVector(std::vector<Real> data) {
    const size_t n = data.size();
    return Tensor({1, n}, std::move(data));
  }
  static Tensor Scalar(Real v) { return Tensor({1, 1}, {v}); }

  const std::vector<size_t>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  size_t rows() const;
  size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  std::vector<Real>& values() { return data_; }
  const std::vector<Real>& values() const { return data_; }

  Real& operator[](size_t i) { return data_[i]; }
  Real operator[](size_t i) const { return data_[i]; }
  Real& at(size_t r, size_t c) { return data_[r * cols() + c]; }
  Real at(size_t r, size_t c) const { return data_[r * cols() + c]; }

  std::span<Real> row(size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const Real> row(size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  void Fill(Real v);
  bool AllFinite() const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<size_t> shape_;
  std::vector<Real> data_;
};

std::string ShapeString(const std::vector<size_t>& shape);

}  // namespace udparse

#endif  // UDPARSE_TENSOR_H_
