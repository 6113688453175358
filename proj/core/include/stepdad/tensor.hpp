#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace stepdad {

/// Dense row-major tensor of doubles. Most of the engine only uses rank 1
/// and rank 2; higher ranks are carried through serialization untouched.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor vector(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  /// Rows/cols of a rank-2 tensor. A rank-1 tensor is treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * stride_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * stride_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * stride_, stride_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * stride_, stride_}; }

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
  std::size_t stride_ = 0;  // row length for rank 1 and 2
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// Transpose of a rank-2 tensor.
Tensor transpose(const Tensor& m);

}  // namespace stepdad
