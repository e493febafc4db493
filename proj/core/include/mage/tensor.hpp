#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace mage {

using Index = std::size_t;

/// Dense row-major tensor of 64-bit reals. Rank 0 (scalar), 1 (vector) and
/// 2 (matrix) are the shapes the rest of the library uses; higher ranks are
/// allowed but nothing constructs them. No broadcasting anywhere: every shape
/// contract is explicit and violations throw.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<Index> shape);

  static Tensor zeros(std::vector<Index> shape);
  static Tensor scalar(double v);
  static Tensor from_vector(std::vector<double> v);
  static Tensor from_matrix(Index rows, Index cols, std::vector<double> v);
  static Tensor full(std::vector<Index> shape, double v);

  Index rank() const { return shape_.size(); }
  Index size() const { return data_.size(); }
  const std::vector<Index>& shape() const { return shape_; }
  Index extent(Index axis) const { return shape_[axis]; }

  Index rows() const;  // rank-2 only
  Index cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](Index i) { return data_[i]; }
  double operator[](Index i) const { return data_[i]; }
  double& at(Index r, Index c) { return data_[r * cols() + c]; }
  double at(Index r, Index c) const { return data_[r * cols() + c]; }

  /// Scalar access; throws unless size() == 1.
  double item() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  void fill(double v);
  void set_zero() { fill(0.0); }

  std::string shape_str() const;

 private:
  std::vector<Index> shape_;
  std::vector<double> data_;
};

std::string shape_str(const std::vector<Index>& shape);

}  // namespace mage
