#include "mage/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mage {

namespace {
Index shape_product(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index e : shape) {
    if (e == 0) throw std::invalid_argument("tensor extents must be positive");
    n *= e;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<Index> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor Tensor::zeros(std::vector<Index> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::scalar(double v) {
  Tensor t(std::vector<Index>{});
  t.data_ = {v};
  return t;
}

Tensor Tensor::from_vector(std::vector<double> v) {
  Tensor t;
  t.shape_ = {v.size()};
  t.data_ = std::move(v);
  if (t.data_.empty()) throw std::invalid_argument("tensor extents must be positive");
  return t;
}

Tensor Tensor::from_matrix(Index rows, Index cols, std::vector<double> v) {
  if (v.size() != rows * cols)
    throw std::invalid_argument("from_matrix: value count does not match extents");
  Tensor t;
  t.shape_ = {rows, cols};
  t.data_ = std::move(v);
  return t;
}

Tensor Tensor::full(std::vector<Index> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Index Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("rows(): tensor is not rank 2");
  return shape_[0];
}

Index Tensor::cols() const {
  if (rank() != 2) throw std::invalid_argument("cols(): tensor is not rank 2");
  return shape_[1];
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item(): tensor is not a scalar, shape " + shape_str());
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

std::string Tensor::shape_str() const { return mage::shape_str(shape_); }

std::string shape_str(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << '[';
  for (Index i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace mage
