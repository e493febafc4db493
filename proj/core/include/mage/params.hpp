#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mage/tensor.hpp"

namespace mage {

/// A named trainable tensor with an accumulated gradient of the same shape.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}
};

/// Owns a model's parameters. Addresses are stable for the store's lifetime,
/// names are unique, iteration order is creation order (which makes gradient
/// clipping and Adam walks deterministic).
class ParameterStore {
 public:
  Parameter& create(const std::string& name, Tensor init);
  Parameter& create_zeros(const std::string& name, std::vector<Index> shape);

  /// Scaled-uniform init in +/- sqrt(6 / (fan_in + fan_out)); biases stay zero.
  Parameter& create_uniform(const std::string& name, std::vector<Index> shape,
                            Index fan_in, Index fan_out, std::mt19937_64& rng);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  Index size() const { return params_.size(); }
  Parameter& at(Index i) { return *params_[i]; }
  const Parameter& at(Index i) const { return *params_[i]; }

  Index value_count() const;  // total scalar entries
  void zero_grads();
  double grad_norm() const;

  /// Checkpoint container: magic "MAGECKPT", version u32 = 1, then one record
  /// per parameter (name, dtype tag, shape, row-major little-endian values).
  void save(const std::string& path) const;
  /// Loads values into the existing parameters; fails loudly when the file's
  /// names or shapes do not match this store exactly.
  void load(const std::string& path);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

}  // namespace mage
