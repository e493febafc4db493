#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mage/params.hpp"
#include "mage/tensor.hpp"

namespace mage {

/// Handle to a tape node. Valid only for the tape that produced it and only
/// until the next reset().
struct Var {
  std::uint32_t id = 0;
};

/// Reverse-mode tape. Nodes are appended in execution order, so ids are
/// already a topological order; one backward sweep visits each node exactly
/// once, in descending id order. No broadcasting, no graph rewriting.
///
/// A tape and its tensors belong to one thread for the duration of a
/// forward/backward pass. Parameters referenced by leaf() outlive the tape.
class Tape {
 public:
  static constexpr double kLogFloor = 1e-12;  // clamp inside every log

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Drops all nodes but keeps allocated capacity for reuse across examples.
  void reset();

  Index size() const { return nodes_.size(); }
  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient of the last backward() target w.r.t. node v (zero tensor when
  /// the node is unreachable). Invalidated by the next backward() or reset().
  const Tensor& grad(Var v) const { return grads_[v.id]; }

  // --- graph inputs -------------------------------------------------------
  Var leaf(Parameter& p);        // tracked: backward accumulates into p.grad
  Var constant(Tensor v);        // untracked input
  Var scalar(double v) { return constant(Tensor::scalar(v)); }
  Var zeros(std::vector<Index> shape) { return constant(Tensor::zeros(std::move(shape))); }

  // --- operations ---------------------------------------------------------
  Var matmul(Var a, Var b);                 // [m,k]x[k,n] -> [m,n]
  Var matvec(Var a, Var x);                 // [m,k]x[k]   -> [m]
  Var vecmat(Var x, Var a);                 // [k]x[k,n]   -> [n]
  Var add(Var a, Var b);                    // equal shapes
  Var hadamard(Var a, Var b);               // elementwise product
  Var scale(Var a, double c);               // c*a
  Var scale_shift(Var a, double k, double b);  // k*a + b elementwise
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var concat(std::span<const Var> parts, Index axis);  // rank-1 axis 0; rank-2 axis 0/1
  Var slice(Var a, Index axis, Index start, Index len);
  Var stack_rows(std::span<const Var> rows);  // n vectors [w] -> [n,w]
  Var select_row(Var matrix, Index row);      // [n,w] -> [w]
  Var softmax(Var a);                         // rank-1, max-subtracted
  Var nll_loss(Var p, Index target);          // -log(max(p[target], kLogFloor))
  Var sum(Var a);                             // all entries -> scalar
  /// out[g] = sum of a[i] with groups[i] == g; groups[i] in [0, n_groups).
  Var group_sums(Var a, std::vector<std::int32_t> groups, Index n_groups);

  /// Reverse sweep from a scalar loss. Accumulates into the grad of every
  /// Parameter reachable from it; grads of unreachable parameters untouched.
  void backward(Var loss);

  /// True when every node value (and, after backward, every gradient) is finite.
  bool all_finite() const;

 private:
  enum class Op : std::uint8_t {
    kLeaf, kConstant, kMatMul, kMatVec, kVecMat, kAdd, kHadamard, kScaleShift,
    kSigmoid, kTanh, kConcat, kSlice, kStackRows, kSelectRow, kSoftmax,
    kNllLoss, kSum, kGroupSums,
  };

  static constexpr std::uint32_t kNone = 0xffffffffu;

  struct Node {
    explicit Node(Op o, std::uint32_t in_x = kNone, std::uint32_t in_y = kNone)
        : op(o), x(in_x), y(in_y) {}
    Op op;
    std::uint32_t x, y;                   // primary inputs
    std::int64_t i0 = 0, i1 = 0, i2 = 0;  // attributes: axis/start/len/target/list index
    double s0 = 0.0, s1 = 0.0;            // scalar attributes
    Parameter* param = nullptr;           // kLeaf binding
    Tensor value;
  };

  Var push(Node n);
  Tensor& gref(std::uint32_t id) { return grads_[id]; }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<std::vector<std::uint32_t>> input_lists_;   // concat / stack_rows
  std::vector<std::vector<std::int32_t>> group_lists_;    // group_sums
  bool grads_valid_ = false;
};

}  // namespace mage
