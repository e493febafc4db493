#include "mage/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mage {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                              b.shape_str());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a) {
  throw std::invalid_argument(std::string(op) + ": unsupported shape " + a.shape_str());
}

}  // namespace

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  input_lists_.clear();
  group_lists_.clear();
  grads_valid_ = false;
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Parameter& p) {
  Node n(Op::kLeaf);
  n.param = &p;
  n.value = p.value;  // copy: the tape owns its activations
  return push(std::move(n));
}

Var Tape::constant(Tensor v) {
  Node n(Op::kConstant);
  n.value = std::move(v);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) shape_error("matmul", A, B);
  const Index m = A.rows(), k = A.cols(), n = B.cols();
  Node node(Op::kMatMul, a.id, b.id);
  node.value = Tensor::zeros({m, n});
  for (Index i = 0; i < m; ++i) {
    const double* arow = A.data() + i * k;
    double* out = node.value.data() + i * n;
    for (Index kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = B.data() + kk * n;
      for (Index j = 0; j < n; ++j) out[j] += av * brow[j];
    }
  }
  return push(std::move(node));
}

Var Tape::matvec(Var a, Var x) {
  const Tensor& A = value(a);
  const Tensor& X = value(x);
  if (A.rank() != 2 || X.rank() != 1 || A.cols() != X.shape()[0]) shape_error("matvec", A, X);
  const Index m = A.rows(), k = A.cols();
  Node node(Op::kMatVec, a.id, x.id);
  node.value = Tensor::zeros({m});
  for (Index i = 0; i < m; ++i) {
    const double* arow = A.data() + i * k;
    double acc = 0.0;
    for (Index j = 0; j < k; ++j) acc += arow[j] * X[j];
    node.value[i] = acc;
  }
  return push(std::move(node));
}

Var Tape::vecmat(Var x, Var a) {
  const Tensor& X = value(x);
  const Tensor& A = value(a);
  if (X.rank() != 1 || A.rank() != 2 || X.shape()[0] != A.rows()) shape_error("vecmat", X, A);
  const Index k = A.rows(), n = A.cols();
  Node node(Op::kVecMat, x.id, a.id);
  node.value = Tensor::zeros({n});
  for (Index i = 0; i < k; ++i) {
    const double xv = X[i];
    const double* arow = A.data() + i * n;
    for (Index j = 0; j < n; ++j) node.value[j] += xv * arow[j];
  }
  return push(std::move(node));
}

Var Tape::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) shape_error("add", A, B);
  Node node(Op::kAdd, a.id, b.id);
  node.value = A;
  for (Index i = 0; i < B.size(); ++i) node.value[i] += B[i];
  return push(std::move(node));
}

Var Tape::hadamard(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) shape_error("hadamard", A, B);
  Node node(Op::kHadamard, a.id, b.id);
  node.value = A;
  for (Index i = 0; i < B.size(); ++i) node.value[i] *= B[i];
  return push(std::move(node));
}

Var Tape::scale(Var a, double c) { return scale_shift(a, c, 0.0); }

Var Tape::scale_shift(Var a, double k, double b) {
  const Tensor& A = value(a);
  Node node(Op::kScaleShift, a.id);
  node.s0 = k;
  node.s1 = b;
  node.value = A;
  for (Index i = 0; i < A.size(); ++i) node.value[i] = k * A[i] + b;
  return push(std::move(node));
}

Var Tape::sigmoid(Var a) {
  const Tensor& A = value(a);
  Node node(Op::kSigmoid, a.id);
  node.value = A;
  for (Index i = 0; i < A.size(); ++i) node.value[i] = 1.0 / (1.0 + std::exp(-A[i]));
  return push(std::move(node));
}

Var Tape::tanh(Var a) {
  const Tensor& A = value(a);
  Node node(Op::kTanh, a.id);
  node.value = A;
  for (Index i = 0; i < A.size(); ++i) node.value[i] = std::tanh(A[i]);
  return push(std::move(node));
}

Var Tape::concat(std::span<const Var> parts, Index axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no parts");
  const Tensor& first = value(parts[0]);
  const Index rank = first.rank();
  if (rank == 0 || rank > 2 || axis >= rank) shape_error("concat", first);
  Index concat_extent = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    if (t.rank() != rank) shape_error("concat", first, t);
    for (Index ax = 0; ax < rank; ++ax) {
      if (ax != axis && t.shape()[ax] != first.shape()[ax]) shape_error("concat", first, t);
    }
    concat_extent += t.shape()[axis];
  }
  std::vector<Index> shape = first.shape();
  shape[axis] = concat_extent;
  Node node(Op::kConcat);
  node.i0 = static_cast<std::int64_t>(axis);
  node.i1 = static_cast<std::int64_t>(input_lists_.size());
  {
    std::vector<std::uint32_t> ids(parts.size());
    for (Index i = 0; i < parts.size(); ++i) ids[i] = parts[i].id;
    input_lists_.push_back(std::move(ids));
  }
  node.value = Tensor::zeros(shape);
  if (rank == 1 || axis == 0) {
    double* out = node.value.data();
    for (Var p : parts) {
      const Tensor& t = value(p);
      for (Index i = 0; i < t.size(); ++i) out[i] = t[i];
      out += t.size();
    }
  } else {  // rank 2, axis 1
    const Index rows = shape[0], cols = shape[1];
    Index col0 = 0;
    for (Var p : parts) {
      const Tensor& t = value(p);
      const Index tc = t.cols();
      for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < tc; ++c) node.value.data()[r * cols + col0 + c] = t.at(r, c);
      col0 += tc;
    }
  }
  return push(std::move(node));
}

Var Tape::slice(Var a, Index axis, Index start, Index len) {
  const Tensor& A = value(a);
  if (A.rank() == 0 || A.rank() > 2 || axis >= A.rank()) shape_error("slice", A);
  if (len == 0 || start + len > A.shape()[axis])
    throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " +
                                std::to_string(start + len) + ") out of bounds for " + A.shape_str());
  Node node(Op::kSlice, a.id);
  node.i0 = static_cast<std::int64_t>(axis);
  node.i1 = static_cast<std::int64_t>(start);
  node.i2 = static_cast<std::int64_t>(len);
  if (A.rank() == 1) {
    node.value = Tensor::zeros({len});
    for (Index i = 0; i < len; ++i) node.value[i] = A[start + i];
  } else if (axis == 0) {
    const Index cols = A.cols();
    node.value = Tensor::zeros({len, cols});
    for (Index i = 0; i < len * cols; ++i) node.value[i] = A[start * cols + i];
  } else {
    const Index rows = A.rows();
    node.value = Tensor::zeros({rows, len});
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < len; ++c) node.value.at(r, c) = A.at(r, start + c);
  }
  return push(std::move(node));
}

Var Tape::stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no rows");
  const Index w = value(rows[0]).size();
  for (Var r : rows) {
    const Tensor& t = value(r);
    if (t.rank() != 1 || t.size() != w) shape_error("stack_rows", value(rows[0]), t);
  }
  Node node(Op::kStackRows);
  node.i1 = static_cast<std::int64_t>(input_lists_.size());
  {
    std::vector<std::uint32_t> ids(rows.size());
    for (Index i = 0; i < rows.size(); ++i) ids[i] = rows[i].id;
    input_lists_.push_back(std::move(ids));
  }
  node.value = Tensor::zeros({rows.size(), w});
  for (Index i = 0; i < rows.size(); ++i) {
    const Tensor& t = value(rows[i]);
    for (Index j = 0; j < w; ++j) node.value.at(i, j) = t[j];
  }
  return push(std::move(node));
}

Var Tape::select_row(Var matrix, Index row) {
  const Tensor& A = value(matrix);
  if (A.rank() != 2) shape_error("select_row", A);
  if (row >= A.rows())
    throw std::invalid_argument("select_row: row " + std::to_string(row) + " out of range for " +
                                A.shape_str());
  Node node(Op::kSelectRow, matrix.id);
  node.i0 = static_cast<std::int64_t>(row);
  const Index w = A.cols();
  node.value = Tensor::zeros({w});
  for (Index j = 0; j < w; ++j) node.value[j] = A.at(row, j);
  return push(std::move(node));
}

Var Tape::softmax(Var a) {
  const Tensor& A = value(a);
  if (A.rank() != 1) shape_error("softmax", A);
  Node node(Op::kSoftmax, a.id);
  node.value = A;
  double mx = A[0];
  for (Index i = 1; i < A.size(); ++i) mx = std::max(mx, A[i]);
  double z = 0.0;
  for (Index i = 0; i < A.size(); ++i) {
    node.value[i] = std::exp(A[i] - mx);
    z += node.value[i];
  }
  for (Index i = 0; i < A.size(); ++i) node.value[i] /= z;
  return push(std::move(node));
}

Var Tape::nll_loss(Var p, Index target) {
  const Tensor& P = value(p);
  if (P.rank() != 1) shape_error("nll_loss", P);
  if (target >= P.size())
    throw std::invalid_argument("nll_loss: target " + std::to_string(target) + " out of range for " +
                                P.shape_str());
  Node node(Op::kNllLoss, p.id);
  node.i0 = static_cast<std::int64_t>(target);
  node.value = Tensor::scalar(-std::log(std::max(P[target], kLogFloor)));
  return push(std::move(node));
}

Var Tape::sum(Var a) {
  const Tensor& A = value(a);
  Node node(Op::kSum, a.id);
  double acc = 0.0;
  for (Index i = 0; i < A.size(); ++i) acc += A[i];
  node.value = Tensor::scalar(acc);
  return push(std::move(node));
}

Var Tape::group_sums(Var a, std::vector<std::int32_t> groups, Index n_groups) {
  const Tensor& A = value(a);
  if (A.rank() != 1 || groups.size() != A.size())
    throw std::invalid_argument("group_sums: need one group per entry");
  if (n_groups == 0) throw std::invalid_argument("group_sums: n_groups must be positive");
  Node node(Op::kGroupSums, a.id);
  node.value = Tensor::zeros({n_groups});
  for (Index i = 0; i < A.size(); ++i) {
    const auto g = groups[i];
    if (g < 0 || static_cast<Index>(g) >= n_groups)
      throw std::invalid_argument("group_sums: group id out of range");
    node.value[static_cast<Index>(g)] += A[i];
  }
  node.i0 = static_cast<std::int64_t>(group_lists_.size());
  group_lists_.push_back(std::move(groups));
  return push(std::move(node));
}

void Tape::backward(Var loss) {
  const Tensor& L = value(loss);
  if (L.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + L.shape_str());

  grads_.assign(nodes_.size(), Tensor());
  for (Index i = 0; i < nodes_.size(); ++i) grads_[i] = Tensor::zeros(nodes_[i].value.shape());
  grads_[loss.id][0] = 1.0;
  grads_valid_ = true;

  for (std::uint32_t id = static_cast<std::uint32_t>(nodes_.size()); id-- > 0;) {
    const Node& n = nodes_[id];
    const Tensor& g = grads_[id];
    switch (n.op) {
      case Op::kLeaf:
        if (n.param) {
          Tensor& pg = n.param->grad;
          for (Index i = 0; i < g.size(); ++i) pg[i] += g[i];
        }
        break;
      case Op::kConstant:
        break;
      case Op::kMatMul: {
        const Tensor& A = nodes_[n.x].value;
        const Tensor& B = nodes_[n.y].value;
        Tensor& ga = gref(n.x);
        Tensor& gb = gref(n.y);
        const Index m = A.rows(), k = A.cols(), c = B.cols();
        // ga += g . B^T
        for (Index i = 0; i < m; ++i)
          for (Index j = 0; j < k; ++j) {
            double acc = 0.0;
            const double* grow = g.data() + i * c;
            const double* brow = B.data() + j * c;
            for (Index t = 0; t < c; ++t) acc += grow[t] * brow[t];
            ga.at(i, j) += acc;
          }
        // gb += A^T . g
        for (Index j = 0; j < k; ++j) {
          double* gbrow = gb.data() + j * c;
          for (Index i = 0; i < m; ++i) {
            const double av = A.at(i, j);
            const double* grow = g.data() + i * c;
            for (Index t = 0; t < c; ++t) gbrow[t] += av * grow[t];
          }
        }
        break;
      }
      case Op::kMatVec: {
        const Tensor& A = nodes_[n.x].value;
        const Tensor& X = nodes_[n.y].value;
        Tensor& ga = gref(n.x);
        Tensor& gx = gref(n.y);
        const Index m = A.rows(), k = A.cols();
        for (Index i = 0; i < m; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          double* garow = ga.data() + i * k;
          const double* arow = A.data() + i * k;
          for (Index j = 0; j < k; ++j) {
            garow[j] += gi * X[j];
            gx[j] += gi * arow[j];
          }
        }
        break;
      }
      case Op::kVecMat: {
        const Tensor& X = nodes_[n.x].value;
        const Tensor& A = nodes_[n.y].value;
        Tensor& gx = gref(n.x);
        Tensor& ga = gref(n.y);
        const Index k = A.rows(), c = A.cols();
        for (Index i = 0; i < k; ++i) {
          const double* arow = A.data() + i * c;
          double* garow = ga.data() + i * c;
          double acc = 0.0;
          const double xv = X[i];
          for (Index j = 0; j < c; ++j) {
            acc += arow[j] * g[j];
            garow[j] += xv * g[j];
          }
          gx[i] += acc;
        }
        break;
      }
      case Op::kAdd: {
        Tensor& ga = gref(n.x);
        Tensor& gb = gref(n.y);
        for (Index i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kHadamard: {
        const Tensor& A = nodes_[n.x].value;
        const Tensor& B = nodes_[n.y].value;
        Tensor& ga = gref(n.x);
        Tensor& gb = gref(n.y);
        for (Index i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * B[i];
          gb[i] += g[i] * A[i];
        }
        break;
      }
      case Op::kScaleShift: {
        Tensor& ga = gref(n.x);
        for (Index i = 0; i < g.size(); ++i) ga[i] += n.s0 * g[i];
        break;
      }
      case Op::kSigmoid: {
        Tensor& ga = gref(n.x);
        const Tensor& y = n.value;
        for (Index i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::kTanh: {
        Tensor& ga = gref(n.x);
        const Tensor& y = n.value;
        for (Index i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::kConcat: {
        const auto& ids = input_lists_[static_cast<Index>(n.i1)];
        const Index axis = static_cast<Index>(n.i0);
        if (n.value.rank() == 1 || axis == 0) {
          Index off = 0;
          for (auto pid : ids) {
            Tensor& gp = gref(pid);
            for (Index i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
            off += gp.size();
          }
        } else {
          const Index rows = n.value.rows(), cols = n.value.cols();
          Index col0 = 0;
          for (auto pid : ids) {
            Tensor& gp = gref(pid);
            const Index pc = gp.cols();
            for (Index r = 0; r < rows; ++r)
              for (Index c = 0; c < pc; ++c) gp.at(r, c) += g.data()[r * cols + col0 + c];
            col0 += pc;
          }
        }
        break;
      }
      case Op::kSlice: {
        Tensor& ga = gref(n.x);
        const Tensor& A = nodes_[n.x].value;
        const Index axis = static_cast<Index>(n.i0);
        const Index start = static_cast<Index>(n.i1);
        const Index len = static_cast<Index>(n.i2);
        if (A.rank() == 1) {
          for (Index i = 0; i < len; ++i) ga[start + i] += g[i];
        } else if (axis == 0) {
          const Index cols = A.cols();
          for (Index i = 0; i < len * cols; ++i) ga[start * cols + i] += g[i];
        } else {
          for (Index r = 0; r < A.rows(); ++r)
            for (Index c = 0; c < len; ++c) ga.at(r, start + c) += g.at(r, c);
        }
        break;
      }
      case Op::kStackRows: {
        const auto& ids = input_lists_[static_cast<Index>(n.i1)];
        const Index w = n.value.cols();
        for (Index i = 0; i < ids.size(); ++i) {
          Tensor& gr = gref(ids[i]);
          for (Index j = 0; j < w; ++j) gr[j] += g.at(i, j);
        }
        break;
      }
      case Op::kSelectRow: {
        Tensor& ga = gref(n.x);
        const Index row = static_cast<Index>(n.i0);
        const Index w = ga.cols();
        for (Index j = 0; j < w; ++j) ga.at(row, j) += g[j];
        break;
      }
      case Op::kSoftmax: {
        Tensor& ga = gref(n.x);
        const Tensor& y = n.value;
        double dot = 0.0;
        for (Index i = 0; i < g.size(); ++i) dot += g[i] * y[i];
        for (Index i = 0; i < g.size(); ++i) ga[i] += y[i] * (g[i] - dot);
        break;
      }
      case Op::kNllLoss: {
        Tensor& gp = gref(n.x);
        const Tensor& P = nodes_[n.x].value;
        const Index t = static_cast<Index>(n.i0);
        // Subgradient of -log(max(p, floor)): zero once the clamp is active.
        if (P[t] >= kLogFloor) gp[t] += g[0] * (-1.0 / P[t]);
        break;
      }
      case Op::kSum: {
        Tensor& ga = gref(n.x);
        for (Index i = 0; i < ga.size(); ++i) ga[i] += g[0];
        break;
      }
      case Op::kGroupSums: {
        Tensor& ga = gref(n.x);
        const auto& groups = group_lists_[static_cast<Index>(n.i0)];
        for (Index i = 0; i < ga.size(); ++i) ga[i] += g[static_cast<Index>(groups[i])];
        break;
      }
    }
  }
}

bool Tape::all_finite() const {
  for (const auto& n : nodes_)
    if (!n.value.all_finite()) return false;
  if (grads_valid_) {
    for (const auto& g : grads_)
      if (!g.all_finite()) return false;
  }
  return true;
}

}  // namespace mage
