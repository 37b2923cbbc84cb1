#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "srgf/matrix.hpp"

namespace srgf::ad {

class Tape;

/// Raised when an autodiff contract is violated (non-scalar loss, reused tape, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of primitive operations. Nodes are appended in evaluation
/// order, so the record is always topologically sorted and backward walks it
/// in reverse exactly once.
class Tape {
 public:
  /// Receives the accumulated gradient and the forward value of the node's output.
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad, const Matrix& out_value)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Matrix value);
  /// Input that never receives a gradient.
  Var constant(Matrix value);

  const Matrix& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient of the last backward pass; zeros when the node was unreachable.
  Matrix gradient(Var v) const;

  /// Reverse pass from a 1x1 node.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  /// Appends an operation. `backward` is dropped when no input needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Matrix value, const std::vector<Var>& inputs, BackwardFn backward);
  /// Adds `g` into the gradient buffer of node `id` if it requires a gradient.
  void accumulate(std::size_t id, const Matrix& g);
  /// Zero-initialized gradient buffer of node `id`, for in-place accumulation.
  Matrix& grad_buffer(std::size_t id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Matrix value, bool requires_grad, BackwardFn backward);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

double scalar(Var v);

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
/// a^T * b
Var matmul_tn(Var a, Var b);
/// The sparse operand is not copied and must outlive the backward pass.
Var spmm(const SparseMatrix& s, Var d);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var hadamard(Var a, Var b);
/// Elementwise product with a constant matrix (dropout masks, noise gates).
Var mul_constant(Var a, const Matrix& c);
/// Elementwise sum with a constant matrix.
Var add_constant(Var a, const Matrix& c);

/// Sum of all entries as 1x1.
Var sum(Var a);
/// Sum of squared entries as 1x1.
Var sum_squares(Var a);

/// Row-wise softmax with per-row max subtraction.
Var softmax_rows(Var a);
/// Row-wise unit l2 normalization; all-zero rows map to zero.
Var l2_normalize_rows(Var a);
/// Per-row dot product, N x 1.
Var row_dot(Var a, Var b);
/// Row-wise log-sum-exp, N x 1.
Var logsumexp_rows(Var a);
/// Elementwise log(sigmoid(x)), computed without overflow.
Var log_sigmoid(Var a);

Var gather_rows(Var a, std::vector<std::size_t> indices);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
/// [top; bottom]
Var vstack(Var top, Var bottom);
/// [parts[0], parts[1], ...] side by side.
Var hstack(const std::vector<Var>& parts);
/// Elementwise arithmetic mean of equally shaped nodes.
Var mean_of(const std::vector<Var>& parts);

// Operations restricted to the sparsity pattern of a SparseMatrix (weights
// are ignored). Values on the pattern are carried as nnz x 1 columns in CSR
// order. The pattern must outlive the backward pass.

/// v_k = factor * <a_row(k), b_col(k)> for every stored entry k.
Var sddmm(const SparseMatrix& pattern, Var a, Var b, double factor);
/// Softmax over the stored entries of each pattern row.
Var segment_softmax(const SparseMatrix& pattern, Var values);
/// Sparse (pattern, values) times dense.
Var pattern_spmm(const SparseMatrix& pattern, Var values, Var dense);

}  // namespace srgf::ad
