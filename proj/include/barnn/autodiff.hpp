#pragma once

// Define-by-run reverse-mode differentiation over dense f64 tensors.
//
// Every op on a Var records a node on the Var's tape. Binary elementwise ops
// accept operands of equal shape, or one operand whose shape equals the
// other's with the leading (batch) dimension removed; no other broadcasting
// is supported. relu, and sqrt at exactly 0, use subgradient 0.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "barnn/tensor.hpp"

namespace barnn::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives the node's upstream gradient and pushes contributions to parents.
  using Backward = std::function<void(Tape&, std::size_t self, const Tensor& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Tensor value);
  /// Input treated as a constant; gradients never flow into it.
  Var constant(Tensor value);

  /// Gradient of a single-element `output` with respect to each of `wrt`.
  std::vector<Tensor> grad(Var output, std::span<const Var> wrt);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  std::span<const std::size_t> parents(std::size_t id) const { return nodes_[id].parents; }

  // Used by op implementations.
  Var record(Tensor value, std::vector<Var> parents, Backward backward);
  void accumulate(std::size_t id, const Tensor& contribution);
  void accumulate_batch_sum(std::size_t id, const Tensor& contribution);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    Backward backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  // Backward-pass scratch, only meaningful during grad().
  std::vector<Tensor> grads_;
  std::vector<bool> has_grad_;
};

// Arithmetic.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var x, double c);
Var add_scalar(Var x, double c);

// Elementwise maps.
Var square(Var x);
Var sqrt(Var x);
Var exp(Var x);
Var log(Var x);
Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);

/// Row-wise log-softmax over the last dimension of a rank-1 or rank-2 tensor.
Var log_softmax(Var x);

// Reductions.
Var sum(Var x);
Var mean(Var x);
/// Sum over the leading dimension: [B, ...] -> [...].
Var sum_batch(Var x);

// Structural.
/// out[b, j] = x[b, j] * a[b] for x of shape [B, N] and a of shape [B].
Var scale_rows(Var x, Var a);
/// Columns [start, start + count) of a rank-2 tensor.
Var slice_cols(Var x, std::size_t start, std::size_t count);
Var reshape(Var x, Shape shape);
/// out[b] = x[b, index[b]].
Var pick(Var x, std::span<const std::size_t> index);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator*(double c, Var x) { return scale(x, c); }
inline Var operator*(Var x, double c) { return scale(x, c); }

/// Plain matrix product of rank-2 tensors (no tape).
Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace barnn::ad
