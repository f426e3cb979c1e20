#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "nar/tensor.hpp"

namespace nar {

class Tape;

namespace detail {
struct Node {
  Tensor value;
  Tensor grad;  // lazily allocated; freed after the node's backward runs
  bool requires_grad = false;
  bool has_grad = false;
  bool is_leaf = false;
  Tape* tape = nullptr;
  std::function<void()> backward;
};
}  // namespace detail

/// Handle to a tensor in a differentiable computation. Copying a Var shares
/// the underlying node. A Var created with a null tape (or from such inputs)
/// carries values only; no graph is recorded.
class Var {
 public:
  Var() = default;

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const;
  bool has_grad() const { return node_ && node_->has_grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::vector<int>& shape() const { return node_->value.shape(); }

 private:
  friend class Tape;
  friend struct OpAccess;
  std::shared_ptr<detail::Node> node_;
};

/// Define-by-run tape for one forward pass. Operations are recorded in
/// execution order; backward() replays them in exact reverse order. The
/// gradient of a node consumed k times is the sum of the k contributions.
/// A tape is confined to a single execution stream.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad);

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be a scalar on
  /// this tape. May be called once per tape.
  void backward(const Var& loss);

  size_t size() const { return order_.size(); }

 private:
  friend struct OpAccess;
  void record(const std::shared_ptr<detail::Node>& node) { order_.push_back(node); }

  std::vector<std::shared_ptr<detail::Node>> order_;
  bool backward_done_ = false;
};

/// Value-only tensor handle, usable with any op; never requires grad.
Var constant(Tensor value);

/// When enabled, every op validates that its output is finite and throws on
/// NaN/Inf naming the op. Off by default (it is a full scan per op).
void set_checked_mode(bool enabled);
bool checked_mode();

// ---- primitive ops ----------------------------------------------------------
// Shapes are validated before compute; mismatches throw std::invalid_argument
// naming the op and both shapes. Each op defines an exact reverse-mode
// gradient.

/// Elementwise a + b. b may have a shape that is a trailing suffix of a's
/// (broadcast over the leading axes), e.g. bias (d) onto (n,d) or graph
/// features (d) onto (n,n,d).
Var add(const Var& a, const Var& b);
/// Elementwise a - b (same broadcast rule as add).
Var sub(const Var& a, const Var& b);
/// Elementwise a * b (same broadcast rule as add).
Var mul(const Var& a, const Var& b);
/// scale * x + shift with scalar constants.
Var affine(const Var& x, float scale, float shift);

/// Matrix product. a is treated as (rows, K) with all leading axes flattened;
/// b must be rank-2 (K, N). Result has a's leading axes and last extent N.
Var matmul(const Var& a, const Var& b);
/// a (rows, K) x b (N, K)^T -> (rows, N).
Var matmul_nt(const Var& a, const Var& b);

/// Concatenate along the last axis; leading axes must agree.
Var concat_last(const std::vector<Var>& parts);

/// Pairwise feature table: out[i,j] = [a[i], b[j], e[i,j], g]. a,b are (n,da),
/// (n,db); e is (n,n,de) or undefined; g is (dg) or undefined.
Var edge_concat(const Var& a, const Var& b, const Var& e, const Var& g);

/// Triplet feature table of width w:
/// out[i,j,k] = pi[i] + pj[j] + pk[k] + pij[i,j] + pik[i,k] + pkj[k,j] + pg.
/// pi,pj,pk are (n,w); pij,pik,pkj are (n,n,w); pg is (w).
Var triplet_combine(const Var& pi, const Var& pj, const Var& pk, const Var& pij, const Var& pik, const Var& pkj,
                    const Var& pg);

/// Stack m copies of x along a new leading axis -> (m, x.shape...).
Var tile0(const Var& x, int m);
/// Swap the first two axes (rank >= 2).
Var swap01(const Var& x);
/// Same data, new shape (numel preserved).
Var reshape(const Var& x, std::vector<int> shape);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var exp_op(const Var& x);
Var log_op(const Var& x);
/// log(1 + e^x), evaluated stably.
Var softplus(const Var& x);

Var reduce_sum(const Var& x, int axis);
Var reduce_mean(const Var& x, int axis);
/// Max along `axis`; ties route the subgradient to the first argmax.
Var reduce_max(const Var& x, int axis);
/// Sum of all elements -> scalar (1,).
Var sum_all(const Var& x);

/// Row-wise over the last axis.
Var softmax(const Var& x);
Var log_softmax(const Var& x);

/// Normalization over the last axis with learned scale and shift (both shaped
/// (d)). Variance epsilon 1e-5.
Var layer_norm(const Var& x, const Var& scale, const Var& shift);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

constexpr float kLayerNormEps = 1e-5f;

}  // namespace nar
