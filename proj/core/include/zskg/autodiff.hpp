#pragma once

// Reverse-mode differentiation over dense 2-D tensors.
//
// Every primitive's backward rule is itself written in terms of Var
// operations, so running grad() with create_graph = true records the
// backward pass and the resulting gradients can be differentiated again.
// That second-order path is what the gradient penalty needs.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "zskg/tensor.hpp"

namespace zskg::ad {

class Var;

/// Receives (upstream gradient, this node's output) and returns one gradient
/// per parent; an undefined Var means "no contribution".
using BackwardFn = std::function<std::vector<Var>(const Var& grad_out, const Var& out)>;

struct Node : std::enable_shared_from_this<Node> {
  Tensor value;
  std::vector<Var> parents;
  BackwardFn backward;
  bool requires_grad = false;
  const char* op = "leaf";
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  /// A value that never receives gradients.
  static Var constant(Tensor value);
  /// A leaf that gradients can be taken with respect to.
  static Var variable(Tensor value);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// In-place access for optimizers; only legal on leaves.
  Tensor& mutable_value();
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool is_leaf() const { return !node_->backward; }
  const char* op() const { return node_->op; }
  /// Value of a 1×1 tensor.
  double item() const;
  Node* node() const { return node_.get(); }

 private:
  std::shared_ptr<Node> node_;
};

/// Whether new operations are recorded.
bool grad_enabled();

/// Disables recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Gradients of a scalar output with respect to each input. Inputs that do
/// not influence the output get a zero tensor. With create_graph the returned
/// gradients are themselves differentiable.
/// Throws NumericalError if the output or any gradient is non-finite.
std::vector<Var> grad(const Var& output, std::span<const Var> inputs, bool create_graph = false);

// ---- primitives ----------------------------------------------------------
Var matmul(const Var& a, const Var& b);     ///< A B
Var matmul_nt(const Var& a, const Var& b);  ///< A Bᵀ
Var matmul_tn(const Var& a, const Var& b);  ///< Aᵀ B

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  ///< elementwise
Var div(const Var& a, const Var& b);  ///< elementwise
Var neg(const Var& a);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
/// a multiplied by the single entry of the 1×1 tensor s.
Var scale_by(const Var& a, const Var& s);

Var tanh(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.2);
Var relu(const Var& a);
Var sqrt(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);  ///< log(1 + eˣ), computed stably

Var sum_rows(const Var& a);                        ///< m×n → 1×n
Var sum_cols(const Var& a);                        ///< m×n → m×1
Var broadcast_rows(const Var& a, std::size_t m);   ///< 1×n → m×n
Var broadcast_cols(const Var& a, std::size_t n);   ///< m×1 → m×n

Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& a, std::size_t begin, std::size_t count);
Var pad_cols(const Var& a, std::size_t offset, std::size_t total);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(const Var& a, std::size_t begin, std::size_t count);
Var pad_rows(const Var& a, std::size_t offset, std::size_t total);

/// Rows of `table` selected by index.
Var gather_rows(const Var& table, std::span<const std::size_t> index);
/// Adjoint of gather_rows: row i of `a` is added into output row index[i].
Var scatter_add_rows(const Var& a, std::span<const std::size_t> index, std::size_t rows);

// ---- composites ------------------------------------------------------------
Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var mean_rows(const Var& a);                     ///< 1×n mean over the row set
Var square(const Var& a);
Var add_row(const Var& x, const Var& bias);      ///< x + bias broadcast over rows
Var linear(const Var& x, const Var& weight, const Var& bias);  ///< x Wᵀ + b
Var row_norm(const Var& a);                      ///< m×1 L2 norms
Var cosine_rows(const Var& a, const Var& b);     ///< m×1 row-wise cosine
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }

/// Named trainable tensor. The gradient accumulator lives alongside the
/// value so optimizers can consume it.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor init);
  // Copies are deep: a copied model never aliases the original's storage.
  Parameter(const Parameter& other);
  Parameter& operator=(const Parameter& other);
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  const std::string& name() const { return name_; }
  const Var& var() const { return var_; }
  const Tensor& value() const { return var_.value(); }
  Tensor& value() { return var_.mutable_value(); }
  Tensor& grad() { return grad_; }
  const Tensor& grad() const { return grad_; }
  void zero_grad() { grad_.fill(0.0); }

 private:
  std::string name_;
  Var var_;
  Tensor grad_;
};

/// First-order gradients of `loss` accumulated into each parameter's grad().
void backward(const Var& loss, std::span<Parameter* const> params);

}  // namespace zskg::ad
