#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

// Minimal reverse-mode differentiation over dense Eigen matrices. Every op
// records a closure that pushes the node's gradient into its parents.
namespace qroute::ag {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct Node {
  Matrix value;
  Matrix grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Matrix& grad_buffer() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& grad_buffer() const { return node_->grad_buffer(); }
  void zero_grad() const { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

/// While alive, ops on this thread record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

Var constant(Matrix value);
Var parameter(Matrix value);

/// Builds an op result. `fn` runs during backward with the result node; it is
/// dropped (and the result becomes a constant) when no parent needs gradients.
Var make_op(Matrix value, std::vector<Var> parents, std::function<void(Node&)> fn);

/// Seeds d(root)/d(root) = seed (root must be 1x1) and propagates.
void backward(const Var& root, double seed = 1.0);

// Linear algebra
Var matmul(const Var& a, const Var& b);      // a b
Var matmul_nt(const Var& a, const Var& b);   // a b^T
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var cmul(const Var& a, const Var& b);        // elementwise
Var scale(const Var& a, double s);
Var add_bias(const Var& a, const Var& bias);     // bias is 1 x cols, added to each row
Var add_scalar(const Var& a, const Var& s);      // s is 1 x 1
Var mul_scalar(const Var& a, const Var& s);      // s is 1 x 1

// Elementwise nonlinearities
Var tanh(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var square(const Var& a);

// Shape
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Index start, Index count);
Var gather_rows(const Var& a, const std::vector<int>& rows);
Var repeat_rows(const Var& row, Index times);
Var reshape(const Var& a, Index rows, Index cols);  // column-major order
/// Row (i + j * n) of the result is a.row(i) + b.row(j); a and b are n x k.
Var pair_sum(const Var& a, const Var& b);
/// Row i of the result is a.row(i + offset), zero outside the range.
Var shift_rows(const Var& a, Index offset);

// Reductions
Var sum(const Var& a);
Var mean(const Var& a);
Var mean_rows(const Var& a);  // 1 x cols

// Row-wise distributions over allowed entries (mask true = allowed).
Var softmax_rows(const Var& a);
Var masked_softmax_rows(const Var& a, const Mask& mask);
/// Masked entries become -inf and receive no gradient.
Var masked_log_softmax_rows(const Var& a, const Mask& mask);
/// Picks a(t, index[t]) into a column.
Var pick(const Var& a, const std::vector<int>& index);
/// -sum_j p_j log p_j per row from log-probabilities, over allowed entries.
Var masked_entropy_rows(const Var& log_probs, const Mask& mask);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace qroute::ag
