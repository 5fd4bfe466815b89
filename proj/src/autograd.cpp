#include "qroute/autograd.hpp"

#include <cmath>
#include <limits>
#include <unordered_set>

#include "qroute/errors.hpp"

namespace qroute::ag {

namespace {

thread_local bool g_grad_enabled = true;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError(std::string(op) + ": shape mismatch");
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Var constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var make_op(Matrix value, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (!g_grad_enabled) return Var(std::move(n));
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (!needs) return Var(std::move(n));
  n->requires_grad = true;
  n->parents.reserve(parents.size());
  for (auto& p : parents) n->parents.push_back(p.shared());
  n->backward = std::move(fn);
  return Var(std::move(n));
}

void backward(const Var& root, double seed) {
  if (root.rows() != 1 || root.cols() != 1) throw ShapeError("backward needs a scalar root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_buffer()(0, 0) += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

#define QR_PARENT(i) (*self.parents[i])

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  return make_op(a.value() * b.value(), {a, b}, [](Node& self) {
    Node& pa = QR_PARENT(0);
    Node& pb = QR_PARENT(1);
    if (pa.requires_grad) pa.grad_buffer().noalias() += self.grad * pb.value.transpose();
    if (pb.requires_grad) pb.grad_buffer().noalias() += pa.value.transpose() * self.grad;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
  return make_op(a.value() * b.value().transpose(), {a, b}, [](Node& self) {
    Node& pa = QR_PARENT(0);
    Node& pb = QR_PARENT(1);
    if (pa.requires_grad) pa.grad_buffer().noalias() += self.grad * pb.value;
    if (pb.requires_grad) pb.grad_buffer().noalias() += self.grad.transpose() * pa.value;
  });
}

Var transpose(const Var& a) {
  return make_op(a.value().transpose(), {a}, [](Node& self) { QR_PARENT(0).grad_buffer() += self.grad.transpose(); });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_op(a.value() + b.value(), {a, b}, [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->grad_buffer() += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_op(a.value() - b.value(), {a, b}, [](Node& self) {
    if (QR_PARENT(0).requires_grad) QR_PARENT(0).grad_buffer() += self.grad;
    if (QR_PARENT(1).requires_grad) QR_PARENT(1).grad_buffer() -= self.grad;
  });
}

Var cmul(const Var& a, const Var& b) {
  require_same_shape(a, b, "cmul");
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    Node& pa = QR_PARENT(0);
    Node& pb = QR_PARENT(1);
    if (pa.requires_grad) pa.grad_buffer() += self.grad.cwiseProduct(pb.value);
    if (pb.requires_grad) pb.grad_buffer() += self.grad.cwiseProduct(pa.value);
  });
}

Var scale(const Var& a, double s) {
  return make_op(a.value() * s, {a}, [s](Node& self) { QR_PARENT(0).grad_buffer() += s * self.grad; });
}

Var add_bias(const Var& a, const Var& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw ShapeError("add_bias: bias must be 1 x cols");
  Matrix v = a.value().rowwise() + bias.value().row(0);
  return make_op(std::move(v), {a, bias}, [](Node& self) {
    if (QR_PARENT(0).requires_grad) QR_PARENT(0).grad_buffer() += self.grad;
    if (QR_PARENT(1).requires_grad) QR_PARENT(1).grad_buffer() += self.grad.colwise().sum();
  });
}

Var add_scalar(const Var& a, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("add_scalar: scalar expected");
  Matrix v = a.value().array() + s.scalar();
  return make_op(std::move(v), {a, s}, [](Node& self) {
    if (QR_PARENT(0).requires_grad) QR_PARENT(0).grad_buffer() += self.grad;
    if (QR_PARENT(1).requires_grad) QR_PARENT(1).grad_buffer()(0, 0) += self.grad.sum();
  });
}

Var mul_scalar(const Var& a, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("mul_scalar: scalar expected");
  return make_op(a.value() * s.scalar(), {a, s}, [](Node& self) {
    Node& pa = QR_PARENT(0);
    Node& ps = QR_PARENT(1);
    if (pa.requires_grad) pa.grad_buffer() += self.grad * ps.value(0, 0);
    if (ps.requires_grad) ps.grad_buffer()(0, 0) += self.grad.cwiseProduct(pa.value).sum();
  });
}

Var tanh(const Var& a) {
  Matrix v = a.value().array().tanh();
  return make_op(v, {a}, [](Node& self) {
    QR_PARENT(0).grad_buffer().array() += self.grad.array() * (1.0 - self.value.array().square());
  });
}

Var relu(const Var& a) {
  Matrix v = a.value().cwiseMax(0.0);
  return make_op(std::move(v), {a}, [](Node& self) {
    Node& p = QR_PARENT(0);
    p.grad_buffer().array() += (p.value.array() > 0.0).select(self.grad.array(), 0.0);
  });
}

Var leaky_relu(const Var& a, double slope) {
  Matrix v = (a.value().array() > 0.0).select(a.value().array(), slope * a.value().array());
  return make_op(std::move(v), {a}, [slope](Node& self) {
    Node& p = QR_PARENT(0);
    p.grad_buffer().array() += (p.value.array() > 0.0).select(self.grad.array(), slope * self.grad.array());
  });
}

Var square(const Var& a) {
  return make_op(a.value().array().square().matrix(), {a}, [](Node& self) {
    Node& p = QR_PARENT(0);
    p.grad_buffer().array() += 2.0 * self.grad.array() * p.value.array();
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != parts[0].rows()) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix v(parts[0].rows(), cols);
  Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_op(std::move(v), parts, [](Node& self) {
    Index at = 0;
    for (auto& p : self.parents) {
      if (p->requires_grad) p->grad_buffer() += self.grad.middleCols(at, p->value.cols());
      at += p->value.cols();
    }
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || start + count > a.cols()) throw ShapeError("slice_cols: out of range");
  return make_op(a.value().middleCols(start, count), {a}, [start, count](Node& self) {
    QR_PARENT(0).grad_buffer().middleCols(start, count) += self.grad;
  });
}

Var gather_rows(const Var& a, const std::vector<int>& rows) {
  Matrix v(rows.size(), a.cols());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t] < 0 || rows[t] >= a.rows()) throw ShapeError("gather_rows: index out of range");
    v.row(t) = a.value().row(rows[t]);
  }
  return make_op(std::move(v), {a}, [rows](Node& self) {
    Matrix& g = QR_PARENT(0).grad_buffer();
    for (std::size_t t = 0; t < rows.size(); ++t) g.row(rows[t]) += self.grad.row(t);
  });
}

Var repeat_rows(const Var& row, Index times) {
  if (row.rows() != 1) throw ShapeError("repeat_rows: single row expected");
  return make_op(row.value().replicate(times, 1), {row}, [](Node& self) {
    QR_PARENT(0).grad_buffer() += self.grad.colwise().sum();
  });
}

Var reshape(const Var& a, Index rows, Index cols) {
  if (rows * cols != a.value().size()) throw ShapeError("reshape: element count differs");
  Matrix v = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return make_op(std::move(v), {a}, [](Node& self) {
    Node& p = QR_PARENT(0);
    p.grad_buffer() += Eigen::Map<const Matrix>(self.grad.data(), p.value.rows(), p.value.cols());
  });
}

Var pair_sum(const Var& a, const Var& b) {
  require_same_shape(a, b, "pair_sum");
  const Index n = a.rows();
  Matrix v(n * n, a.cols());
  for (Index j = 0; j < n; ++j) v.middleRows(j * n, n) = a.value().rowwise() + b.value().row(j);
  return make_op(std::move(v), {a, b}, [n](Node& self) {
    Node& pa = QR_PARENT(0);
    Node& pb = QR_PARENT(1);
    for (Index j = 0; j < n; ++j) {
      const auto block = self.grad.middleRows(j * n, n);
      if (pa.requires_grad) pa.grad_buffer() += block;
      if (pb.requires_grad) pb.grad_buffer().row(j) += block.colwise().sum();
    }
  });
}

Var shift_rows(const Var& a, Index offset) {
  const Index n = a.rows();
  Matrix v = Matrix::Zero(n, a.cols());
  for (Index i = 0; i < n; ++i)
    if (i + offset >= 0 && i + offset < n) v.row(i) = a.value().row(i + offset);
  return make_op(std::move(v), {a}, [offset, n](Node& self) {
    Matrix& g = QR_PARENT(0).grad_buffer();
    for (Index i = 0; i < n; ++i)
      if (i + offset >= 0 && i + offset < n) g.row(i + offset) += self.grad.row(i);
  });
}

Var sum(const Var& a) {
  return make_op(Matrix::Constant(1, 1, a.value().sum()), {a}, [](Node& self) {
    QR_PARENT(0).grad_buffer().array() += self.grad(0, 0);
  });
}

Var mean(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a.value().size());
  return make_op(Matrix::Constant(1, 1, a.value().mean()), {a}, [inv](Node& self) {
    QR_PARENT(0).grad_buffer().array() += self.grad(0, 0) * inv;
  });
}

Var mean_rows(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a.rows());
  return make_op(a.value().colwise().mean(), {a}, [inv](Node& self) {
    QR_PARENT(0).grad_buffer().rowwise() += self.grad.row(0) * inv;
  });
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Matrix masked_softmax_value(const Matrix& a, const Mask& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) throw ShapeError("mask shape differs from logits");
  if (!a.allFinite()) throw NumericalError("non-finite logits");
  Matrix p = Matrix::Zero(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    double mx = kNegInf;
    for (Index c = 0; c < a.cols(); ++c)
      if (mask(r, c)) mx = std::max(mx, a(r, c));
    if (mx == kNegInf) throw NoFeasibleActionError("every entry of a softmax row is masked");
    double z = 0;
    for (Index c = 0; c < a.cols(); ++c)
      if (mask(r, c)) z += (p(r, c) = std::exp(a(r, c) - mx));
    p.row(r) /= z;
  }
  return p;
}

}  // namespace

Var softmax_rows(const Var& a) { return masked_softmax_rows(a, Mask::Constant(a.rows(), a.cols(), true)); }

Var masked_softmax_rows(const Var& a, const Mask& mask) {
  Matrix p = masked_softmax_value(a.value(), mask);
  return make_op(std::move(p), {a}, [](Node& self) {
    // dL/da = p * (g - sum(g * p)); masked entries have p = 0.
    const auto& p = self.value;
    const Eigen::VectorXd dot = (self.grad.cwiseProduct(p)).rowwise().sum();
    QR_PARENT(0).grad_buffer().array() += p.array() * (self.grad.colwise() - dot).array();
  });
}

Var masked_log_softmax_rows(const Var& a, const Mask& mask) {
  const Matrix p = masked_softmax_value(a.value(), mask);
  Matrix v(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    double mx = kNegInf;
    for (Index c = 0; c < a.cols(); ++c)
      if (mask(r, c)) mx = std::max(mx, a.value()(r, c));
    double z = 0;
    for (Index c = 0; c < a.cols(); ++c)
      if (mask(r, c)) z += std::exp(a.value()(r, c) - mx);
    const double lse = mx + std::log(z);
    for (Index c = 0; c < a.cols(); ++c) v(r, c) = mask(r, c) ? a.value()(r, c) - lse : kNegInf;
  }
  return make_op(std::move(v), {a}, [p, mask](Node& self) {
    // dL/da = g - p * sum(g) over allowed entries.
    const Matrix g = mask.select(self.grad.array(), 0.0).matrix();
    const Eigen::VectorXd total = g.rowwise().sum();
    QR_PARENT(0).grad_buffer() += g - (p.array().colwise() * total.array()).matrix();
  });
}

Var pick(const Var& a, const std::vector<int>& index) {
  if (static_cast<Index>(index.size()) != a.rows()) throw ShapeError("pick: one index per row expected");
  Matrix v(a.rows(), 1);
  for (Index t = 0; t < a.rows(); ++t) {
    if (index[t] < 0 || index[t] >= a.cols()) throw ShapeError("pick: index out of range");
    v(t, 0) = a.value()(t, index[t]);
  }
  return make_op(std::move(v), {a}, [index](Node& self) {
    Matrix& g = QR_PARENT(0).grad_buffer();
    for (std::size_t t = 0; t < index.size(); ++t) g(t, index[t]) += self.grad(t, 0);
  });
}

Var masked_entropy_rows(const Var& log_probs, const Mask& mask) {
  const Matrix& lp = log_probs.value();
  Matrix v = Matrix::Zero(lp.rows(), 1);
  for (Index r = 0; r < lp.rows(); ++r)
    for (Index c = 0; c < lp.cols(); ++c)
      if (mask(r, c)) v(r, 0) -= std::exp(lp(r, c)) * lp(r, c);
  return make_op(std::move(v), {log_probs}, [mask](Node& self) {
    // dH/dl_j = -p_j (1 + l_j); the softmax constraint is handled upstream.
    Node& p = QR_PARENT(0);
    Matrix& g = p.grad_buffer();
    for (Index r = 0; r < p.value.rows(); ++r)
      for (Index c = 0; c < p.value.cols(); ++c)
        if (mask(r, c)) g(r, c) -= self.grad(r, 0) * std::exp(p.value(r, c)) * (1.0 + p.value(r, c));
  });
}

#undef QR_PARENT

}  // namespace qroute::ag
