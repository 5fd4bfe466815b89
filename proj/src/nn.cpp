#include "qroute/nn.hpp"

#include <cmath>

#include "qroute/errors.hpp"

namespace qroute::nn {

ag::Var ParamStore::add(const std::string& name, Matrix init, ParamKind kind) {
  if (find(name)) throw ConfigError("duplicate parameter name " + name);
  auto v = ag::parameter(std::move(init));
  params_.push_back({name, v, kind});
  return v;
}

ag::Var ParamStore::add_buffer(const std::string& name, Matrix init) {
  auto v = ag::constant(std::move(init));
  buffers_.emplace_back(name, v);
  return v;
}

ag::Var ParamStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.var;
  for (const auto& [n, v] : buffers_)
    if (n == name) return v;
  return {};
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

void ParamStore::finalize_gradients() {
  for (auto& f : finalizers_) f();
}

ParameterCount ParamStore::count() const {
  ParameterCount c;
  for (const auto& p : params_) (p.kind == ParamKind::Quantum ? c.quantum : c.classical) += p.var.value().size();
  return c;
}

Eigen::VectorXd ParamStore::flat_values() const {
  Eigen::VectorXd out(count().total());
  Eigen::Index at = 0;
  for (const auto& p : params_) {
    const auto& v = p.var.value();
    out.segment(at, v.size()) = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
    at += v.size();
  }
  return out;
}

Eigen::VectorXd ParamStore::flat_grads() const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(count().total());
  Eigen::Index at = 0;
  for (const auto& p : params_) {
    const auto& g = p.var.grad();
    const auto size = p.var.value().size();
    if (g.size() != 0) out.segment(at, size) = Eigen::Map<const Eigen::VectorXd>(g.data(), size);
    at += size;
  }
  return out;
}

void ParamStore::set_flat_values(const Eigen::VectorXd& v) {
  if (v.size() != count().total()) throw ShapeError("flat parameter vector has the wrong length");
  Eigen::Index at = 0;
  for (auto& p : params_) {
    auto& m = p.var.mutable_value();
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = v.segment(at, m.size());
    at += m.size();
  }
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, bool with_bias, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(in, 1)));
  Matrix w(out, in);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  weight = store.add(name + ".weight", std::move(w));
  if (with_bias) {
    Matrix b(1, out);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-bound, bound);
    bias = store.add(name + ".bias", std::move(b));
  }
}

ag::Var Linear::operator()(const ag::Var& x) const {
  auto y = ag::matmul_nt(x, weight);
  return bias ? ag::add_bias(y, bias) : y;
}

BatchNorm::BatchNorm(ParamStore& store, const std::string& name, int dim, double mom) : momentum(mom) {
  gamma = store.add(name + ".gamma", Matrix::Ones(1, dim));
  beta = store.add(name + ".beta", Matrix::Zero(1, dim));
  running_mean = store.add_buffer(name + ".running_mean", Matrix::Zero(1, dim));
  running_var = store.add_buffer(name + ".running_var", Matrix::Ones(1, dim));
}

ag::Var BatchNorm::operator()(const ag::Var& x, BnMode mode) const {
  const auto n = x.rows();
  if (mode == BnMode::Eval) {
    const Eigen::RowVectorXd inv = (running_var.value().array() + eps).rsqrt();
    const Eigen::RowVectorXd mu = running_mean.value();
    Matrix xhat = (x.value().rowwise() - mu).array().rowwise() * inv.array();
    Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
    return ag::make_op(std::move(y), {x, gamma, beta}, [xhat, inv](ag::Node& self) {
      auto& px = *self.parents[0];
      auto& pg = *self.parents[1];
      auto& pb = *self.parents[2];
      if (px.requires_grad)
        px.grad_buffer().array() += self.grad.array().rowwise() * (pg.value.row(0).array() * inv.array());
      if (pg.requires_grad) pg.grad_buffer() += self.grad.cwiseProduct(xhat).colwise().sum();
      if (pb.requires_grad) pb.grad_buffer() += self.grad.colwise().sum();
    });
  }

  if (n < 2) throw ShapeError("batch normalization in training mode needs at least 2 rows");
  const Eigen::RowVectorXd mu = x.value().colwise().mean();
  const Matrix centered = x.value().rowwise() - mu;
  const Eigen::RowVectorXd var = centered.array().square().colwise().mean();
  const Eigen::RowVectorXd inv = (var.array() + eps).rsqrt();
  Matrix xhat = centered.array().rowwise() * inv.array();
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();

  if (mode == BnMode::TrainTrack) {
    const double unbiased = static_cast<double>(n) / static_cast<double>(n - 1);
    ag::Var rm = running_mean, rv = running_var;
    rm.mutable_value() = (1 - momentum) * rm.value() + momentum * mu;
    rv.mutable_value() = (1 - momentum) * rv.value() + momentum * unbiased * var;
  }

  return ag::make_op(std::move(y), {x, gamma, beta}, [xhat, inv, n](ag::Node& self) {
    auto& px = *self.parents[0];
    auto& pg = *self.parents[1];
    auto& pb = *self.parents[2];
    const Eigen::RowVectorXd dbeta = self.grad.colwise().sum();
    const Eigen::RowVectorXd dgamma = self.grad.cwiseProduct(xhat).colwise().sum();
    if (px.requires_grad) {
      const double inv_n = 1.0 / static_cast<double>(n);
      // dx = gamma * inv / n * (n * dy - sum(dy) - xhat * sum(dy * xhat))
      Matrix dxhat = (n * self.grad).rowwise() - dbeta;
      dxhat -= (xhat.array().rowwise() * dgamma.array()).matrix();
      px.grad_buffer().array() +=
          dxhat.array().rowwise() * (pg.value.row(0).array() * inv.array() * inv_n);
    }
    if (pg.requires_grad) pg.grad_buffer() += dgamma;
    if (pb.requires_grad) pb.grad_buffer() += dbeta;
  });
}

Adam::Adam(ParamStore& store, double lr, double grad_clip_norm, double beta1, double beta2, double eps)
    : store_(store), lr_(lr), clip_(grad_clip_norm), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : store_.params()) {
    m_.push_back(Matrix::Zero(p.var.rows(), p.var.cols()));
    v_.push_back(Matrix::Zero(p.var.rows(), p.var.cols()));
  }
}

double Adam::step() {
  double sq = 0;
  for (const auto& p : store_.params())
    if (p.var.grad().size() != 0) sq += p.var.grad().squaredNorm();
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericalError("non-finite gradient norm");
  const double factor = (clip_ > 0 && norm > clip_) ? clip_ / norm : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto& params = store_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ag::Var var = params[i].var;
    if (var.grad().size() == 0) continue;
    const Matrix g = var.grad() * factor;
    m_[i] = beta1_ * m_[i] + (1 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1 - beta2_) * g.cwiseProduct(g);
    var.mutable_value().array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
  return norm;
}

std::vector<std::pair<std::string, Matrix>> Adam::state() const {
  std::vector<std::pair<std::string, Matrix>> out;
  const auto& params = store_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.emplace_back("adam.m." + params[i].name, m_[i]);
    out.emplace_back("adam.v." + params[i].name, v_[i]);
  }
  return out;
}

void Adam::load_state(const std::vector<std::pair<std::string, Matrix>>& named, long steps) {
  const auto& params = store_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (const auto& [name, value] : named) {
      if (name == "adam.m." + params[i].name && value.rows() == m_[i].rows() && value.cols() == m_[i].cols())
        m_[i] = value;
      if (name == "adam.v." + params[i].name && value.rows() == v_[i].rows() && value.cols() == v_[i].cols())
        v_[i] = value;
    }
  }
  t_ = steps;
}

}  // namespace qroute::nn
