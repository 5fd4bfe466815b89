#include "qroute/qnn.hpp"

#include <cmath>
#include <mutex>

namespace qroute::nn {

struct QnnLayer::Shared {
  std::mutex mutex;
  // Per circuit: angles the observables were compiled for, and the result.
  std::vector<Eigen::VectorXd> compiled_theta;
  std::vector<std::shared_ptr<const Eigen::MatrixXd>> compiled;
  // Per circuit, per qubit: sum_p G(p, k) psi_p psi_p^T awaiting finalization.
  std::vector<std::vector<Eigen::MatrixXd>> pending;
  std::vector<bool> has_pending;
};

namespace {

std::vector<qsim::Axis> embedding_axes(const QsimConfig& qsim) {
  return std::vector<qsim::Axis>(qsim.n_qubits, qsim.embedding == "x" ? qsim::Axis::X : qsim::Axis::Y);
}

}  // namespace

QnnLayer::QnnLayer(ParamStore& store, const std::string& name, int in, int out, int circuits,
                   const QsimConfig& qsim, Rng& rng)
    : spec_(qsim::CircuitSpec::hardware_efficient(qsim.n_qubits, qsim.n_layers, qsim.entangler)),
      shared_(std::make_shared<Shared>()) {
  spec_.embedding = embedding_axes(qsim);
  spec_.validate();
  in_proj = Linear(store, name + ".in_proj", in, qsim.n_qubits, true, rng);
  for (int c = 0; c < circuits; ++c) {
    Matrix theta(spec_.parameter_count(), 1);
    for (Eigen::Index i = 0; i < theta.rows(); ++i) theta(i, 0) = rng.uniform(-M_PI, M_PI);
    thetas.push_back(store.add(name + ".theta." + std::to_string(c), theta, ParamKind::Quantum));
  }
  out_proj = Linear(store, name + ".out_proj", circuits * qsim.n_qubits, out, true, rng);

  const Eigen::Index dim = spec_.dimension();
  shared_->compiled_theta.resize(circuits);
  shared_->compiled.resize(circuits);
  shared_->pending.assign(circuits, std::vector<Eigen::MatrixXd>(spec_.n_qubits, Eigen::MatrixXd::Zero(dim, dim)));
  shared_->has_pending.assign(circuits, false);

  store.add_finalizer([shared = shared_, thetas = thetas, base = spec_]() {
    std::lock_guard lock(shared->mutex);
    for (std::size_t c = 0; c < thetas.size(); ++c) {
      if (!shared->has_pending[c]) continue;
      qsim::CircuitSpec s = base;
      s.theta = thetas[c].value().col(0);
      thetas[c].grad_buffer().col(0) += qsim::ensemble_theta_gradient(s, shared->pending[c]);
      for (auto& r : shared->pending[c]) r.setZero();
      shared->has_pending[c] = false;
    }
  });
}

qsim::CircuitSpec QnnLayer::spec(int c) const {
  qsim::CircuitSpec s = spec_;
  s.theta = thetas.at(c).value().col(0);
  return s;
}

ag::Var QnnLayer::expectations(const ag::Var& pre) const {
  const int n = spec_.n_qubits;
  if (pre.cols() != n) throw ShapeError("QNN pre-activations must have one column per qubit");
  const Eigen::Index dim = spec_.dimension();
  const Eigen::Index rows = pre.rows();
  const int nc = circuits();

  std::vector<std::shared_ptr<const Eigen::MatrixXd>> obs(nc);
  {
    std::lock_guard lock(shared_->mutex);
    for (int c = 0; c < nc; ++c) {
      const Eigen::VectorXd theta = thetas[c].value().col(0);
      if (!shared_->compiled[c] || shared_->compiled_theta[c] != theta) {
        shared_->compiled[c] = std::make_shared<const Eigen::MatrixXd>(qsim::compiled_observables(spec(c)));
        shared_->compiled_theta[c] = theta;
      }
      obs[c] = shared_->compiled[c];
    }
  }

  const Matrix t = pre.value().array().tanh().matrix();
  const Matrix angles = t * M_PI;
  if (!angles.allFinite()) throw NumericalError("non-finite QNN input");
  Eigen::MatrixXd psi = qsim::product_states(angles);  // dim x rows

  Matrix out(rows, nc * n);
  for (int c = 0; c < nc; ++c) {
    const Eigen::MatrixXd m = (*obs[c]) * psi;  // (n * dim) x rows
    for (int k = 0; k < n; ++k)
      out.col(c * n + k) = m.middleRows(k * dim, dim).cwiseProduct(psi).colwise().sum().transpose();
  }

  std::vector<ag::Var> parents{pre};
  for (const auto& th : thetas) parents.push_back(th);
  auto shared = shared_;
  return ag::make_op(std::move(out), parents,
                     [pre, thetas = thetas, obs, psi = std::move(psi), t, n, dim, shared](ag::Node& self) {
    const Matrix& g = self.grad;
    const Eigen::Index rows = psi.cols();
    if (pre.requires_grad()) {
      // d/da_q of psi^T A psi = 2 psi^T A dpsi/da_q, with dpsi_{b0} = -psi_{b1}/2
      // and dpsi_{b1} = psi_{b0}/2 for the pair (b0, b1) differing in bit q.
      Eigen::MatrixXd v = Eigen::MatrixXd::Zero(dim, rows);
      for (std::size_t c = 0; c < obs.size(); ++c) {
        for (int k = 0; k < n; ++k) {
          const Eigen::VectorXd w = g.col(c * n + k);
          if (w.isZero(0)) continue;
          v.noalias() += (obs[c]->middleRows(k * dim, dim) * psi) * w.asDiagonal();
        }
      }
      Matrix ga = Matrix::Zero(rows, n);
      for (int q = 0; q < n; ++q) {
        const Eigen::Index bit = Eigen::Index(1) << q;
        for (Eigen::Index b0 = 0; b0 < dim; ++b0) {
          if (b0 & bit) continue;
          const Eigen::Index b1 = b0 | bit;
          ga.col(q) += (psi.row(b0).cwiseProduct(v.row(b1)) - psi.row(b1).cwiseProduct(v.row(b0))).transpose();
        }
      }
      // angle = pi * tanh(pre)
      pre.grad_buffer().array() += ga.array() * M_PI * (1.0 - t.array().square());
    }
    std::lock_guard lock(shared->mutex);
    for (std::size_t c = 0; c < thetas.size(); ++c) {
      if (!thetas[c].requires_grad()) continue;
      for (int k = 0; k < n; ++k) {
        const Eigen::VectorXd w = g.col(c * n + k);
        if (w.isZero(0)) continue;
        shared->pending[c][k].noalias() += psi * w.asDiagonal() * psi.transpose();
        shared->has_pending[c] = true;
      }
    }
  });
}

}  // namespace qroute::nn
