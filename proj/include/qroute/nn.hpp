#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qroute/autograd.hpp"
#include "qroute/random.hpp"

namespace qroute::nn {

using ag::Matrix;

enum class ParamKind { Classical, Quantum };

struct NamedParam {
  std::string name;
  ag::Var var;
  ParamKind kind;
};

struct ParameterCount {
  long classical = 0;
  long quantum = 0;
  long total() const { return classical + quantum; }
};

/// Owns the trainable parameters and persistent buffers of a model, in
/// registration order (which is also checkpoint order).
class ParamStore {
 public:
  ag::Var add(const std::string& name, Matrix init, ParamKind kind = ParamKind::Classical);
  /// Non-trainable state saved with checkpoints (e.g. running statistics).
  ag::Var add_buffer(const std::string& name, Matrix init);

  const std::vector<NamedParam>& params() const { return params_; }
  const std::vector<std::pair<std::string, ag::Var>>& buffers() const { return buffers_; }
  ag::Var find(const std::string& name) const;

  void zero_grad();
  /// Some ops defer part of their gradient (see QnnLayer); call after the
  /// last backward of a batch and before reading gradients.
  void add_finalizer(std::function<void()> fn) { finalizers_.push_back(std::move(fn)); }
  void finalize_gradients();

  ParameterCount count() const;
  Eigen::VectorXd flat_values() const;
  Eigen::VectorXd flat_grads() const;
  void set_flat_values(const Eigen::VectorXd& v);

 private:
  std::vector<NamedParam> params_;
  std::vector<std::pair<std::string, ag::Var>> buffers_;
  std::vector<std::function<void()>> finalizers_;
};

/// y = x W^T + b with W (out x in) and b (1 x out), PyTorch-style uniform init.
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, bool bias, Rng& rng);
  ag::Var operator()(const ag::Var& x) const;
  int in() const { return static_cast<int>(weight.cols()); }
  int out() const { return static_cast<int>(weight.rows()); }

  ag::Var weight;
  ag::Var bias;  // empty when constructed without bias
};

/// Batch statistics (training) versus running statistics (inference).
enum class BnMode {
  Train,       // batch statistics, running statistics untouched
  TrainTrack,  // batch statistics, running statistics updated
  Eval         // running statistics
};

class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParamStore& store, const std::string& name, int dim, double momentum = 0.1);
  /// Normalizes each column over the rows of x. Training modes need >= 2 rows.
  ag::Var operator()(const ag::Var& x, BnMode mode) const;

  ag::Var gamma, beta;
  ag::Var running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

class Adam {
 public:
  Adam(ParamStore& store, double lr, double grad_clip_norm = 2.0, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  /// Clips the global gradient norm, applies one update, returns the norm
  /// measured before clipping.
  double step();

  long steps() const { return t_; }
  /// Moment estimates, for checkpointing: {name, m, v} per parameter.
  std::vector<std::pair<std::string, Matrix>> state() const;
  void load_state(const std::vector<std::pair<std::string, Matrix>>& named, long steps);

 private:
  ParamStore& store_;
  double lr_, clip_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace qroute::nn
