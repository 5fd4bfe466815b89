#pragma once

#include <vector>

#include "qroute/config.hpp"
#include "qroute/encoder.hpp"
#include "qroute/env.hpp"
#include "qroute/nn.hpp"

namespace qroute {

inline constexpr double kDefaultClip = 10.0;

/// First-stage scores q k_i^T / sqrt(d_v) per row of q, -inf where masked.
/// Throws NoFeasibleActionError when a row has no allowed entry.
ag::Matrix first_scores(const ag::Matrix& q, const ag::Matrix& k, const ag::Mask& mask);

/// W_f applied to the concatenation over heads of weights_h * values_h, where
/// head h owns columns [h d_v, (h+1) d_v) of `values`.
ag::Var context_vector(const std::vector<ag::Var>& head_weights, const ag::Var& values, const nn::Linear& wf);

/// Per-row log-probabilities of softmax(clip * tanh(c K^T / sqrt(d_v)) / temperature)
/// over allowed entries; masked entries are -inf.
ag::Var pointer_log_probs(const ag::Var& context, const ag::Var& keys, const ag::Mask& mask, int d_v, double clip,
                          double temperature);

struct DecodeResult {
  Route route;
  std::vector<int> actions;  // route.sequence without the leading depot
  double log_prob = 0;       // sum of the chosen steps' log-probabilities
  std::vector<Eigen::VectorXd> step_probs;  // filled when requested
};

/// Decoder inputs and every step's dynamic state for a fixed action list.
struct Trajectory {
  std::vector<int> current;  // node before each step
  std::vector<double> load;  // remaining load / C before each step
  ag::Mask mask;             // steps x nodes
};
Trajectory trace(const Instance& instance, const std::vector<int>& actions);

class Decoder {
 public:
  Decoder(nn::ParamStore& store, const Config& config, Rng& rng);

  struct Context {
    ag::Var graph, nodes, keys, values;
  };
  Context prepare(const Embeddings& emb) const;

  /// Log-probabilities (rows x nodes) for a batch of decoding states.
  ag::Var log_probs(const Context& ctx, const std::vector<int>& current, const std::vector<double>& load,
                    const ag::Mask& mask, double temperature) const;

  DecodeResult greedy(const Context& ctx, const Instance& instance, double temperature,
                      bool keep_probs = false) const;
  DecodeResult sample(const Context& ctx, const Instance& instance, Rng& rng, double temperature,
                      bool keep_probs = false) const;

  struct Evaluation {
    ag::Var log_prob;  // 1 x 1, sum over steps
    ag::Var entropy;   // 1 x 1, sum of per-step entropies
    int steps = 0;
  };
  /// Teacher-forced evaluation of a full action list in one batch.
  Evaluation evaluate(const Context& ctx, const Instance& instance, const std::vector<int>& actions,
                      double temperature) const;

  int heads() const { return heads_; }
  int head_dim() const { return d_ / heads_; }
  double clip() const { return clip_; }

  nn::Linear query, key, value, out;

 private:
  DecodeResult run(const Context& ctx, const Instance& instance, Rng* rng, double temperature, bool keep) const;

  int d_, heads_;
  double clip_;
};

}  // namespace qroute
