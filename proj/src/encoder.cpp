#include "qroute/encoder.hpp"

#include <cmath>
#include <string>

namespace qroute {

using ag::Var;

ag::Matrix node_features(const Instance& instance) {
  const int n = instance.node_count();
  ag::Matrix f(n, 3);
  f.leftCols(2) = instance.coords();
  for (int i = 0; i < n; ++i) f(i, 2) = static_cast<double>(instance.demands()[i]) / instance.capacity();
  return f;
}

ag::Matrix edge_features(const Instance& instance) {
  const int n = instance.node_count();
  ag::Matrix f(n * n, 1);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) f(i + j * n, 0) = instance.distance(i, j);
  return f;
}

Encoder::Encoder(nn::ParamStore& store, const Config& config, Rng& rng)
    : d_(config.encoder.d_x), slope_(config.encoder.leaky_slope) {
  const auto& enc = config.encoder;
  node_in = nn::Linear(store, "encoder.node_in", 3, d_, true, rng);
  node_bn = nn::BatchNorm(store, "encoder.node_bn", d_, enc.bn_momentum);
  edge_in = nn::Linear(store, "encoder.edge_in", 1, d_, true, rng);
  edge_bn = nn::BatchNorm(store, "encoder.edge_bn", d_, enc.bn_momentum);
  for (int l = 0; l < enc.layers; ++l) {
    const std::string prefix = "encoder.layer" + std::to_string(l);
    Site s;
    if (enc.attention_is_quantum()) {
      s.score_qnn = std::make_shared<nn::QnnLayer>(store, prefix + ".score_qnn", 3 * d_, 1,
                                                   config.qsim.attention_circuits, config.qsim, rng);
    } else {
      s.score = nn::Linear(store, prefix + ".score", 3 * d_, d_, true, rng);
      ag::Matrix g(1, d_);
      const double bound = 1.0 / std::sqrt(static_cast<double>(d_));
      for (int k = 0; k < d_; ++k) g(0, k) = rng.uniform(-bound, bound);
      s.g = store.add(prefix + ".g", g);
    }
    if (enc.value_is_quantum())
      s.value_qnn = std::make_shared<nn::QnnLayer>(store, prefix + ".value_qnn", d_, d_, config.qsim.value_circuits,
                                                   config.qsim, rng);
    else
      s.value = nn::Linear(store, prefix + ".value", d_, d_, false, rng);
    sites_.push_back(std::move(s));
  }
}

std::pair<Var, Var> Encoder::init_embeddings(const Instance& instance, nn::BnMode mode) const {
  Var x = node_bn(node_in(ag::constant(node_features(instance))), mode);
  Var e = edge_bn(edge_in(ag::constant(edge_features(instance))), mode);
  return {x, e};
}

Var Encoder::attention_scores(const Var& x, const Var& edges, int layer) const {
  const Site& s = sites_.at(layer);
  if (x.cols() != d_ || edges.cols() != d_ || edges.rows() != x.rows() * x.rows())
    throw ShapeError("attention inputs have inconsistent shapes");
  if (!x.value().allFinite() || !edges.value().allFinite()) throw NumericalError("non-finite attention input");
  if (s.score_qnn) {
    // The input projection of [x_i | x_j | e_ij] splits into three blocks.
    const Var& w = s.score_qnn->in_proj.weight;
    Var pre = ag::pair_sum(ag::matmul_nt(x, ag::slice_cols(w, 0, d_)), ag::matmul_nt(x, ag::slice_cols(w, d_, d_))) +
              ag::matmul_nt(edges, ag::slice_cols(w, 2 * d_, d_));
    pre = ag::add_bias(pre, s.score_qnn->in_proj.bias);
    return s.score_qnn->out_proj(s.score_qnn->expectations(pre));
  }
  // g . (W z + b) is linear in z, so fold g into W once.
  Var v = ag::matmul(s.g, s.score.weight);  // 1 x 3d
  Var out = ag::pair_sum(ag::matmul_nt(x, ag::slice_cols(v, 0, d_)), ag::matmul_nt(x, ag::slice_cols(v, d_, d_))) +
            ag::matmul_nt(edges, ag::slice_cols(v, 2 * d_, d_));
  return ag::add_scalar(out, ag::matmul_nt(s.g, s.score.bias));
}

Var Encoder::attention_coefficients(const Var& x, const Var& edges, int layer) const {
  const auto n = x.rows();
  Var s = ag::leaky_relu(attention_scores(x, edges, layer), slope_);
  return ag::softmax_rows(ag::reshape(s, n, n));
}

Var Encoder::layer_forward(const Var& x, const Var& a, int layer) const {
  const Site& s = sites_.at(layer);
  if (a.rows() != x.rows() || a.cols() != x.rows()) throw ShapeError("attention matrix does not match node count");
  Var values = s.value_qnn ? (*s.value_qnn)(x) : s.value(x);
  return ag::matmul(a, values) + x;
}

Embeddings Encoder::operator()(const Instance& instance, nn::BnMode mode) const {
  auto [x, e] = init_embeddings(instance, mode);
  for (int l = 0; l < layers(); ++l) x = layer_forward(x, attention_coefficients(x, e, l), l);
  return {x, e, ag::mean_rows(x)};
}

}  // namespace qroute
