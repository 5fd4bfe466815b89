#include "qroute/decoder.hpp"

#include <cmath>
#include <limits>

namespace qroute {

using ag::Var;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

ag::Mask to_mask_row(const std::vector<bool>& allowed) {
  ag::Mask m(1, static_cast<Eigen::Index>(allowed.size()));
  for (std::size_t i = 0; i < allowed.size(); ++i) m(0, i) = allowed[i];
  return m;
}

}  // namespace

ag::Matrix first_scores(const ag::Matrix& q, const ag::Matrix& k, const ag::Mask& mask) {
  if (q.cols() != k.cols() || mask.rows() != q.rows() || mask.cols() != k.rows())
    throw ShapeError("first_scores: shape mismatch");
  ag::Matrix u = q * k.transpose() / std::sqrt(static_cast<double>(q.cols()));
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    if (!mask.row(r).any()) throw NoFeasibleActionError("every action is masked");
    for (Eigen::Index c = 0; c < u.cols(); ++c)
      if (!mask(r, c)) u(r, c) = kNegInf;
  }
  return u;
}

Var context_vector(const std::vector<Var>& head_weights, const Var& values, const nn::Linear& wf) {
  const auto heads = static_cast<Eigen::Index>(head_weights.size());
  if (heads == 0 || values.cols() % heads != 0) throw ShapeError("values do not split evenly over heads");
  const Eigen::Index dv = values.cols() / heads;
  std::vector<Var> parts;
  for (Eigen::Index h = 0; h < heads; ++h) {
    if (head_weights[h].cols() != values.rows()) throw ShapeError("attention weights do not match value rows");
    parts.push_back(ag::matmul(head_weights[h], ag::slice_cols(values, h * dv, dv)));
  }
  return wf(ag::concat_cols(parts));
}

Var pointer_log_probs(const Var& context, const Var& keys, const ag::Mask& mask, int d_v, double clip,
                      double temperature) {
  if (!(temperature > 0)) throw ConfigError("temperature must be positive");
  if (!(clip > 0)) throw ConfigError("clip must be positive");
  Var u = ag::tanh(ag::matmul_nt(context, keys) * (1.0 / std::sqrt(static_cast<double>(d_v))));
  return ag::masked_log_softmax_rows(u * (clip / temperature), mask);
}

Trajectory trace(const Instance& instance, const std::vector<int>& actions) {
  Trajectory t;
  t.mask.resize(static_cast<Eigen::Index>(actions.size()), instance.node_count());
  EnvState s = reset(instance);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    t.current.push_back(s.current_node);
    t.load.push_back(static_cast<double>(s.remaining_load) / instance.capacity());
    const auto allowed = feasible_mask(s);
    for (int j = 0; j < static_cast<int>(instance.node_count()); ++j) t.mask(i, j) = allowed[j];
    s = step(s, actions[i]).state;
  }
  return t;
}

Decoder::Decoder(nn::ParamStore& store, const Config& config, Rng& rng)
    : d_(config.encoder.d_x), heads_(config.decoder.heads), clip_(config.decoder.clip) {
  if (d_ % heads_ != 0) throw ConfigError("decoder.heads must divide encoder.d_x");
  query = nn::Linear(store, "decoder.query", 2 * d_ + 1, d_, true, rng);
  key = nn::Linear(store, "decoder.key", d_, d_, false, rng);
  value = nn::Linear(store, "decoder.value", d_, d_, false, rng);
  out = nn::Linear(store, "decoder.out", d_, d_, true, rng);
}

Decoder::Context Decoder::prepare(const Embeddings& emb) const {
  return {emb.graph, emb.nodes, key(emb.nodes), value(emb.nodes)};
}

Var Decoder::log_probs(const Context& ctx, const std::vector<int>& current, const std::vector<double>& load,
                       const ag::Mask& mask, double temperature) const {
  const auto rows = static_cast<Eigen::Index>(current.size());
  if (static_cast<Eigen::Index>(load.size()) != rows || mask.rows() != rows || mask.cols() != ctx.nodes.rows())
    throw ShapeError("decoder state batch has inconsistent shapes");
  ag::Matrix load_col(rows, 1);
  for (Eigen::Index r = 0; r < rows; ++r) load_col(r, 0) = load[r];
  Var q = query(ag::concat_cols(
      {ag::repeat_rows(ctx.graph, rows), ag::gather_rows(ctx.nodes, current), ag::constant(load_col)}));

  const int dv = head_dim();
  std::vector<Var> weights;
  for (int h = 0; h < heads_; ++h) {
    Var u = ag::matmul_nt(ag::slice_cols(q, h * dv, dv), ag::slice_cols(ctx.keys, h * dv, dv)) *
            (1.0 / std::sqrt(static_cast<double>(dv)));
    weights.push_back(ag::masked_softmax_rows(u, mask));
  }
  Var c = context_vector(weights, ctx.values, out);
  return pointer_log_probs(c, ctx.keys, mask, dv, clip_, temperature);
}

DecodeResult Decoder::run(const Context& ctx, const Instance& instance, Rng* rng, double temperature,
                          bool keep) const {
  ag::NoGradGuard guard;
  DecodeResult result;
  EnvState s = reset(instance);
  bool done = false;
  while (!done) {
    const auto allowed = feasible_mask(s);
    const ag::Matrix lp = log_probs(ctx, {s.current_node}, {double(s.remaining_load) / instance.capacity()},
                                    to_mask_row(allowed), temperature)
                              .value();
    int action = -1;
    if (rng) {
      const double u = rng->uniform();
      double cum = 0;
      for (int j = 0; j < lp.cols(); ++j) {
        if (!allowed[j]) continue;
        action = j;  // the last allowed node absorbs rounding at the top end
        cum += std::exp(lp(0, j));
        if (u < cum) break;
      }
    } else {
      for (int j = 0; j < lp.cols(); ++j)
        if (allowed[j] && (action < 0 || lp(0, j) > lp(0, action))) action = j;
    }
    result.log_prob += lp(0, action);
    if (keep) result.step_probs.push_back(lp.row(0).array().exp().matrix().transpose());
    result.actions.push_back(action);
    auto next = step(s, action);
    s = std::move(next.state);
    done = next.terminal;
  }
  result.route = Route(s.partial);
  return result;
}

DecodeResult Decoder::greedy(const Context& ctx, const Instance& instance, double temperature, bool keep) const {
  return run(ctx, instance, nullptr, temperature, keep);
}

DecodeResult Decoder::sample(const Context& ctx, const Instance& instance, Rng& rng, double temperature,
                             bool keep) const {
  return run(ctx, instance, &rng, temperature, keep);
}

Decoder::Evaluation Decoder::evaluate(const Context& ctx, const Instance& instance, const std::vector<int>& actions,
                                      double temperature) const {
  const Trajectory t = trace(instance, actions);
  Var lp = log_probs(ctx, t.current, t.load, t.mask, temperature);
  Evaluation e;
  e.log_prob = ag::sum(ag::pick(lp, actions));
  e.entropy = ag::sum(ag::masked_entropy_rows(lp, t.mask));
  e.steps = static_cast<int>(actions.size());
  return e;
}

}  // namespace qroute
