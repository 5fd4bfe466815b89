#include "qroute/critic.hpp"

#include <string>

namespace qroute {

using ag::Var;

Critic::Critic(nn::ParamStore& store, const Config& config, Rng& rng) : width_(config.critic.kernel_width) {
  const int d = config.encoder.d_x;
  const int c = config.critic_channels();
  if (config.encoder.critic_is_quantum()) {
    qnn = std::make_shared<nn::QnnLayer>(store, "critic.qnn", d, c, config.qsim.critic_circuits, config.qsim, rng);
  } else {
    int in = d;
    for (int l = 0; l < config.critic.hidden_layers; ++l) {
      mlp.emplace_back(store, "critic.mlp" + std::to_string(l), in, c, true, rng);
      in = c;
    }
    if (mlp.empty()) throw ConfigError("critic.hidden_layers must be >= 1 for a classical critic");
  }
  conv = nn::Linear(store, "critic.conv", width_ * c, c, true, rng);
  head = nn::Linear(store, "critic.head", c, 1, true, rng);
}

Var Critic::node_transform(const Var& nodes) const {
  if (qnn) return (*qnn)(nodes);
  Var h = nodes;
  for (std::size_t l = 0; l < mlp.size(); ++l) {
    h = mlp[l](h);
    if (l + 1 < mlp.size()) h = ag::relu(h);
  }
  return h;
}

Var Critic::convolve(const Var& h) const {
  if (h.cols() * width_ != conv.in()) throw ShapeError("critic convolution channel mismatch");
  if (width_ == 1) return conv(h);
  std::vector<Var> taps;
  const int half = width_ / 2;
  for (int t = -half; t <= half; ++t) taps.push_back(t == 0 ? h : ag::shift_rows(h, t));
  return conv(ag::concat_cols(taps));
}

Var Critic::operator()(const Embeddings& emb) const {
  return head(ag::mean_rows(ag::relu(convolve(node_transform(emb.nodes)))));
}

}  // namespace qroute
