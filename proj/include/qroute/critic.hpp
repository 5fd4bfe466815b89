#pragma once

#include <memory>
#include <vector>

#include "qroute/config.hpp"
#include "qroute/encoder.hpp"
#include "qroute/nn.hpp"
#include "qroute/qnn.hpp"

namespace qroute {

/// Instance-level value: per-node transform (QNN or MLP), 1-D convolution
/// along the node axis, ReLU, mean over nodes, affine map to a scalar.
class Critic {
 public:
  Critic(nn::ParamStore& store, const Config& config, Rng& rng);

  ag::Var operator()(const Embeddings& emb) const;  // 1 x 1
  ag::Var node_transform(const ag::Var& nodes) const;
  /// Zero-padded convolution over rows with an odd kernel width.
  ag::Var convolve(const ag::Var& h) const;

  int kernel_width() const { return width_; }

  std::shared_ptr<nn::QnnLayer> qnn;
  std::vector<nn::Linear> mlp;
  nn::Linear conv;  // (width * channels) -> channels
  nn::Linear head;  // channels -> 1

 private:
  int width_;
};

}  // namespace qroute
