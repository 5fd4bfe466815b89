#pragma once

#include <memory>
#include <vector>

#include "qroute/config.hpp"
#include "qroute/nn.hpp"
#include "qroute/qnn.hpp"
#include "qroute/vrp.hpp"

namespace qroute {

struct Embeddings {
  ag::Var nodes;  // (m+1) x d_x
  ag::Var edges;  // (m+1)^2 x d_x, row i + j * (m+1) holds edge (i, j)
  ag::Var graph;  // 1 x d_x, mean over all m+1 node rows
};

/// Raw node features (x, y, d/C) with (x, y, 0) for the depot: (m+1) x 3.
ag::Matrix node_features(const Instance& instance);
/// Euclidean distance of every ordered pair, self pairs included: (m+1)^2 x 1.
ag::Matrix edge_features(const Instance& instance);

class Encoder {
 public:
  Encoder(nn::ParamStore& store, const Config& config, Rng& rng);

  Embeddings operator()(const Instance& instance, nn::BnMode mode) const;

  /// Affine input maps followed by batch normalization over the rows of one graph.
  std::pair<ag::Var, ag::Var> init_embeddings(const Instance& instance, nn::BnMode mode) const;
  /// Row-stochastic (m+1) x (m+1) attention of layer `layer` (0-based).
  ag::Var attention_coefficients(const ag::Var& x, const ag::Var& edges, int layer) const;
  /// x + a (x W_1^T), the residual update.
  ag::Var layer_forward(const ag::Var& x, const ag::Var& a, int layer) const;
  /// Raw scores before LeakyReLU and softmax, (m+1)^2 x 1 in edge order.
  ag::Var attention_scores(const ag::Var& x, const ag::Var& edges, int layer) const;

  int layers() const { return static_cast<int>(sites_.size()); }

  struct Site {
    // Classical score transform: score = g . (W [x_i | x_j | e_ij] + b).
    nn::Linear score;
    ag::Var g;  // 1 x d_x
    // Quantum score transform; its output projection plays the role of g.
    std::shared_ptr<nn::QnnLayer> score_qnn;
    nn::Linear value;
    std::shared_ptr<nn::QnnLayer> value_qnn;
  };
  const Site& site(int layer) const { return sites_.at(layer); }

  nn::Linear node_in, edge_in;
  nn::BatchNorm node_bn, edge_bn;

 private:
  int d_;
  double slope_;
  std::vector<Site> sites_;
};

}  // namespace qroute
