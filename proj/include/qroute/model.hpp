#pragma once

#include <string>

#include "qroute/config.hpp"
#include "qroute/critic.hpp"
#include "qroute/decoder.hpp"
#include "qroute/encoder.hpp"
#include "qroute/nn.hpp"

namespace qroute {

/// Shared encoder with the pointer decoder (actor) and the value head (critic).
/// Initial weights depend only on ppo.seed.
class Model {
 public:
  explicit Model(const Config& config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const Config& config() const { return config_; }
  nn::ParamStore& store() { return store_; }
  const nn::ParamStore& store() const { return store_; }
  nn::ParameterCount count() const { return store_.count(); }

  /// strategy "greedy" or "sample" (rng required for sampling).
  DecodeResult decode(const Instance& instance, const std::string& strategy, Rng* rng,
                      nn::BnMode mode = nn::BnMode::Eval) const;
  /// Shortest of `width` sampled routes.
  DecodeResult best_of_samples(const Instance& instance, int width, Rng& rng,
                               nn::BnMode mode = nn::BnMode::Eval) const;

 private:
  Config config_;
  nn::ParamStore store_;
  Rng init_rng_;

 public:
  Encoder encoder;
  Decoder decoder;
  Critic critic;
};

}  // namespace qroute
