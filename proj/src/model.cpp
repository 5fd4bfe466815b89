#include "qroute/model.hpp"

namespace qroute {

Model::Model(const Config& config)
    : config_(config),
      init_rng_(Rng::stream(config.ppo.seed, {0x51})),
      encoder(store_, config_, init_rng_),
      decoder(store_, config_, init_rng_),
      critic(store_, config_, init_rng_) {
  config_.validate();
}

DecodeResult Model::decode(const Instance& instance, const std::string& strategy, Rng* rng, nn::BnMode mode) const {
  ag::NoGradGuard guard;
  const auto ctx = decoder.prepare(encoder(instance, mode));
  if (strategy == "greedy") return decoder.greedy(ctx, instance, config_.temperature());
  if (strategy == "sample") {
    if (!rng) throw ConfigError("sampling needs a random stream");
    return decoder.sample(ctx, instance, *rng, config_.temperature());
  }
  throw ConfigError("unknown decoding strategy '" + strategy + "'");
}

DecodeResult Model::best_of_samples(const Instance& instance, int width, Rng& rng, nn::BnMode mode) const {
  ag::NoGradGuard guard;
  const auto ctx = decoder.prepare(encoder(instance, mode));
  DecodeResult best;
  double best_len = 0;
  for (int i = 0; i < width; ++i) {
    auto r = decoder.sample(ctx, instance, rng, config_.temperature());
    const double len = route_length(instance, r.route);
    if (i == 0 || len < best_len) {
      best = std::move(r);
      best_len = len;
    }
  }
  return best;
}

}  // namespace qroute
