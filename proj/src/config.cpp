#include "qroute/config.hpp"

#include <fstream>
#include <set>

#include "qroute/errors.hpp"

namespace qroute {

using nlohmann::json;

double Config::temperature() const {
  if (decoder.temperature > 0) return decoder.temperature;
  if (instance.m <= 20) return 2.5;
  if (instance.m <= 50) return 1.8;
  return 1.2;
}

namespace {

void check(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw ConfigError(field + " " + rule);
}

template <typename T>
void read(const json& section, const std::string& prefix, const char* key, T& out, std::set<std::string>& seen) {
  seen.insert(key);
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(prefix + "." + key + " has the wrong type: " + e.what());
  }
}

void reject_unknown(const json& section, const std::string& prefix, const std::set<std::string>& seen) {
  for (auto it = section.begin(); it != section.end(); ++it)
    if (!seen.count(it.key())) throw ConfigError("unknown field " + prefix + "." + it.key());
}

const json& section_of(const json& j, const char* name) {
  static const json empty = json::object();
  if (!j.contains(name)) return empty;
  if (!j.at(name).is_object()) throw ConfigError(std::string(name) + " must be an object");
  return j.at(name);
}

}  // namespace

void Config::validate() const {
  check(instance.m >= 1, "instance.m", "must be >= 1");
  check(instance.capacity >= 9, "instance.capacity", "must be >= 9");
  check(encoder.d_x >= 1, "encoder.d_x", "must be >= 1");
  check(encoder.layers >= 0, "encoder.layers", "must be >= 0");
  check(encoder.leaky_slope >= 0, "encoder.leaky_slope", "must be >= 0");
  check(encoder.bn_momentum > 0 && encoder.bn_momentum <= 1, "encoder.bn_momentum", "must be in (0, 1]");
  check(decoder.heads >= 1, "decoder.heads", "must be >= 1");
  check(encoder.d_x % decoder.heads == 0, "decoder.heads", "must divide encoder.d_x");
  check(decoder.clip > 0, "decoder.clip", "must be > 0");
  check(decoder.temperature >= 0, "decoder.temperature", "must be > 0 (or 0 for the size default)");
  check(decoder.strategy == "greedy" || decoder.strategy == "sample", "decoder.strategy", "must be greedy or sample");
  check(decoder.sample_width >= 1, "decoder.sample_width", "must be >= 1");
  check(critic.kernel_width >= 1 && critic.kernel_width % 2 == 1, "critic.kernel_width", "must be odd and >= 1");
  check(critic.channels >= 0, "critic.channels", "must be >= 0");
  check(critic.hidden_layers >= 1, "critic.hidden_layers", "must be >= 1");
  check(ppo.epochs >= 0, "ppo.epochs", "must be >= 0");
  check(ppo.collect_steps >= 1, "ppo.collect_steps", "must be >= 1");
  check(ppo.collect_batch >= 1, "ppo.collect_batch", "must be >= 1");
  check(ppo.update_epochs >= 1, "ppo.update_epochs", "must be >= 1");
  check(ppo.minibatch >= 2, "ppo.minibatch", "must be >= 2");
  check(ppo.clip_eps > 0 && ppo.clip_eps < 1, "ppo.clip_eps", "must be in (0, 1)");
  check(ppo.lambda_p >= 0, "ppo.lambda_p", "must be >= 0");
  check(ppo.lambda_v >= 0, "ppo.lambda_v", "must be >= 0");
  check(ppo.lambda_e >= 0, "ppo.lambda_e", "must be >= 0");
  check(ppo.learning_rate > 0, "ppo.learning_rate", "must be > 0");
  check(ppo.grad_clip >= 0, "ppo.grad_clip", "must be >= 0");
  check(ppo.train_size >= 1 || !ppo.train_file.empty(), "ppo.train_size", "must be >= 1");
  check(ppo.val_size >= 1 || !ppo.val_file.empty(), "ppo.val_size", "must be >= 1");
  check(ppo.checkpoint_every >= 1, "ppo.checkpoint_every", "must be >= 1");
  check(qsim.n_qubits >= 1 && qsim.n_qubits <= 20, "qsim.n_qubits", "must be in [1, 20]");
  check(qsim.n_layers >= 0, "qsim.n_layers", "must be >= 0");
  check(qsim.entangler == "ring" || qsim.entangler == "line" || qsim.entangler == "none", "qsim.entangler",
        "must be ring, line or none");
  check(qsim.embedding == "y" || qsim.embedding == "x", "qsim.embedding", "must be y or x");
  check(qsim.attention_circuits >= 1, "qsim.attention_circuits", "must be >= 1");
  check(qsim.critic_circuits >= 1, "qsim.critic_circuits", "must be >= 1");
  check(qsim.value_circuits >= 1, "qsim.value_circuits", "must be >= 1");
}

Config config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j, "config", {"instance", "encoder", "decoder", "critic", "ppo", "qsim"});
  Config c;
  {
    const auto& s = section_of(j, "instance");
    std::set<std::string> seen;
    read(s, "instance", "m", c.instance.m, seen);
    read(s, "instance", "capacity", c.instance.capacity, seen);
    reject_unknown(s, "instance", seen);
  }
  {
    const auto& s = section_of(j, "encoder");
    std::set<std::string> seen;
    std::string variant = c.encoder.variant == Variant::Quantum ? "quantum" : "classical";
    read(s, "encoder", "d_x", c.encoder.d_x, seen);
    read(s, "encoder", "layers", c.encoder.layers, seen);
    read(s, "encoder", "variant", variant, seen);
    read(s, "encoder", "quantum_attention", c.encoder.quantum_attention, seen);
    read(s, "encoder", "quantum_value", c.encoder.quantum_value, seen);
    read(s, "encoder", "quantum_critic", c.encoder.quantum_critic, seen);
    read(s, "encoder", "leaky_slope", c.encoder.leaky_slope, seen);
    read(s, "encoder", "bn_momentum", c.encoder.bn_momentum, seen);
    reject_unknown(s, "encoder", seen);
    if (variant == "quantum") c.encoder.variant = Variant::Quantum;
    else if (variant == "classical") c.encoder.variant = Variant::Classical;
    else throw ConfigError("encoder.variant must be classical or quantum");
  }
  {
    const auto& s = section_of(j, "decoder");
    std::set<std::string> seen;
    read(s, "decoder", "heads", c.decoder.heads, seen);
    read(s, "decoder", "clip", c.decoder.clip, seen);
    read(s, "decoder", "temperature", c.decoder.temperature, seen);
    read(s, "decoder", "strategy", c.decoder.strategy, seen);
    read(s, "decoder", "sample_width", c.decoder.sample_width, seen);
    read(s, "decoder", "seed", c.decoder.seed, seen);
    reject_unknown(s, "decoder", seen);
  }
  {
    const auto& s = section_of(j, "critic");
    std::set<std::string> seen;
    read(s, "critic", "kernel_width", c.critic.kernel_width, seen);
    read(s, "critic", "channels", c.critic.channels, seen);
    read(s, "critic", "hidden_layers", c.critic.hidden_layers, seen);
    reject_unknown(s, "critic", seen);
  }
  {
    const auto& s = section_of(j, "ppo");
    std::set<std::string> seen;
    auto& p = c.ppo;
    read(s, "ppo", "epochs", p.epochs, seen);
    read(s, "ppo", "collect_steps", p.collect_steps, seen);
    read(s, "ppo", "collect_batch", p.collect_batch, seen);
    read(s, "ppo", "update_epochs", p.update_epochs, seen);
    read(s, "ppo", "minibatch", p.minibatch, seen);
    read(s, "ppo", "clip_eps", p.clip_eps, seen);
    read(s, "ppo", "lambda_p", p.lambda_p, seen);
    read(s, "ppo", "lambda_v", p.lambda_v, seen);
    read(s, "ppo", "lambda_e", p.lambda_e, seen);
    read(s, "ppo", "learning_rate", p.learning_rate, seen);
    read(s, "ppo", "grad_clip", p.grad_clip, seen);
    read(s, "ppo", "seed", p.seed, seen);
    read(s, "ppo", "train_size", p.train_size, seen);
    read(s, "ppo", "val_size", p.val_size, seen);
    read(s, "ppo", "train_file", p.train_file, seen);
    read(s, "ppo", "val_file", p.val_file, seen);
    read(s, "ppo", "checkpoint_every", p.checkpoint_every, seen);
    reject_unknown(s, "ppo", seen);
  }
  {
    const auto& s = section_of(j, "qsim");
    std::set<std::string> seen;
    read(s, "qsim", "n_qubits", c.qsim.n_qubits, seen);
    read(s, "qsim", "n_layers", c.qsim.n_layers, seen);
    read(s, "qsim", "entangler", c.qsim.entangler, seen);
    read(s, "qsim", "embedding", c.qsim.embedding, seen);
    read(s, "qsim", "attention_circuits", c.qsim.attention_circuits, seen);
    read(s, "qsim", "critic_circuits", c.qsim.critic_circuits, seen);
    read(s, "qsim", "value_circuits", c.qsim.value_circuits, seen);
    reject_unknown(s, "qsim", seen);
  }
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

json config_to_json(const Config& c) {
  json j;
  j["instance"] = {{"m", c.instance.m}, {"capacity", c.instance.capacity}};
  j["encoder"] = {{"d_x", c.encoder.d_x},
                  {"layers", c.encoder.layers},
                  {"variant", c.encoder.variant == Variant::Quantum ? "quantum" : "classical"},
                  {"quantum_attention", c.encoder.quantum_attention},
                  {"quantum_value", c.encoder.quantum_value},
                  {"quantum_critic", c.encoder.quantum_critic},
                  {"leaky_slope", c.encoder.leaky_slope},
                  {"bn_momentum", c.encoder.bn_momentum}};
  j["decoder"] = {{"heads", c.decoder.heads},
                  {"clip", c.decoder.clip},
                  {"temperature", c.temperature()},
                  {"strategy", c.decoder.strategy},
                  {"sample_width", c.decoder.sample_width},
                  {"seed", c.decoder.seed}};
  j["critic"] = {{"kernel_width", c.critic.kernel_width},
                 {"channels", c.critic_channels()},
                 {"hidden_layers", c.critic.hidden_layers}};
  const auto& p = c.ppo;
  j["ppo"] = {{"epochs", p.epochs},
              {"collect_steps", p.collect_steps},
              {"collect_batch", p.collect_batch},
              {"update_epochs", p.update_epochs},
              {"minibatch", p.minibatch},
              {"clip_eps", p.clip_eps},
              {"lambda_p", p.lambda_p},
              {"lambda_v", p.lambda_v},
              {"lambda_e", p.lambda_e},
              {"learning_rate", p.learning_rate},
              {"grad_clip", p.grad_clip},
              {"seed", p.seed},
              {"train_size", p.train_size},
              {"val_size", p.val_size},
              {"train_file", p.train_file},
              {"val_file", p.val_file},
              {"checkpoint_every", p.checkpoint_every}};
  j["qsim"] = {{"n_qubits", c.qsim.n_qubits},
               {"n_layers", c.qsim.n_layers},
               {"entangler", c.qsim.entangler},
               {"embedding", c.qsim.embedding},
               {"attention_circuits", c.qsim.attention_circuits},
               {"critic_circuits", c.qsim.critic_circuits},
               {"value_circuits", c.qsim.value_circuits}};
  return j;
}

std::uint64_t config_hash(const Config& config) {
  const std::string text = config_to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Config classical_reference(Config config) {
  config.encoder.variant = Variant::Classical;
  return config;
}

}  // namespace qroute
