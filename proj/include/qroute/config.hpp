#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace qroute {

struct InstanceConfig {
  int m = 20;
  int capacity = 30;
};

struct QsimConfig {
  int n_qubits = 6;
  int n_layers = 5;
  std::string entangler = "ring";
  std::string embedding = "y";  // "y" or "x", applied to every qubit
  int attention_circuits = 4;   // circuits per attention-score QNN (one per encoder layer)
  int critic_circuits = 3;
  int value_circuits = 1;       // only used when encoder.quantum_value is set
};

enum class Variant { Classical, Quantum };

struct EncoderConfig {
  int d_x = 128;
  int layers = 3;
  Variant variant = Variant::Quantum;
  // Per-site switches, honoured only by the quantum variant.
  bool quantum_attention = true;
  bool quantum_value = false;
  bool quantum_critic = true;
  double leaky_slope = 0.2;
  double bn_momentum = 0.1;

  bool attention_is_quantum() const { return variant == Variant::Quantum && quantum_attention; }
  bool value_is_quantum() const { return variant == Variant::Quantum && quantum_value; }
  bool critic_is_quantum() const { return variant == Variant::Quantum && quantum_critic; }
};

struct DecoderConfig {
  int heads = 8;
  double clip = 10.0;
  double temperature = 0.0;  // 0 = choose from the instance size (2.5 / 1.8 / 1.2)
  std::string strategy = "greedy";
  int sample_width = 128;
  std::uint64_t seed = 1234;
};

struct CriticConfig {
  int kernel_width = 1;
  int channels = 0;  // 0 = d_x
  int hidden_layers = 3;
};

struct PpoConfig {
  int epochs = 100;
  int collect_steps = 1;
  int collect_batch = 256;
  int update_epochs = 3;
  int minibatch = 256;
  double clip_eps = 0.2;
  double lambda_p = 1.0;
  double lambda_v = 0.5;
  double lambda_e = 0.01;
  double learning_rate = 1e-4;
  double grad_clip = 2.0;
  std::uint64_t seed = 1;
  int train_size = 10000;
  int val_size = 10000;
  std::string train_file;
  std::string val_file;
  int checkpoint_every = 1;
};

struct Config {
  InstanceConfig instance;
  EncoderConfig encoder;
  DecoderConfig decoder;
  CriticConfig critic;
  PpoConfig ppo;
  QsimConfig qsim;

  /// Temperature after resolving the size-dependent default.
  double temperature() const;
  int critic_channels() const { return critic.channels > 0 ? critic.channels : encoder.d_x; }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Missing fields take defaults; unknown fields and type errors are rejected
/// with a field-level ConfigError.
Config config_from_json(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);
/// Every field, defaults filled in.
nlohmann::json config_to_json(const Config& config);
/// FNV-1a of the canonical resolved JSON.
std::uint64_t config_hash(const Config& config);

/// The paper-scale default configuration with the classical encoder.
Config classical_reference(Config config);

}  // namespace qroute
