#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qroute/config.hpp"
#include "qroute/nn.hpp"

namespace qroute {

class Model;

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout, all integers little-endian:
///   "QGAT" | u32 version | u64 config hash | u64 n + n bytes of resolved config JSON
///   | u64 array count | per array: u32 name length, name, u64 rows, u64 cols, rows*cols f64 (column-major)
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::string config_json;
  std::vector<std::pair<std::string, ag::Matrix>> arrays;

  const ag::Matrix* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws ParseError on a bad magic, unknown version or truncated file.
Checkpoint read_checkpoint(const std::filesystem::path& path);

struct TrainingProgress {
  int epoch = 0;  // last completed epoch
  long optimizer_steps = 0;
};

/// Parameters and buffers of the model, plus optimizer moments and progress when given.
Checkpoint capture(const Model& model, const nn::Adam* adam = nullptr, const TrainingProgress& progress = {});
/// Loads parameters and buffers into a model built from the same config.
/// Throws ConfigError on a config hash mismatch or a missing/misshapen array.
void restore(Model& model, const Checkpoint& ckpt);
TrainingProgress restore_training(const Checkpoint& ckpt, nn::Adam& adam);

/// Model built from the config stored in the checkpoint, with its weights.
Config checkpoint_config(const Checkpoint& ckpt);

}  // namespace qroute
