#include "qroute/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "qroute/errors.hpp"
#include "qroute/model.hpp"

namespace qroute {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ParseError("checkpoint is truncated");
  return v;
}

std::string get_string(std::istream& in, std::uint64_t n) {
  if (n > (1ULL << 32)) throw ParseError("checkpoint string length is implausible");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw ParseError("checkpoint is truncated");
  return s;
}

}  // namespace

const ag::Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, m] : arrays)
    if (n == name) return &m;
  return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out.write("QGAT", 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, ckpt.config_hash);
    put<std::uint64_t>(out, ckpt.config_json.size());
    out.write(ckpt.config_json.data(), static_cast<std::streamsize>(ckpt.config_json.size()));
    put<std::uint64_t>(out, ckpt.arrays.size());
    for (const auto& [name, m] : ckpt.arrays) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
      put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
      out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    if (!out) throw Error("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "QGAT", 4) != 0) throw ParseError("not a checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.config_hash = get<std::uint64_t>(in);
  c.config_json = get_string(in, get<std::uint64_t>(in));
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_string(in, get<std::uint32_t>(in));
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows > (1ULL << 28) || cols > (1ULL << 28)) throw ParseError("checkpoint array '" + name + "' is implausible");
    ag::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (m.size() && !in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double))))
      throw ParseError("checkpoint is truncated");
    c.arrays.emplace_back(std::move(name), std::move(m));
  }
  return c;
}

Checkpoint capture(const Model& model, const nn::Adam* adam, const TrainingProgress& progress) {
  Checkpoint c;
  c.config_hash = config_hash(model.config());
  c.config_json = config_to_json(model.config()).dump(2);
  for (const auto& p : model.store().params()) c.arrays.emplace_back(p.name, p.var.value());
  for (const auto& [name, var] : model.store().buffers()) c.arrays.emplace_back(name, var.value());
  if (adam) {
    for (auto& entry : adam->state()) c.arrays.push_back(std::move(entry));
    ag::Matrix meta(1, 2);
    meta << progress.epoch, static_cast<double>(progress.optimizer_steps);
    c.arrays.emplace_back("training.progress", meta);
  }
  return c;
}

void restore(Model& model, const Checkpoint& ckpt) {
  if (ckpt.config_hash != config_hash(model.config()))
    throw ConfigError("checkpoint was written for a different configuration");
  auto load = [&](const std::string& name, ag::Var var) {
    const ag::Matrix* m = ckpt.find(name);
    if (!m) throw ConfigError("checkpoint lacks array '" + name + "'");
    if (m->rows() != var.rows() || m->cols() != var.cols())
      throw ConfigError("checkpoint array '" + name + "' has the wrong shape");
    var.mutable_value() = *m;
  };
  for (const auto& p : model.store().params()) load(p.name, p.var);
  for (const auto& [name, var] : model.store().buffers()) load(name, var);
}

TrainingProgress restore_training(const Checkpoint& ckpt, nn::Adam& adam) {
  const ag::Matrix* meta = ckpt.find("training.progress");
  if (!meta || meta->size() != 2) throw ConfigError("checkpoint carries no training state");
  TrainingProgress p{static_cast<int>((*meta)(0)), static_cast<long>((*meta)(1))};
  std::vector<std::pair<std::string, ag::Matrix>> moments;
  for (const auto& entry : ckpt.arrays)
    if (entry.first.rfind("adam.", 0) == 0) moments.push_back(entry);
  adam.load_state(moments, p.optimizer_steps);
  return p;
}

Config checkpoint_config(const Checkpoint& ckpt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ckpt.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  Config c = config_from_json(j);
  if (config_hash(c) != ckpt.config_hash) throw ParseError("checkpoint config does not match its hash");
  return c;
}

}  // namespace qroute
