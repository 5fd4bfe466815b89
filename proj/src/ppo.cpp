#include "qroute/ppo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "qroute/checkpoint.hpp"
#include "qroute/errors.hpp"

namespace qroute {

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(threads, count); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void normalize_rewards(RolloutBuffer& buffer) {
  auto& recs = buffer.records;
  if (recs.empty()) throw DomainError("cannot normalize an empty rollout buffer");
  double mean = 0;
  for (const auto& r : recs) mean += r.reward;
  mean /= static_cast<double>(recs.size());
  double var = 0;
  for (const auto& r : recs) var += (r.reward - mean) * (r.reward - mean);
  const double sd = std::sqrt(var / static_cast<double>(recs.size()));
  for (auto& r : recs) r.normalized_reward = sd < 1e-8 ? r.reward - mean : (r.reward - mean) / sd;
}

void compute_advantages(RolloutBuffer& buffer) {
  for (auto& r : buffer.records) r.advantage = r.normalized_reward - r.value;
}

double ratio(double new_log_prob, double old_log_prob, long* overflows) {
  const double r = std::exp(new_log_prob - old_log_prob);
  if (!(r <= kRatioCap)) {
    if (overflows) ++*overflows;
    return kRatioCap;
  }
  return r;
}

double clipped_objective(double r, double advantage, double eps) {
  return std::min(r * advantage, std::clamp(r, 1 - eps, 1 + eps) * advantage);
}

double clipped_objective_slope(double r, double advantage, double eps) {
  const double clipped = std::clamp(r, 1 - eps, 1 + eps);
  // The unclipped branch carries the gradient whenever it is the minimum.
  return r * advantage <= clipped * advantage ? advantage : 0.0;
}

double clip_loss(const std::vector<double>& ratios, const std::vector<double>& advantages, double eps) {
  if (ratios.size() != advantages.size() || ratios.empty()) throw ShapeError("clip_loss needs matching, non-empty inputs");
  double s = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) s += clipped_objective(ratios[i], advantages[i], eps);
  return s / static_cast<double>(ratios.size());
}

double entropy_loss(const std::vector<Eigen::VectorXd>& distributions) {
  if (distributions.empty()) return 0;
  double s = 0;
  for (const auto& p : distributions)
    for (Eigen::Index i = 0; i < p.size(); ++i)
      if (p(i) > 0) s -= p(i) * std::log(p(i));
  return s / static_cast<double>(distributions.size());
}

double value_loss(const std::vector<double>& targets, const std::vector<double>& values) {
  if (targets.size() != values.size() || targets.empty()) throw ShapeError("value_loss needs matching, non-empty inputs");
  double s = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) s += (values[i] - targets[i]) * (values[i] - targets[i]);
  return s / static_cast<double>(targets.size());
}

double total_loss(const LossParts& parts, const PpoConfig& ppo) {
  return -ppo.lambda_p * parts.clip + ppo.lambda_v * parts.value - ppo.lambda_e * parts.entropy;
}

RolloutBuffer collect(const Model& model, const std::vector<Instance>& pool, const std::vector<int>& indices,
                      const CollectOptions& options) {
  RolloutBuffer buffer;
  buffer.instances = &pool;
  buffer.records.resize(indices.size());
  const double temperature = model.config().temperature();
  parallel_for(static_cast<int>(indices.size()), options.threads, [&](int k) {
    ag::NoGradGuard guard;
    const Instance& inst = pool.at(indices[k]);
    const Embeddings emb = model.encoder(inst, nn::BnMode::Train);
    const auto ctx = model.decoder.prepare(emb);
    Rng rng = Rng::stream(options.seed, {options.epoch, options.step, static_cast<std::uint64_t>(k)});
    const DecodeResult res = model.decoder.sample(ctx, inst, rng, temperature);
    if (!validate_solution(inst, res.route).feasible) throw InternalError("sampled an infeasible route");
    EpisodeRecord& rec = buffer.records[k];
    rec.instance = indices[k];
    rec.actions = res.actions;
    rec.old_log_prob = model.decoder.evaluate(ctx, inst, res.actions, temperature).log_prob.scalar();
    rec.reward = episode_reward(inst, res.route);
    rec.value = model.critic(emb).scalar();
  });
  return buffer;
}

MinibatchResult minibatch_loss(Model& model, const RolloutBuffer& buffer, const std::vector<int>& indices,
                               nn::BnMode mode, bool backward) {
  if (indices.empty()) throw DomainError("empty minibatch");
  const auto& ppo = model.config().ppo;
  const double temperature = model.config().temperature();
  const double b = static_cast<double>(indices.size());
  long total_steps = 0;
  for (int i : indices) total_steps += static_cast<long>(buffer.records.at(i).actions.size());

  std::optional<ag::NoGradGuard> guard;
  if (!backward) guard.emplace();

  MinibatchResult out;
  double clip_sum = 0, value_sum = 0, entropy_sum = 0;
  for (int i : indices) {
    const EpisodeRecord& rec = buffer.records[i];
    const Instance& inst = buffer.instance_of(rec);
    const Embeddings emb = model.encoder(inst, mode);
    const auto ev = model.decoder.evaluate(model.decoder.prepare(emb), inst, rec.actions, temperature);
    const ag::Var v = model.critic(emb);

    const long before = out.ratio_overflows;
    const double r = ratio(ev.log_prob.scalar(), rec.old_log_prob, &out.ratio_overflows);
    const bool capped = out.ratio_overflows != before;
    clip_sum += clipped_objective(r, rec.advantage, ppo.clip_eps);
    const double err = v.scalar() - rec.normalized_reward;
    value_sum += err * err;
    entropy_sum += ev.entropy.scalar();

    if (backward) {
      // The total is linear in these three per-record quantities' local
      // derivatives, so one backward pass per record suffices.
      const double d_logp = capped ? 0.0 : -ppo.lambda_p / b * clipped_objective_slope(r, rec.advantage, ppo.clip_eps) * r;
      const double d_value = ppo.lambda_v / b * 2.0 * err;
      const double d_entropy = -ppo.lambda_e / static_cast<double>(total_steps);
      ag::backward(ev.log_prob * d_logp + v * d_value + ev.entropy * d_entropy);
    }
  }
  if (backward) model.store().finalize_gradients();
  out.parts = {clip_sum / b, value_sum / b, entropy_sum / static_cast<double>(total_steps)};
  out.total = total_loss(out.parts, ppo);
  return out;
}

std::string metrics_header() { return "epoch,train_loss,val_loss,val_mean_length,wall_time_s"; }

std::string metrics_row(const EpochMetrics& m) {
  std::ostringstream s;
  s << m.epoch << std::setprecision(12) << ',' << m.train_loss << ',' << m.val_loss << ',' << m.val_mean_length << ','
    << std::setprecision(6) << m.wall_time_s;
  return s.str();
}

double greedy_mean_length(const Model& model, const std::vector<Instance>& instances, int threads) {
  if (instances.empty()) throw DomainError("no instances to evaluate");
  std::vector<double> lengths(instances.size());
  parallel_for(static_cast<int>(instances.size()), threads, [&](int i) {
    lengths[i] = route_length(instances[i], model.decode(instances[i], "greedy", nullptr, nn::BnMode::Eval).route);
  });
  return std::accumulate(lengths.begin(), lengths.end(), 0.0) / static_cast<double>(lengths.size());
}

double validation_loss(Model& model, const std::vector<Instance>& instances, const CollectOptions& options) {
  std::vector<int> all(instances.size());
  std::iota(all.begin(), all.end(), 0);
  RolloutBuffer buffer = collect(model, instances, all, options);
  normalize_rewards(buffer);
  compute_advantages(buffer);
  // Evaluation only: the loss is recomputed with the same policy, so every
  // ratio is exactly 1 and nothing is written back.
  return minibatch_loss(model, buffer, all, nn::BnMode::Train, false).total;
}

namespace {

constexpr std::uint64_t kValidationStep = 1'000'000;

void dump_minibatch(const std::filesystem::path& path, const RolloutBuffer& buffer, const std::vector<int>& indices,
                    int epoch, int update_epoch) {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["update_epoch"] = update_epoch;
  for (int i : indices) {
    const auto& r = buffer.records[i];
    j["records"].push_back({{"instance", instance_to_json_line(buffer.instance_of(r))},
                            {"actions", r.actions},
                            {"old_log_prob", r.old_log_prob},
                            {"reward", r.reward},
                            {"normalized_reward", r.normalized_reward},
                            {"value", r.value},
                            {"advantage", r.advantage}});
  }
  std::ofstream(path) << j.dump(2) << '\n';
}

nlohmann::json architecture_of(const Config& c) {
  auto j = config_to_json(c);
  j.erase("ppo");
  j["ppo_seed"] = c.ppo.seed;
  return j;
}

}  // namespace

std::vector<EpochMetrics> train(const Config& config, const std::vector<Instance>& train_set,
                                const std::vector<Instance>& val_set, const TrainOptions& options) {
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (val_set.empty()) throw ConfigError("validation set is empty");
  const auto& ppo = config.ppo;
  std::filesystem::create_directories(options.out_dir);
  std::ofstream(options.out_dir / "config.resolved.json") << config_to_json(config).dump(2) << '\n';

  Model model(config);
  nn::Adam adam(model.store(), ppo.learning_rate, ppo.grad_clip);
  int start = 0;
  if (!options.resume.empty()) {
    const Checkpoint ckpt = read_checkpoint(options.resume);
    if (architecture_of(checkpoint_config(ckpt)) != architecture_of(config))
      throw ConfigError("checkpoint was written for a different model configuration");
    Checkpoint relabelled = ckpt;
    relabelled.config_hash = config_hash(config);
    restore(model, relabelled);
    start = restore_training(ckpt, adam).epoch;
  }

  const auto metrics_path = options.out_dir / "metrics.csv";
  const bool append = start > 0 && std::filesystem::exists(metrics_path);
  std::ofstream csv(metrics_path, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw Error("cannot write " + metrics_path.string());
  if (!append) csv << metrics_header() << '\n';

  const auto t0 = std::chrono::steady_clock::now();
  const int n = static_cast<int>(train_set.size());
  std::vector<EpochMetrics> history;
  for (int epoch = start + 1; epoch <= start + ppo.epochs; ++epoch) {
    const auto e = static_cast<std::uint64_t>(epoch);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng::stream(ppo.seed, {e, 1}).shuffle(perm.begin(), perm.end());

    RolloutBuffer buffer;
    buffer.instances = &train_set;
    for (int t = 0; t < ppo.collect_steps; ++t) {
      std::vector<int> idx(ppo.collect_batch);
      for (int k = 0; k < ppo.collect_batch; ++k)
        idx[k] = perm[(static_cast<long>(t) * ppo.collect_batch + k) % n];
      auto part = collect(model, train_set, idx, {ppo.seed, e, static_cast<std::uint64_t>(t), options.threads});
      for (auto& r : part.records) buffer.records.push_back(std::move(r));
    }
    normalize_rewards(buffer);
    compute_advantages(buffer);

    std::vector<int> order(buffer.records.size());
    std::iota(order.begin(), order.end(), 0);
    double loss_sum = 0;
    int updates = 0;
    for (int k = 0; k < ppo.update_epochs; ++k) {
      Rng::stream(ppo.seed, {e, 2, static_cast<std::uint64_t>(k)}).shuffle(order.begin(), order.end());
      for (std::size_t s = 0; s < order.size(); s += ppo.minibatch) {
        const std::vector<int> mb(order.begin() + s, order.begin() + std::min(order.size(), s + ppo.minibatch));
        model.store().zero_grad();
        const auto res = minibatch_loss(model, buffer, mb, nn::BnMode::TrainTrack, true);
        if (!std::isfinite(res.total)) {
          const auto dump = options.out_dir / "nonfinite_minibatch.json";
          dump_minibatch(dump, buffer, mb, epoch, k);
          throw NumericalError("non-finite loss in epoch " + std::to_string(epoch) + "; minibatch written to " +
                               dump.string());
        }
        if (res.ratio_overflows && options.log)
          *options.log << "warning: " << res.ratio_overflows << " probability ratios clamped at 1e6\n";
        adam.step();
        loss_sum += res.total;
        ++updates;
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / updates;
    m.val_loss = validation_loss(model, val_set, {ppo.seed, e, kValidationStep, options.threads});
    m.val_mean_length = greedy_mean_length(model, val_set, options.threads);
    m.wall_time_s = options.reproducible
                        ? 0.0
                        : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(m.val_loss)) throw NumericalError("non-finite validation loss in epoch " + std::to_string(epoch));
    csv << metrics_row(m) << '\n' << std::flush;
    history.push_back(m);
    if (options.log)
      *options.log << "epoch " << epoch << "  train_loss " << m.train_loss << "  val_loss " << m.val_loss
                   << "  val_mean_length " << m.val_mean_length << '\n' << std::flush;

    const bool last = epoch == start + ppo.epochs;
    if (last || epoch % ppo.checkpoint_every == 0) {
      const auto ckpt = capture(model, &adam, {epoch, adam.steps()});
      write_checkpoint(options.out_dir / "checkpoint.bin", ckpt);
    }
  }
  return history;
}

}  // namespace qroute
