#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "qroute/config.hpp"
#include "qroute/model.hpp"

namespace qroute {

inline constexpr double kRatioCap = 1e6;

struct EpisodeRecord {
  int instance = -1;  // index into the instance pool the buffer was collected from
  std::vector<int> actions;
  double old_log_prob = 0;
  double reward = 0;  // negative route length
  double normalized_reward = 0;
  double value = 0;  // critic estimate at collection time
  double advantage = 0;
};

/// Episodes of one collection phase. Cleared every epoch.
struct RolloutBuffer {
  const std::vector<Instance>* instances = nullptr;
  std::vector<EpisodeRecord> records;

  const Instance& instance_of(const EpisodeRecord& r) const { return instances->at(r.instance); }
};

/// Zero mean, unit (population) standard deviation over the buffer; only
/// centres when the spread is below 1e-8. Throws DomainError on an empty buffer.
void normalize_rewards(RolloutBuffer& buffer);
/// Advantage = normalized reward - value estimate.
void compute_advantages(RolloutBuffer& buffer);

/// exp(new - old), clamped at kRatioCap; `overflows` counts clamped calls.
double ratio(double new_log_prob, double old_log_prob, long* overflows = nullptr);
/// min(r A, clip(r, 1-eps, 1+eps) A) for one record.
double clipped_objective(double r, double advantage, double eps);
/// Derivative of clipped_objective with respect to r.
double clipped_objective_slope(double r, double advantage, double eps);
/// Mean of clipped_objective over records.
double clip_loss(const std::vector<double>& ratios, const std::vector<double>& advantages, double eps);
/// Mean Shannon entropy (natural log) of the given distributions.
double entropy_loss(const std::vector<Eigen::VectorXd>& distributions);
double value_loss(const std::vector<double>& targets, const std::vector<double>& values);

struct LossParts {
  double clip = 0, value = 0, entropy = 0;
};
/// -lambda_p clip + lambda_v value - lambda_e entropy.
double total_loss(const LossParts& parts, const PpoConfig& ppo);

struct CollectOptions {
  std::uint64_t seed = 1;
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  int threads = 1;
};

/// Samples one episode per index with the current (old) policy. Old
/// log-probabilities come from the same batched evaluation the update uses.
RolloutBuffer collect(const Model& model, const std::vector<Instance>& pool, const std::vector<int>& indices,
                      const CollectOptions& options);

struct MinibatchResult {
  LossParts parts;
  double total = 0;
  long ratio_overflows = 0;
};

/// Loss of Algorithm 1 on records `indices`. With `backward` set, the
/// gradient of the total is accumulated into the model's parameters
/// (finalized, not zeroed first).
MinibatchResult minibatch_loss(Model& model, const RolloutBuffer& buffer, const std::vector<int>& indices,
                               nn::BnMode mode, bool backward);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_mean_length = 0;
  double wall_time_s = 0;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  int threads = 1;
  bool reproducible = false;  // write wall_time_s as 0
  std::filesystem::path resume;  // checkpoint to continue from
  std::ostream* log = nullptr;
};

std::string metrics_header();
std::string metrics_row(const EpochMetrics& m);

/// Runs Algorithm 1 for config.ppo.epochs epochs, writing metrics.csv,
/// checkpoints and the resolved config into out_dir. Throws NumericalError
/// (after dumping the offending minibatch) on a non-finite loss.
std::vector<EpochMetrics> train(const Config& config, const std::vector<Instance>& train_set,
                                const std::vector<Instance>& val_set, const TrainOptions& options);

/// Greedy mean length with inference-mode normalization.
double greedy_mean_length(const Model& model, const std::vector<Instance>& instances, int threads = 1);
/// Total loss on sampled validation rollouts, with the ratio fixed at 1.
double validation_loss(Model& model, const std::vector<Instance>& instances, const CollectOptions& options);

/// Runs fn(i) for i in [0, count) on up to `threads` threads.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace qroute
