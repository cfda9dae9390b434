#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "specklediff/diffusion.hpp"
#include "specklediff/eps_net.hpp"
#include "specklediff/image.hpp"
#include "specklediff/random.hpp"
#include "specklediff/schedule.hpp"

namespace specklediff {

enum class LossWeighting {
  /// Plain mean squared error between injected and predicted noise.
  simplified,
  /// Same error scaled by beta_t / (2 alpha_t (1 - abar_t)), the coefficient the
  /// reverse-step KL puts on it when the reverse variance is beta_t.
  bound_weighted,
};

std::string to_string(LossWeighting w);
LossWeighting loss_weighting_from_string(const std::string& s);

struct TrainConfig {
  int epochs = 500;
  int batch_size = 2;
  double initial_lr = 1e-4;
  int lr_halving_period_epochs = 5;
  int T = 100;
  double beta_start = 1e-4;
  double beta_end = 6e-3;
  LossWeighting loss_weighting = LossWeighting::simplified;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  VarianceSchedule schedule() const { return make_linear_schedule(T, beta_start, beta_end); }
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; keys that are not TrainConfig fields are ignored.
void from_json(const nlohmann::json& j, TrainConfig& c);

/// initial_lr * 0.5^floor(epoch / period)
double lr_schedule(int epoch, const TrainConfig& config);

/// Per-sample factor applied to the noise MSE.
double loss_weight(int t, const VarianceSchedule& sched, LossWeighting weighting);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;

  void reset(const EpsilonPredictor& model);
  /// Applies one update from the accumulated gradients.
  void apply(EpsilonPredictor& model, double lr);
};

/// Everything needed to resume training or run inference.
struct Checkpoint {
  EpsilonPredictor model;
  VarianceSchedule schedule;
  TrainConfig train;
  AdamState adam;
  /// Completed epochs.
  int epoch = 0;
  std::int64_t step = 0;

  static Checkpoint initial(const NetworkConfig& net, const TrainConfig& train);
};

/// One (t, eps) draw per batch element: t uniform on 1..T, eps standard normal.
struct NoiseDraw {
  int t = 1;
  Image eps;
};
std::vector<NoiseDraw> draw_noise(const std::vector<Image>& batch, const VarianceSchedule& sched, Rng& rng);

/// The training objective for an arbitrary predictor, without any update.
double eps_objective(const std::vector<Image>& batch, const EpsFn& model, const VarianceSchedule& sched,
                     LossWeighting weighting, Rng& rng);

/// Loss and parameter gradients for fixed draws; gradients are accumulated into `model`.
template <typename S>
S objective_with_gradients(EpsNet<S>& model, const std::vector<Image>& batch, const std::vector<NoiseDraw>& draws,
                           const VarianceSchedule& sched, LossWeighting weighting);

/// One optimizer step. Throws TrainingError on a non-finite loss.
double training_step(const std::vector<Image>& batch, Checkpoint& state, const VarianceSchedule& sched,
                     const TrainConfig& config, double lr, Rng& rng);

struct StepRecord {
  int epoch = 0;
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> log;
  /// Per-epoch median of step losses.
  std::vector<double> epoch_median_loss;
};

using EpochCallback = std::function<void(int epoch, double median_loss, double lr)>;

/// Trains from `start` for config.epochs more epochs. Epoch e draws from a
/// stream derived from (seed, e), so resumed runs reproduce uninterrupted ones.
TrainResult train(const std::vector<Image>& dataset, Checkpoint start, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});
TrainResult train(const std::vector<Image>& dataset, const NetworkConfig& net, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

void write_loss_csv(const std::vector<StepRecord>& log, const std::string& path);

}  // namespace specklediff
