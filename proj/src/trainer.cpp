#include "specklediff/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "specklediff/errors.hpp"

namespace specklediff {

std::string to_string(LossWeighting w) {
  return w == LossWeighting::simplified ? "simplified" : "bound_weighted";
}

LossWeighting loss_weighting_from_string(const std::string& s) {
  if (s == "simplified") return LossWeighting::simplified;
  if (s == "bound_weighted") return LossWeighting::bound_weighted;
  throw ConfigError("unknown loss weighting '" + s + "' (expected simplified or bound_weighted)");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(initial_lr > 0.0)) throw ConfigError("initial_lr must be positive");
  if (lr_halving_period_epochs < 1) throw ConfigError("lr_halving_period_epochs must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0))
    throw ConfigError("Adam coefficients out of range");
  (void)schedule();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"initial_lr", c.initial_lr},
                     {"lr_halving_period_epochs", c.lr_halving_period_epochs},
                     {"T", c.T},
                     {"beta_start", c.beta_start},
                     {"beta_end", c.beta_end},
                     {"loss_weighting", to_string(c.loss_weighting)},
                     {"seed", c.seed},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.initial_lr = j.value("initial_lr", c.initial_lr);
  c.lr_halving_period_epochs = j.value("lr_halving_period_epochs", c.lr_halving_period_epochs);
  c.T = j.value("T", c.T);
  c.beta_start = j.value("beta_start", c.beta_start);
  c.beta_end = j.value("beta_end", c.beta_end);
  if (j.contains("loss_weighting")) c.loss_weighting = loss_weighting_from_string(j.at("loss_weighting").get<std::string>());
  c.seed = j.value("seed", c.seed);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
}

double lr_schedule(int epoch, const TrainConfig& config) {
  return config.initial_lr * std::pow(0.5, epoch / config.lr_halving_period_epochs);
}

double loss_weight(int t, const VarianceSchedule& sched, LossWeighting weighting) {
  if (weighting == LossWeighting::simplified) return 1.0;
  return sched.beta(t) / (2.0 * sched.alpha(t) * (1.0 - sched.alpha_bar(t)));
}

void AdamState::reset(const EpsilonPredictor& model) {
  step = 0;
  m.clear();
  v.clear();
  for (const auto& p : model.params()) {
    m.emplace_back(p.size(), 0.0f);
    v.emplace_back(p.size(), 0.0f);
  }
}

void AdamState::apply(EpsilonPredictor& model, double lr) {
  auto& params = model.params();
  if (m.size() != params.size()) reset(model);
  ++step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  const float b1 = static_cast<float>(beta1), b2 = static_cast<float>(beta2);
  const float step_size = static_cast<float>(lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float e = static_cast<float>(eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto& mk = m[k];
    auto& vk = v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const float g = p.grad[i];
      mk[i] = b1 * mk[i] + (1.0f - b1) * g;
      vk[i] = b2 * vk[i] + (1.0f - b2) * g * g;
      p.value[i] -= step_size * mk[i] / (std::sqrt(vk[i] * inv_c2) + e);
    }
  }
}

Checkpoint Checkpoint::initial(const NetworkConfig& net, const TrainConfig& train) {
  train.validate();
  NetworkConfig cfg = net;
  cfg.T = train.T;
  Checkpoint c{EpsilonPredictor(cfg, derive_seed(train.seed, 0x1417)), train.schedule(), train, {}, 0, 0};
  c.adam.beta1 = train.adam_beta1;
  c.adam.beta2 = train.adam_beta2;
  c.adam.eps = train.adam_eps;
  c.adam.reset(c.model);
  return c;
}

std::vector<NoiseDraw> draw_noise(const std::vector<Image>& batch, const VarianceSchedule& sched, Rng& rng) {
  std::uniform_int_distribution<int> step(1, sched.T());
  std::vector<NoiseDraw> draws;
  for (const auto& x0 : batch) {
    NoiseDraw d;
    d.t = step(rng);
    d.eps = standard_normal_image(x0.height(), x0.width(), rng);
    draws.push_back(std::move(d));
  }
  return draws;
}

double eps_objective(const std::vector<Image>& batch, const EpsFn& model, const VarianceSchedule& sched,
                     LossWeighting weighting, Rng& rng) {
  if (batch.empty()) throw ContractError("eps_objective: empty batch");
  const auto draws = draw_noise(batch, sched, rng);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Image xt = q_sample(batch[i], draws[i].t, draws[i].eps, sched);
    total += loss_weight(draws[i].t, sched, weighting) * mse(model(xt, draws[i].t), draws[i].eps);
  }
  return total / static_cast<double>(batch.size());
}

template <typename S>
S objective_with_gradients(EpsNet<S>& model, const std::vector<Image>& batch, const std::vector<NoiseDraw>& draws,
                           const VarianceSchedule& sched, LossWeighting weighting) {
  if (batch.empty() || draws.size() != batch.size()) throw ContractError("objective: batch and draws differ");
  const S inv_b = S(1) / static_cast<S>(batch.size());
  S total(0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Image xt = q_sample(batch[i], draws[i].t, draws[i].eps, sched);
    const std::vector<S> in(xt.pixels().begin(), xt.pixels().end());
    const auto& eps = draws[i].eps;
    const S w = static_cast<S>(loss_weight(draws[i].t, sched, weighting));
    const S inv_n = S(1) / static_cast<S>(eps.size());
    total += model.accumulate_gradients(in, xt.height(), xt.width(), draws[i].t,
                                        [&](std::span<const S> out, std::span<S> d_out) {
                                          S sq(0);
                                          for (std::size_t k = 0; k < out.size(); ++k) {
                                            const S d = out[k] - static_cast<S>(eps[k]);
                                            sq += d * d;
                                            d_out[k] = S(2) * w * d * inv_n * inv_b;
                                          }
                                          return w * sq * inv_n * inv_b;
                                        });
  }
  return total;
}

template float objective_with_gradients<float>(EpsNet<float>&, const std::vector<Image>&,
                                               const std::vector<NoiseDraw>&, const VarianceSchedule&, LossWeighting);
template double objective_with_gradients<double>(EpsNet<double>&, const std::vector<Image>&,
                                                 const std::vector<NoiseDraw>&, const VarianceSchedule&,
                                                 LossWeighting);

double training_step(const std::vector<Image>& batch, Checkpoint& state, const VarianceSchedule& sched,
                     const TrainConfig& config, double lr, Rng& rng) {
  if (batch.empty()) throw ContractError("training_step: empty batch");
  const auto draws = draw_noise(batch, sched, rng);
  state.model.zero_grad();
  const double loss = objective_with_gradients(state.model, batch, draws, sched, config.loss_weighting);
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << state.step << " (epoch " << state.epoch << "); batch t =";
    for (std::size_t i = 0; i < draws.size(); ++i) msg << " [" << i << "]=" << draws[i].t;
    throw TrainingError(msg.str());
  }
  state.adam.apply(state.model, lr);
  ++state.step;
  return loss;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

}  // namespace

TrainResult train(const std::vector<Image>& dataset, Checkpoint start, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.empty()) throw ConfigError("train: dataset is empty");
  const VarianceSchedule sched = config.schedule();
  if (sched.T() != start.model.config().T)
    throw ConfigError("train: schedule has T = " + std::to_string(sched.T()) + " but the network was built for " +
                      std::to_string(start.model.config().T));
  for (const auto& img : dataset) {
    require_same_shape(dataset.front(), img, "train dataset");
    start.model.config().check_input(img.height(), img.width());
  }

  TrainResult res{std::move(start), {}, {}};
  Checkpoint& ck = res.checkpoint;
  ck.schedule = sched;
  ck.train = config;
  const int first = ck.epoch;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int e = first; e < first + config.epochs; ++e) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(e)));
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = lr_schedule(e, config);
    std::vector<double> losses;
    for (std::size_t b = 0; b < order.size(); b += bs) {
      std::vector<Image> batch;
      for (std::size_t k = b; k < std::min(order.size(), b + bs); ++k) batch.push_back(dataset[order[k]]);
      const double loss = training_step(batch, ck, sched, config, lr, rng);
      losses.push_back(loss);
      res.log.push_back({e, ck.step, loss, lr});
    }
    ck.epoch = e + 1;
    res.epoch_median_loss.push_back(median(losses));
    if (on_epoch) on_epoch(e, res.epoch_median_loss.back(), lr);
  }
  return res;
}

TrainResult train(const std::vector<Image>& dataset, const NetworkConfig& net, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  return train(dataset, Checkpoint::initial(net, config), config, on_epoch);
}

void write_loss_csv(const std::vector<StepRecord>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,step,loss,lr\n";
  out.precision(9);
  for (const auto& r : log) out << r.epoch << ',' << r.step << ',' << r.loss << ',' << r.lr << '\n';
}

}  // namespace specklediff
