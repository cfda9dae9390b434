#include "specklediff/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "specklediff/errors.hpp"

namespace specklediff {

EpsFn as_eps_fn(const EpsilonPredictor& model) {
  return [&model](const Image& xt, int t) { return model.predict(xt, t); };
}

Image p_sample_step(const Image& xt, int t, const EpsFn& model, const VarianceSchedule& sched, Rng& rng,
                    bool add_noise) {
  sched.check_step(t);
  Image mean = predict_mu_from_eps(xt, t, model(xt, t), sched);
  if (!add_noise || t == 1) return mean;
  const double sigma = std::sqrt(sched.beta(t));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : mean.pixels()) v = static_cast<float>(v + sigma * normal(rng));
  return mean;
}

Image denoise(const Image& x_noisy, int t_start, const EpsFn& model, const VarianceSchedule& sched, Rng& rng,
              bool add_noise) {
  if (t_start < 0 || t_start > sched.T())
    throw IndexError("t_start " + std::to_string(t_start) + " outside 0.." + std::to_string(sched.T()));
  for (float v : x_noisy.pixels())
    if (!(v >= -1.0f - kNormalizedTolerance && v <= 1.0f + kNormalizedTolerance))
      throw ContractError("denoise: input is not normalized to [-1, 1]");
  if (t_start == 0) return x_noisy;
  Image x = x_noisy;
  for (int t = t_start; t >= 1; --t) x = p_sample_step(x, t, model, sched, rng, add_noise);
  for (auto& v : x.pixels()) {
    if (!std::isfinite(v)) throw DomainError("denoise: reverse chain produced non-finite values");
    v = std::clamp(v, -1.0f, 1.0f);
  }
  return x;
}

std::vector<std::pair<int, Image>> sweep_t(const Image& x_noisy, const std::vector<int>& t_list, const EpsFn& model,
                                           const VarianceSchedule& sched, std::uint64_t seed) {
  if (t_list.empty()) throw ConfigError("sweep_t: empty t list");
  for (int t : t_list)
    if (t < 0 || t > sched.T()) throw IndexError("sweep t " + std::to_string(t) + " outside 0.." + std::to_string(sched.T()));
  std::vector<std::pair<int, Image>> out;
  for (int t : t_list) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    out.emplace_back(t, denoise(x_noisy, t, model, sched, rng));
  }
  return out;
}

}  // namespace specklediff
