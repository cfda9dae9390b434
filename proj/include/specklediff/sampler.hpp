#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "specklediff/diffusion.hpp"
#include "specklediff/eps_net.hpp"

namespace specklediff {

EpsFn as_eps_fn(const EpsilonPredictor& model);

/// Draws x_{t-1} ~ N(mu_theta(x_t, t), beta_t I). The t = 1 step, and any step
/// with add_noise = false, returns the mean.
Image p_sample_step(const Image& xt, int t, const EpsFn& model, const VarianceSchedule& sched, Rng& rng,
                    bool add_noise = true);

/// Treats `x_noisy` as x_{t_start} and runs the reverse chain down to x_0,
/// clamping the result to [-1, 1]. t_start = 0 returns the input unchanged.
/// With add_noise = false every step returns its mean.
Image denoise(const Image& x_noisy, int t_start, const EpsFn& model, const VarianceSchedule& sched, Rng& rng,
              bool add_noise = true);

/// Inputs may exceed [-1, 1] by this much before denoise rejects them.
inline constexpr float kNormalizedTolerance = 1e-3f;

/// One denoise per t; the chain for t uses the stream derive_seed(seed, t).
std::vector<std::pair<int, Image>> sweep_t(const Image& x_noisy, const std::vector<int>& t_list, const EpsFn& model,
                                           const VarianceSchedule& sched, std::uint64_t seed);

}  // namespace specklediff
