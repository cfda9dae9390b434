#include "specklediff/schedule.hpp"

#include <cmath>
#include <string>

#include "specklediff/errors.hpp"

namespace specklediff {

VarianceSchedule::VarianceSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw ConfigError("variance schedule needs at least one step");
  const std::size_t n = betas_.size();
  alphas_.resize(n);
  alpha_bars_.resize(n);
  tilde_betas_.resize(n);
  post_coef_x0_.resize(n);
  post_coef_xt_.resize(n);

  double abar_prev = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double b = betas_[i];
    if (!(b > 0.0 && b < 1.0))
      throw ConfigError("beta_" + std::to_string(i + 1) + " = " + std::to_string(b) +
                        " is outside (0, 1)");
    alphas_[i] = 1.0 - b;
    alpha_bars_[i] = abar_prev * alphas_[i];
    const double one_minus_abar = 1.0 - alpha_bars_[i];
    tilde_betas_[i] = (1.0 - abar_prev) / one_minus_abar * b;
    post_coef_x0_[i] = std::sqrt(abar_prev) * b / one_minus_abar;
    post_coef_xt_[i] = std::sqrt(alphas_[i]) * (1.0 - abar_prev) / one_minus_abar;
    abar_prev = alpha_bars_[i];
  }
}

void VarianceSchedule::check_step(int t) const {
  if (t < 1 || t > T())
    throw IndexError("step " + std::to_string(t) + " outside 1.." + std::to_string(T()));
}

VarianceSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
  if (T < 2) throw ConfigError("linear schedule needs T >= 2, got " + std::to_string(T));
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw ConfigError("linear schedule needs 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(static_cast<std::size_t>(T));
  for (int i = 0; i < T; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(T - 1);
    betas[static_cast<std::size_t>(i)] = beta_start + f * (beta_end - beta_start);
  }
  betas.back() = beta_end;
  return VarianceSchedule(std::move(betas));
}

VarianceSchedule default_schedule() { return make_linear_schedule(100, 1e-4, 6e-3); }

}  // namespace specklediff
