#pragma once

#include <vector>

namespace specklediff {

/// Precomputed forward-process coefficients for steps t = 1..T.
///
/// All arrays are computed in double precision. Accessors take the 1-based
/// step index; alpha_bar(0) is defined as 1, which makes the t = 1 posterior
/// deterministic (tilde_beta(1) == 0).
class VarianceSchedule {
 public:
  VarianceSchedule() = default;
  explicit VarianceSchedule(std::vector<double> betas);

  int T() const { return static_cast<int>(betas_.size()); }

  double beta(int t) const { return betas_[idx(t)]; }
  double alpha(int t) const { return alphas_[idx(t)]; }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars_[idx(t)]; }
  double tilde_beta(int t) const { return tilde_betas_[idx(t)]; }
  double post_coef_x0(int t) const { return post_coef_x0_[idx(t)]; }
  double post_coef_xt(int t) const { return post_coef_xt_[idx(t)]; }

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }
  const std::vector<double>& tilde_betas() const { return tilde_betas_; }

  /// Throws IndexError unless 1 <= t <= T.
  void check_step(int t) const;

  /// Bounds of the linear schedule this was built from (0 when built from raw betas).
  double beta_start() const { return betas_.empty() ? 0.0 : betas_.front(); }
  double beta_end() const { return betas_.empty() ? 0.0 : betas_.back(); }

  friend bool operator==(const VarianceSchedule& a, const VarianceSchedule& b) {
    return a.betas_ == b.betas_;
  }

 private:
  std::size_t idx(int t) const { return static_cast<std::size_t>(t - 1); }

  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
  std::vector<double> tilde_betas_;
  std::vector<double> post_coef_x0_;
  std::vector<double> post_coef_xt_;
};

/// T points from beta_start to beta_end inclusive.
VarianceSchedule make_linear_schedule(int T, double beta_start, double beta_end);

/// T = 100, 1e-4 -> 6e-3.
VarianceSchedule default_schedule();

}  // namespace specklediff
