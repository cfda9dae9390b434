#pragma once

#include <functional>
#include <span>
#include <vector>

#include "specklediff/image.hpp"
#include "specklediff/random.hpp"
#include "specklediff/schedule.hpp"

namespace specklediff {

/// Noise predictor eps(x_t, t). Trained networks, oracles and test doubles all
/// plug in through this.
using EpsFn = std::function<Image(const Image& xt, int t)>;

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
Image q_sample(const Image& x0, int t, const Image& eps, const VarianceSchedule& sched);

/// One forward transition x_t = sqrt(alpha_t) x_{t-1} + sqrt(beta_t) noise.
Image q_step(const Image& x_prev, int t, const Image& noise, const VarianceSchedule& sched);

struct GaussianImage {
  Image mean;
  double variance = 0.0;
};

/// Marginal q(x_t | x_0).
GaussianImage q_mean_variance(const Image& x0, int t, const VarianceSchedule& sched);

/// Posterior q(x_{t-1} | x_t, x_0). Valid for t = 1 as well, where the
/// variance is exactly zero.
GaussianImage q_posterior(const Image& x0, const Image& xt, int t, const VarianceSchedule& sched);

/// Inverts q_sample given the noise.
Image predict_x0_from_eps(const Image& xt, int t, const Image& eps_hat, const VarianceSchedule& sched);

/// Reverse-step mean (1/sqrt(alpha_t)) (x_t - beta_t / sqrt(1 - abar_t) eps_hat).
Image predict_mu_from_eps(const Image& xt, int t, const Image& eps_hat, const VarianceSchedule& sched);

/// KL(N(mu1, var1 I) || N(mu2, var2 I)), summed over components.
double kl_gaussian(std::span<const double> mu1, double var1, std::span<const double> mu2, double var2);
double kl_gaussian(double mu1, double var1, double mu2, double var2);
double kl_gaussian(const Image& mu1, double var1, const Image& mu2, double var2);

/// Loss decomposition of the variational bound for one x0. Diagnostic only.
struct ElboTerms {
  double L_T = 0.0;
  /// L_mid[i] is the KL for step t = i + 2, averaged over Monte Carlo draws.
  std::vector<double> L_mid;
  /// The part of each L_mid entry that does not depend on the model: the KL
  /// at equal means. L_mid - variance_constant is the weighted mean error.
  std::vector<double> variance_constant;
  /// Mean squared x0 reconstruction error at t = 1.
  double L_0 = 0.0;

  double total() const;
};

ElboTerms elbo_terms(const Image& x0, const EpsFn& model, const VarianceSchedule& sched,
                     int mc_samples, Rng& rng);

}  // namespace specklediff
