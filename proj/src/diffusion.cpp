#include "specklediff/diffusion.hpp"

#include <cmath>
#include <string>

#include "specklediff/errors.hpp"

namespace specklediff {

Image standard_normal_image(int height, int width, Rng& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  Image out(height, width);
  for (auto& v : out.pixels()) v = normal(rng);
  return out;
}

namespace {

// out = a * x + b * y, evaluated in double per pixel.
Image affine2(double a, const Image& x, double b, const Image& y) {
  Image out(x.height(), x.width());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = static_cast<float>(a * x[i] + b * y[i]);
  return out;
}

Image scaled(double a, const Image& x) {
  Image out(x.height(), x.width());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(a * x[i]);
  return out;
}

}  // namespace

Image q_sample(const Image& x0, int t, const Image& eps, const VarianceSchedule& sched) {
  sched.check_step(t);
  require_same_shape(x0, eps, "q_sample");
  const double abar = sched.alpha_bar(t);
  return affine2(std::sqrt(abar), x0, std::sqrt(1.0 - abar), eps);
}

Image q_step(const Image& x_prev, int t, const Image& noise, const VarianceSchedule& sched) {
  sched.check_step(t);
  require_same_shape(x_prev, noise, "q_step");
  return affine2(std::sqrt(sched.alpha(t)), x_prev, std::sqrt(sched.beta(t)), noise);
}

GaussianImage q_mean_variance(const Image& x0, int t, const VarianceSchedule& sched) {
  sched.check_step(t);
  const double abar = sched.alpha_bar(t);
  return {scaled(std::sqrt(abar), x0), 1.0 - abar};
}

GaussianImage q_posterior(const Image& x0, const Image& xt, int t, const VarianceSchedule& sched) {
  sched.check_step(t);
  require_same_shape(x0, xt, "q_posterior");
  return {affine2(sched.post_coef_x0(t), x0, sched.post_coef_xt(t), xt), sched.tilde_beta(t)};
}

Image predict_x0_from_eps(const Image& xt, int t, const Image& eps_hat, const VarianceSchedule& sched) {
  sched.check_step(t);
  require_same_shape(xt, eps_hat, "predict_x0_from_eps");
  const double abar = sched.alpha_bar(t);
  const double inv = 1.0 / std::sqrt(abar);
  return affine2(inv, xt, -inv * std::sqrt(1.0 - abar), eps_hat);
}

Image predict_mu_from_eps(const Image& xt, int t, const Image& eps_hat, const VarianceSchedule& sched) {
  sched.check_step(t);
  require_same_shape(xt, eps_hat, "predict_mu_from_eps");
  const double inv = 1.0 / std::sqrt(sched.alpha(t));
  const double eps_coef = sched.beta(t) / std::sqrt(1.0 - sched.alpha_bar(t));
  return affine2(inv, xt, -inv * eps_coef, eps_hat);
}

double kl_gaussian(std::span<const double> mu1, double var1, std::span<const double> mu2, double var2) {
  if (!(var1 > 0.0) || !(var2 > 0.0)) throw DomainError("kl_gaussian: variances must be positive");
  if (mu1.size() != mu2.size()) throw ContractError("kl_gaussian: mean vectors differ in length");
  double sq = 0.0;
  for (std::size_t i = 0; i < mu1.size(); ++i) {
    const double d = mu1[i] - mu2[i];
    sq += d * d;
  }
  const double n = static_cast<double>(mu1.size());
  // var/(2 var2) - 1/2 + log(sigma2/sigma1) per component, plus the mean term.
  const double per_component = 0.5 * var1 / var2 + 0.5 * std::log(var2 / var1) - 0.5;
  return std::max(0.0, n * per_component + sq / (2.0 * var2));
}

double kl_gaussian(double mu1, double var1, double mu2, double var2) {
  return kl_gaussian(std::span<const double>(&mu1, 1), var1, std::span<const double>(&mu2, 1), var2);
}

double kl_gaussian(const Image& mu1, double var1, const Image& mu2, double var2) {
  require_same_shape(mu1, mu2, "kl_gaussian");
  std::vector<double> a(mu1.pixels().begin(), mu1.pixels().end());
  std::vector<double> b(mu2.pixels().begin(), mu2.pixels().end());
  return kl_gaussian(a, var1, b, var2);
}

double ElboTerms::total() const {
  double s = L_T + L_0;
  for (double v : L_mid) s += v;
  return s;
}

ElboTerms elbo_terms(const Image& x0, const EpsFn& model, const VarianceSchedule& sched,
                     int mc_samples, Rng& rng) {
  if (mc_samples < 1) throw ConfigError("elbo_terms: mc_samples must be >= 1");
  const int T = sched.T();
  ElboTerms terms;

  const auto marginal = q_mean_variance(x0, T, sched);
  terms.L_T = kl_gaussian(marginal.mean, marginal.variance, Image(x0.height(), x0.width(), 0.0f), 1.0);

  terms.L_mid.assign(static_cast<std::size_t>(T - 1), 0.0);
  terms.variance_constant.assign(static_cast<std::size_t>(T - 1), 0.0);
  for (int t = 2; t <= T; ++t) {
    double acc = 0.0;
    for (int s = 0; s < mc_samples; ++s) {
      const Image eps = standard_normal_image(x0.height(), x0.width(), rng);
      const Image xt = q_sample(x0, t, eps, sched);
      const auto post = q_posterior(x0, xt, t, sched);
      const Image mu_theta = predict_mu_from_eps(xt, t, model(xt, t), sched);
      acc += kl_gaussian(post.mean, post.variance, mu_theta, sched.beta(t));
    }
    const auto i = static_cast<std::size_t>(t - 2);
    terms.L_mid[i] = acc / mc_samples;
    terms.variance_constant[i] = kl_gaussian(x0, sched.tilde_beta(t), x0, sched.beta(t));
  }

  double acc0 = 0.0;
  for (int s = 0; s < mc_samples; ++s) {
    const Image eps = standard_normal_image(x0.height(), x0.width(), rng);
    const Image x1 = q_sample(x0, 1, eps, sched);
    acc0 += mse(predict_x0_from_eps(x1, 1, model(x1, 1), sched), x0);
  }
  terms.L_0 = acc0 / mc_samples;
  return terms;
}

}  // namespace specklediff
