#ifndef OPRISK_CONJUGATE_HPP
#define OPRISK_CONJUGATE_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "distributions.hpp"
#include "error.hpp"

namespace oprisk {

// ---------------------------------------------------------------------------
// Posterior types. Each carries the number of absorbed observations but never
// the observations themselves: the updated parameters are sufficient.
// ---------------------------------------------------------------------------

struct PoissonGammaPosterior {
  GammaParams params;
  std::uint64_t n_obs = 0;

  double mean() const { return gamma_mean(params); }
};

struct NormalMuPosterior {
  NormalParams params;
  double known_sigma = 1.0;
  std::uint64_t n_obs = 0;
};

struct ParetoXiPosterior {
  GammaParams params;
  double threshold = 1.0;
  std::uint64_t n_obs = 0;
};

/// combined = weight * data_estimate + (1 - weight) * prior_estimate.
struct CredibilityDecomposition {
  double weight = 0.0;
  double data_estimate = 0.0;
  double prior_estimate = 0.0;
  double combined = 0.0;
};

namespace detail {

inline CredibilityDecomposition blend(double w, double data, double prior) {
  // w == 0 with an unbounded data estimate (e.g. xi MLE from losses all at L) is pure prior
  const double combined = (w == 0.0) ? prior : w * data + (1.0 - w) * prior;
  return {w, data, prior, combined};
}

} // namespace detail

// ---------------------------------------------------------------------------
// Poisson - Gamma (frequency)
// ---------------------------------------------------------------------------

/// alpha + sum N_i, beta / (1 + beta n).
inline PoissonGammaPosterior poisson_gamma_update(const GammaParams& prior, std::span<const std::int64_t> counts) {
  validate(prior);
  std::int64_t total = 0;
  for (const auto n : counts) {
    if (n < 0) throw validation_error("poisson_gamma_update: negative count");
    total += n;
  }
  const auto n = static_cast<double>(counts.size());
  GammaParams post = prior;
  post.alpha = prior.alpha + static_cast<double>(total);
  post.beta = prior.beta / (1.0 + prior.beta * n);
  return {post, counts.size()};
}

inline PoissonGammaPosterior poisson_gamma_update(const GammaParams& prior, const std::vector<std::int64_t>& counts) {
  return poisson_gamma_update(prior, std::span<const std::int64_t>(counts));
}

/// One-year recursion: alpha_k = alpha_{k-1} + N_k, beta_k = beta_{k-1} / (1 + beta_{k-1}).
inline PoissonGammaPosterior poisson_gamma_step(const PoissonGammaPosterior& prev, std::int64_t n_k) {
  validate(prev.params);
  if (n_k < 0) throw validation_error("poisson_gamma_step: negative count");
  PoissonGammaPosterior next = prev;
  next.params.alpha = prev.params.alpha + static_cast<double>(n_k);
  next.params.beta = prev.params.beta / (1.0 + prev.params.beta);
  next.n_obs = prev.n_obs + 1;
  return next;
}

/// Credibility view of a Poisson-Gamma posterior, recovered from the sufficient statistics.
inline CredibilityDecomposition poisson_gamma_credibility(const GammaParams& prior, const PoissonGammaPosterior& post) {
  if (post.n_obs == 0) throw validation_error("poisson_gamma_credibility: no observations");
  const auto n = static_cast<double>(post.n_obs);
  const double w = n / (n + 1.0 / prior.beta);
  const double mean_count = (post.params.alpha - prior.alpha) / n;
  return detail::blend(w, mean_count, prior.alpha * prior.beta);
}

inline CredibilityDecomposition poisson_gamma_credibility(const GammaParams& prior, std::span<const std::int64_t> counts) {
  if (counts.empty()) throw validation_error("poisson_gamma_credibility: empty counts");
  return poisson_gamma_credibility(prior, poisson_gamma_update(prior, counts));
}

// ---------------------------------------------------------------------------
// LogNormal - Normal, sigma known (severity)
// ---------------------------------------------------------------------------

inline NormalMuPosterior lognormal_mu_update(const NormalParams& prior, double known_sigma, std::span<const double> log_losses) {
  validate(prior);
  if (!(known_sigma > 0.0) || !std::isfinite(known_sigma)) throw validation_error("lognormal_mu_update: sigma must be positive");
  double sum = 0.0;
  for (const double y : log_losses) {
    detail::require_finite(y, "lognormal_mu_update");
    sum += y;
  }
  const double n = static_cast<double>(log_losses.size());
  const double omega = prior.sigma * prior.sigma / (known_sigma * known_sigma);
  const double denom = 1.0 + n * omega;
  NormalMuPosterior post;
  post.params.mu = (prior.mu + omega * sum) / denom;
  post.params.sigma = prior.sigma / std::sqrt(denom);
  post.known_sigma = known_sigma;
  post.n_obs = log_losses.size();
  return post;
}

inline NormalMuPosterior lognormal_mu_update(const NormalParams& prior, double known_sigma, const std::vector<double>& log_losses) {
  return lognormal_mu_update(prior, known_sigma, std::span<const double>(log_losses));
}

/// Prior wrapped as a posterior with no observations, the starting point of a fold.
inline NormalMuPosterior as_posterior(const NormalParams& prior, double known_sigma) {
  return lognormal_mu_update(prior, known_sigma, std::span<const double>{});
}

inline NormalMuPosterior lognormal_mu_step(const NormalMuPosterior& prev, double y_k) {
  validate(prev.params);
  detail::require_finite(y_k, "lognormal_mu_step");
  const double s2 = prev.params.sigma * prev.params.sigma;
  const double r = s2 / (prev.known_sigma * prev.known_sigma);
  NormalMuPosterior next = prev;
  next.params.mu = (prev.params.mu + r * y_k) / (1.0 + r);
  next.params.sigma = std::sqrt(s2 / (1.0 + r));
  next.n_obs = prev.n_obs + 1;
  return next;
}

/// w = n / (n + sigma^2 / sigma0^2), blending the mean log-loss with mu0.
inline CredibilityDecomposition lognormal_mu_credibility(const NormalParams& prior, const NormalMuPosterior& post) {
  if (post.n_obs == 0) throw validation_error("lognormal_mu_credibility: no observations");
  const double n = static_cast<double>(post.n_obs);
  const double omega = prior.sigma * prior.sigma / (post.known_sigma * post.known_sigma);
  const double w = n / (n + 1.0 / omega);
  // mu_hat (1 + n omega) = mu0 + omega sum Y
  const double mean_y = (post.params.mu * (1.0 + n * omega) - prior.mu) / (n * omega);
  return detail::blend(w, mean_y, prior.mu);
}

// ---------------------------------------------------------------------------
// LogNormal with joint Normal-InvChiSq prior on (mu, sigma^2)
// ---------------------------------------------------------------------------

/**
 * nu + n, phi + n, (phi theta + n Ybar) / (phi + n) and
 * beta + phi theta^2 + n mean(Y^2) - (phi theta + n Ybar)^2 / (phi + n).
 * The scale is evaluated in the equivalent centred form
 * beta + sum (Y - Ybar)^2 + phi n / (phi + n) (Ybar - theta)^2, which does not cancel.
 */
inline NormalInvChiSqParams lognormal_joint_update(const NormalInvChiSqParams& prior, std::span<const double> log_losses) {
  validate(prior);
  if (log_losses.empty()) return prior;
  double sum = 0.0;
  for (const double y : log_losses) {
    detail::require_finite(y, "lognormal_joint_update");
    sum += y;
  }
  const double n = static_cast<double>(log_losses.size());
  const double ybar = sum / n;
  double ss = 0.0;
  for (const double y : log_losses) ss += (y - ybar) * (y - ybar);
  const double d = ybar - prior.theta;

  NormalInvChiSqParams post;
  post.nu = prior.nu + n;
  post.phi = prior.phi + n;
  post.theta = (prior.phi * prior.theta + n * ybar) / (prior.phi + n);
  post.beta = prior.beta + ss + prior.phi * n / (prior.phi + n) * d * d;
  return post;
}

inline NormalInvChiSqParams lognormal_joint_update(const NormalInvChiSqParams& prior, const std::vector<double>& log_losses) {
  return lognormal_joint_update(prior, std::span<const double>(log_losses));
}

inline NormalInvChiSqParams lognormal_joint_step(const NormalInvChiSqParams& prev, double y_k) {
  const double y[] = {y_k};
  return lognormal_joint_update(prev, std::span<const double>(y));
}

// ---------------------------------------------------------------------------
// Pareto - Gamma (tail severity)
// ---------------------------------------------------------------------------

namespace detail {

inline double log_excess(double x, double threshold) {
  require_finite(x, "pareto loss");
  if (x < threshold) throw validation_error("pareto_xi_update: loss below threshold L");
  return std::log(x / threshold);
}

} // namespace detail

/// alpha + n, 1/beta + sum ln(X_i / L). A truncation bound on the prior carries over unchanged.
inline ParetoXiPosterior pareto_xi_update(const GammaParams& prior, double threshold, std::span<const double> losses) {
  validate(prior);
  if (!(threshold > 0.0) || !std::isfinite(threshold)) throw validation_error("pareto_xi_update: threshold must be positive");
  double inv_beta = 1.0 / prior.beta;
  for (const double x : losses) inv_beta += detail::log_excess(x, threshold);
  ParetoXiPosterior post;
  post.params = prior;
  post.params.alpha = prior.alpha + static_cast<double>(losses.size());
  post.params.beta = 1.0 / inv_beta;
  post.threshold = threshold;
  post.n_obs = losses.size();
  return post;
}

inline ParetoXiPosterior pareto_xi_update(const GammaParams& prior, double threshold, const std::vector<double>& losses) {
  return pareto_xi_update(prior, threshold, std::span<const double>(losses));
}

inline ParetoXiPosterior pareto_xi_step(const ParetoXiPosterior& prev, double x_k) {
  validate(prev.params);
  ParetoXiPosterior next = prev;
  next.params.alpha = prev.params.alpha + 1.0;
  next.params.beta = 1.0 / (1.0 / prev.params.beta + detail::log_excess(x_k, prev.threshold));
  next.n_obs = prev.n_obs + 1;
  return next;
}

/// Blends xi_MLE = n / sum ln(X/L) with xi0 = alpha beta; weight sum / (sum + 1/beta).
inline CredibilityDecomposition pareto_xi_credibility(const GammaParams& prior, const ParetoXiPosterior& post) {
  if (post.n_obs == 0) throw validation_error("pareto_xi_credibility: no observations");
  const double s = 1.0 / post.params.beta - 1.0 / prior.beta;
  const double w = s / (s + 1.0 / prior.beta);
  const double mle = (s > 0.0) ? static_cast<double>(post.n_obs) / s : std::numeric_limits<double>::infinity();
  return detail::blend(w, mle, prior.alpha * prior.beta);
}

/// Posterior mean of xi honoring the lower truncation bound B (plain alpha beta when B is absent or 0).
inline double truncated_posterior_mean(const ParetoXiPosterior& post) {
  return gamma_mean(post.params);
}

/// Posterior probability that xi <= 1, i.e. that the predictive severity mean is infinite.
inline double infinite_mean_probability(const ParetoXiPosterior& post) {
  validate(post.params);
  if (post.params.truncated() && *post.params.lower_trunc >= 1.0) return 0.0;
  return gamma_cdf(1.0, post.params);
}

/// Default level above which untruncated Pareto posteriors are flagged.
inline constexpr double infinite_mean_warning_level = 0.01;

inline bool infinite_mean_warning(const ParetoXiPosterior& post, double level = infinite_mean_warning_level) {
  return infinite_mean_probability(post) > level;
}

// ---------------------------------------------------------------------------
// Truncation to [lower, upper]
// ---------------------------------------------------------------------------

/**
 * A prior or posterior restricted to [lower, upper] and renormalized.
 * The normalizing mass is evaluated on demand; updating a truncated
 * distribution updates the base parameters and keeps the bounds.
 */
template <class Params>
struct Truncated {
  Params params;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  double mass() const;
  double pdf(double x) const;
  double cdf(double x) const;
};

namespace detail {

inline double base_cdf(const GammaParams& g, double x) {
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return special::gamma_p(g.alpha, x / g.beta);
}
inline double base_cdf(const NormalParams& n, double x) {
  if (std::isinf(x)) return x > 0.0 ? 1.0 : 0.0;
  return special::normal_cdf((x - n.mu) / n.sigma);
}
inline double base_sf(const GammaParams& g, double x) {
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return special::gamma_q(g.alpha, x / g.beta);
}
inline double base_sf(const NormalParams& n, double x) {
  if (std::isinf(x)) return x > 0.0 ? 0.0 : 1.0;
  return special::normal_sf((x - n.mu) / n.sigma);
}
inline double base_pdf(const GammaParams& g, double x) {
  GammaParams u = g;
  u.lower_trunc.reset();
  return gamma_pdf(x, u);
}
inline double base_pdf(const NormalParams& n, double x) { return normal_pdf(x, n); }

// P[lower <= theta <= upper], using whichever tail keeps precision.
template <class Params>
double interval_mass(const Params& p, double lower, double upper) {
  const double by_cdf = base_cdf(p, upper) - base_cdf(p, lower);
  const double by_sf = base_sf(p, lower) - base_sf(p, upper);
  return (base_cdf(p, lower) > 0.5) ? by_sf : by_cdf;
}

} // namespace detail

template <class Params>
double Truncated<Params>::mass() const {
  return detail::interval_mass(params, lower, upper);
}

template <class Params>
double Truncated<Params>::pdf(double x) const {
  if (x < lower || x > upper) return 0.0;
  return detail::base_pdf(params, x) / mass();
}

template <class Params>
double Truncated<Params>::cdf(double x) const {
  if (x <= lower) return 0.0;
  if (x >= upper) return 1.0;
  return detail::interval_mass(params, lower, x) / mass();
}

template <class Params>
Truncated<Params> truncate(const Params& params, double lower, double upper) {
  validate(params);
  if (std::isnan(lower) || std::isnan(upper) || !(lower < upper)) {
    throw validation_error("truncate: need lower < upper");
  }
  Truncated<Params> t{params, lower, upper};
  if (!(t.mass() > min_truncation_mass)) throw validation_error("truncate: interval has zero mass");
  return t;
}

inline Truncated<GammaParams> truncate(const GammaParams& params, double lower, double upper) {
  if (params.truncated()) throw validation_error("truncate: parameters already carry a truncation bound");
  return truncate<GammaParams>(params, lower, upper);
}

inline Truncated<NormalParams> truncate(const NormalParams& params, double lower, double upper) {
  return truncate<NormalParams>(params, lower, upper);
}

/// Truncated prior in, truncated posterior out on the same interval.
inline Truncated<GammaParams> poisson_gamma_update(const Truncated<GammaParams>& prior, std::span<const std::int64_t> counts) {
  return truncate(poisson_gamma_update(prior.params, counts).params, prior.lower, prior.upper);
}

inline Truncated<NormalParams> lognormal_mu_update(const Truncated<NormalParams>& prior, double known_sigma,
                                                   std::span<const double> log_losses) {
  return truncate(lognormal_mu_update(prior.params, known_sigma, log_losses).params, prior.lower, prior.upper);
}

inline Truncated<GammaParams> pareto_xi_update(const Truncated<GammaParams>& prior, double threshold,
                                               std::span<const double> losses) {
  return truncate(pareto_xi_update(prior.params, threshold, losses).params, prior.lower, prior.upper);
}

} // namespace oprisk

#endif // OPRISK_CONJUGATE_HPP
