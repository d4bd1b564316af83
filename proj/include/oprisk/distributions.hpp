#ifndef OPRISK_DISTRIBUTIONS_HPP
#define OPRISK_DISTRIBUTIONS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>

#include "error.hpp"
#include "special_functions.hpp"

namespace oprisk {

/// Gamma(alpha, beta) with shape alpha and scale beta, optionally truncated to [lower_trunc, inf).
struct GammaParams {
  double alpha = 1.0;
  double beta = 1.0;
  std::optional<double> lower_trunc;

  bool truncated() const { return lower_trunc.has_value() && *lower_trunc > 0.0; }
};

struct NormalParams {
  double mu = 0.0;
  double sigma = 1.0;
};

/// Pareto tail with index xi above threshold L: F(x) = 1 - (x/L)^{-xi}, x >= L.
struct ParetoParams {
  double xi = 1.0;
  double threshold = 1.0;
};

/// Number of failures before the r-th success, success probability p.
struct NegBinParams {
  double r = 1.0;
  double p = 0.5;
};

/// Joint prior on (mu, sigma^2): sigma^2 ~ InvChiSq(nu, beta), mu | sigma^2 ~ N(theta, sigma^2/phi).
struct NormalInvChiSqParams {
  double nu = 1.0;
  double beta = 1.0;
  double theta = 0.0;
  double phi = 1.0;
};

/// Smallest truncation mass accepted before a truncated region is treated as empty.
inline constexpr double min_truncation_mass = 1e-12;

namespace detail {

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw validation_error(std::string(what) + ": value is not finite");
}

inline void require_probability(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) throw validation_error(std::string(what) + ": level must lie in (0, 1)");
}

// x with P(a, x) = p and Q(a, x) = q (p + q = 1 carried separately for precision), unit scale.
inline double inverse_regularized_gamma(double a, double p, double q) {
  if (p <= 0.0) return 0.0;
  if (q <= 0.0) return std::numeric_limits<double>::infinity();
  const bool use_lower = p < 0.5;
  auto residual = [&](double x) {
    const auto t = special::regularized_gamma(a, x);
    return use_lower ? t.lower - p : q - t.upper;
  };

  // Wilson-Hilferty start, falling back to the small-x series for small shapes.
  double x;
  const double z = special::normal_quantile(std::clamp(p, 1e-300, 1.0 - 1e-16));
  const double wh = 1.0 - 1.0 / (9.0 * a) + z / (3.0 * std::sqrt(a));
  if (a >= 1.0 && wh > 0.0) {
    x = a * wh * wh * wh;
  } else {
    x = std::exp((std::log(p) + special::log_gamma(a + 1.0)) / a);
  }
  if (!(x > 0.0) || !std::isfinite(x)) x = a;

  double lo = x;
  double hi = x;
  while (residual(lo) > 0.0) {
    lo *= 0.5;
    if (lo < std::numeric_limits<double>::min()) return 0.0;
  }
  while (residual(hi) < 0.0) {
    hi *= 2.0;
    if (!std::isfinite(hi)) return std::numeric_limits<double>::infinity();
  }

  x = std::clamp(x, lo, hi);
  for (int it = 0; it < 400; ++it) {
    const double f = residual(x);
    if (std::abs(f) <= 16.0 * std::numeric_limits<double>::epsilon() * (use_lower ? p : q)) return x;
    if (f < 0.0) lo = x; else hi = x;
    // Newton in ln x: dP/d(ln x) = x^a e^{-x} / Gamma(a), well scaled even for tiny shapes.
    const double slope = std::exp(special::detail::log_gamma_prefactor(a, x));
    double next = x * std::exp(std::clamp(-f / slope, -50.0, 50.0));
    if (!(next > lo && next < hi)) {
      next = (lo > 0.0) ? std::sqrt(lo * hi) : 0.5 * hi;
    }
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * x ||
        hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      return next;
    }
    x = next;
  }
  throw convergence_error("gamma_quantile: inversion did not converge");
}

} // namespace detail

inline void validate(const GammaParams& g) {
  if (!(g.alpha > 0.0) || !std::isfinite(g.alpha)) throw validation_error("GammaParams: alpha must be positive");
  if (!(g.beta > 0.0) || !std::isfinite(g.beta)) throw validation_error("GammaParams: beta must be positive");
  if (g.lower_trunc && (!(*g.lower_trunc >= 0.0) || !std::isfinite(*g.lower_trunc))) {
    throw validation_error("GammaParams: truncation bound must be finite and non-negative");
  }
}

inline void validate(const NormalParams& n) {
  detail::require_finite(n.mu, "NormalParams.mu");
  if (!(n.sigma > 0.0) || !std::isfinite(n.sigma)) throw validation_error("NormalParams: sigma must be positive");
}

inline void validate(const ParetoParams& p) {
  if (!(p.xi > 0.0) || !std::isfinite(p.xi)) throw validation_error("ParetoParams: xi must be positive");
  if (!(p.threshold > 0.0) || !std::isfinite(p.threshold)) throw validation_error("ParetoParams: threshold must be positive");
}

inline void validate(const NegBinParams& nb) {
  if (!(nb.r > 0.0) || !std::isfinite(nb.r)) throw validation_error("NegBinParams: r must be positive");
  if (!(nb.p > 0.0 && nb.p < 1.0)) throw validation_error("NegBinParams: p must lie in (0, 1)");
}

inline void validate(const NormalInvChiSqParams& j) {
  if (!(j.nu > 0.0) || !std::isfinite(j.nu)) throw validation_error("NormalInvChiSqParams: nu must be positive");
  if (!(j.beta > 0.0) || !std::isfinite(j.beta)) throw validation_error("NormalInvChiSqParams: beta must be positive");
  if (!(j.phi > 0.0) || !std::isfinite(j.phi)) throw validation_error("NormalInvChiSqParams: phi must be positive");
  detail::require_finite(j.theta, "NormalInvChiSqParams.theta");
}

// ---------------------------------------------------------------------------
// Gamma
// ---------------------------------------------------------------------------

/// Mass of the untruncated Gamma on [lower_trunc, inf); 1 when untruncated.
inline double truncation_mass(const GammaParams& g) {
  validate(g);
  if (!g.truncated()) return 1.0;
  return special::gamma_q(g.alpha, *g.lower_trunc / g.beta);
}

inline double gamma_pdf(double x, const GammaParams& g) {
  validate(g);
  detail::require_finite(x, "gamma_pdf");
  if (x <= 0.0) return (x == 0.0 && g.alpha == 1.0 && !g.truncated()) ? 1.0 / g.beta : 0.0;
  if (g.truncated() && x < *g.lower_trunc) return 0.0;
  const double u = x / g.beta;
  const double log_pdf = special::detail::log_gamma_prefactor(g.alpha, u) - std::log(x);
  return std::exp(log_pdf) / truncation_mass(g);
}

/**
 * Gamma CDF. For a truncated parameter set this is the conditional CDF
 * (F(x) - F(B)) / (1 - F(B)) on [B, inf).
 */
inline double gamma_cdf(double x, const GammaParams& g) {
  validate(g);
  if (std::isnan(x)) throw validation_error("gamma_cdf: x is NaN");
  if (!g.truncated()) return special::gamma_p(g.alpha, x / g.beta);
  const double b = *g.lower_trunc;
  if (x <= b) return 0.0;
  const double mass = truncation_mass(g);
  return (mass - special::gamma_q(g.alpha, x / g.beta)) / mass;
}

inline double gamma_sf(double x, const GammaParams& g) {
  validate(g);
  if (std::isnan(x)) throw validation_error("gamma_sf: x is NaN");
  if (!g.truncated()) return special::gamma_q(g.alpha, x / g.beta);
  if (x <= *g.lower_trunc) return 1.0;
  return special::gamma_q(g.alpha, x / g.beta) / truncation_mass(g);
}

/// Inverse of gamma_cdf (conditional inverse when truncated).
inline double gamma_quantile(double p, const GammaParams& g) {
  validate(g);
  detail::require_probability(p, "gamma_quantile");
  if (!g.truncated()) {
    return g.beta * detail::inverse_regularized_gamma(g.alpha, p, 1.0 - p);
  }
  const auto tails = special::regularized_gamma(g.alpha, *g.lower_trunc / g.beta);
  if (tails.upper < min_truncation_mass) {
    throw validation_error("gamma_quantile: truncated region has negligible mass");
  }
  const double lower = tails.lower + p * tails.upper;
  const double upper = (1.0 - p) * tails.upper;
  const double x = g.beta * detail::inverse_regularized_gamma(g.alpha, lower, upper);
  return std::max(x, *g.lower_trunc);
}

/**
 * Mean of the (possibly truncated) Gamma:
 * alpha*beta * (1 - F_{alpha+1,beta}(B)) / (1 - F_{alpha,beta}(B)).
 *
 * Uses Q(a+1, x) = Q(a, x) + x^a e^{-x} / Gamma(a+1) so the ratio never
 * divides two underflowing tails.
 */
inline double gamma_mean(const GammaParams& g) {
  validate(g);
  const double m = g.alpha * g.beta;
  if (!g.truncated()) return m;
  const double x = *g.lower_trunc / g.beta;
  const double log_q = special::log_gamma_q(g.alpha, x);
  if (log_q < std::log(min_truncation_mass)) {
    throw validation_error("gamma_mean: truncated region has negligible mass");
  }
  const double log_term = special::detail::log_gamma_prefactor(g.alpha, x) - std::log(g.alpha);
  return m * (1.0 + std::exp(log_term - log_q));
}

/// Untruncated variance alpha*beta^2.
inline double gamma_variance(const GammaParams& g) {
  validate(g);
  return g.alpha * g.beta * g.beta;
}

// ---------------------------------------------------------------------------
// Normal / LogNormal
// ---------------------------------------------------------------------------

inline double std_normal_cdf(double z) { return special::normal_cdf(z); }

/// Z_q, the standard normal quantile.
inline double std_normal_quantile(double q) {
  detail::require_probability(q, "std_normal_quantile");
  return special::normal_quantile(q);
}

inline double normal_pdf(double x, const NormalParams& n) {
  validate(n);
  return special::normal_pdf((x - n.mu) / n.sigma) / n.sigma;
}

inline double normal_cdf(double x, const NormalParams& n) {
  validate(n);
  return special::normal_cdf((x - n.mu) / n.sigma);
}

inline double normal_quantile(double q, const NormalParams& n) {
  validate(n);
  return n.mu + n.sigma * std_normal_quantile(q);
}

/// exp(mu + sigma^2 / 2).
inline double lognormal_mean(double mu, double sigma) {
  detail::require_finite(mu, "lognormal_mean");
  if (!(sigma >= 0.0)) throw validation_error("lognormal_mean: sigma must be non-negative");
  return std::exp(mu + 0.5 * sigma * sigma);
}

/// exp(mu + sigma Z_q).
inline double lognormal_quantile(double q, double mu, double sigma) {
  detail::require_finite(mu, "lognormal_quantile");
  if (!(sigma > 0.0)) throw validation_error("lognormal_quantile: sigma must be positive");
  return std::exp(mu + sigma * std_normal_quantile(q));
}

inline double lognormal_cdf(double x, double mu, double sigma) {
  if (!(sigma > 0.0)) throw validation_error("lognormal_cdf: sigma must be positive");
  if (x <= 0.0) return 0.0;
  return special::normal_cdf((std::log(x) - mu) / sigma);
}

inline double lognormal_pdf(double x, double mu, double sigma) {
  if (!(sigma > 0.0)) throw validation_error("lognormal_pdf: sigma must be positive");
  if (x <= 0.0) return 0.0;
  return special::normal_pdf((std::log(x) - mu) / sigma) / (sigma * x);
}

// ---------------------------------------------------------------------------
// Pareto
// ---------------------------------------------------------------------------

inline double pareto_pdf(double x, const ParetoParams& p) {
  validate(p);
  if (x < p.threshold) return 0.0;
  return p.xi / p.threshold * std::pow(x / p.threshold, -p.xi - 1.0);
}

inline double pareto_cdf(double x, const ParetoParams& p) {
  validate(p);
  if (x <= p.threshold) return 0.0;
  return -std::expm1(-p.xi * std::log(x / p.threshold));
}

/// Q_q(xi) = L exp(-ln(1 - q) / xi); never below L.
inline double pareto_quantile(double q, const ParetoParams& p) {
  validate(p);
  detail::require_probability(q, "pareto_quantile");
  return p.threshold * std::exp(-std::log1p(-q) / p.xi);
}

/// L xi / (xi - 1) for xi > 1, infinity otherwise.
inline double pareto_mean(const ParetoParams& p) {
  validate(p);
  if (p.xi <= 1.0) return std::numeric_limits<double>::infinity();
  return p.threshold * p.xi / (p.xi - 1.0);
}

// ---------------------------------------------------------------------------
// Negative binomial
// ---------------------------------------------------------------------------

/// Gamma(n + r) / (Gamma(r) n!) (1 - p)^n p^r.
inline double negbin_pmf(std::uint64_t n, const NegBinParams& nb) {
  validate(nb);
  const double k = static_cast<double>(n);
  const double log_pmf = special::log_gamma(k + nb.r) - special::log_gamma(nb.r) -
                         special::log_gamma(k + 1.0) + k * std::log1p(-nb.p) + nb.r * std::log(nb.p);
  return std::exp(log_pmf);
}

/// r (1 - p) / p.
inline double negbin_mean(const NegBinParams& nb) {
  validate(nb);
  return nb.r * (1.0 - nb.p) / nb.p;
}

// ---------------------------------------------------------------------------
// Shifted t marginal of mu under the Normal-InvChiSq prior
// ---------------------------------------------------------------------------

/// Scale of the marginal t: sqrt(beta / (phi nu)).
inline double shifted_t_scale(const NormalInvChiSqParams& j) {
  validate(j);
  return std::sqrt(j.beta / (j.phi * j.nu));
}

/// Unnormalized marginal density [1 + phi (mu - theta)^2 / beta]^{-(nu + 1)/2}; equals 1 at the mode.
inline double shifted_t_density_unnormalized(double mu, const NormalInvChiSqParams& j) {
  validate(j);
  const double d = mu - j.theta;
  return std::pow(1.0 + j.phi * d * d / j.beta, -0.5 * (j.nu + 1.0));
}

/// Normalized marginal density of mu: Student t, nu dof, location theta, scale shifted_t_scale().
inline double shifted_t_pdf(double mu, const NormalInvChiSqParams& j) {
  const double s = shifted_t_scale(j);
  const double log_norm = special::log_gamma(0.5 * (j.nu + 1.0)) - special::log_gamma(0.5 * j.nu) -
                          0.5 * std::log(j.nu * std::numbers::pi) - std::log(s);
  return std::exp(log_norm) * shifted_t_density_unnormalized(mu, j);
}

} // namespace oprisk

#endif // OPRISK_DISTRIBUTIONS_HPP
