#ifndef OPRISK_SAMPLING_HPP
#define OPRISK_SAMPLING_HPP

#include <cmath>
#include <cstdint>
#include <utility>

#include "distributions.hpp"
#include "rng.hpp"

namespace oprisk {

inline double sample_std_normal(RngStream& rng) {
  return special::normal_quantile(rng.uniform());
}

inline double sample_normal(const NormalParams& n, RngStream& rng) {
  validate(n);
  return n.mu + n.sigma * sample_std_normal(rng);
}

inline double sample_lognormal(double mu, double sigma, RngStream& rng) {
  return std::exp(mu + sigma * sample_std_normal(rng));
}

/**
 * Gamma draw. Untruncated shapes use Marsaglia-Tsang (with the u^{1/alpha}
 * boost for alpha < 1). Truncated parameter sets reject untruncated draws
 * below B while at least a quarter of the mass lies above it, and otherwise
 * map u into [F(B), 1) and invert.
 */
inline double sample_gamma(const GammaParams& g, RngStream& rng) {
  validate(g);
  if (g.truncated()) {
    if (truncation_mass(g) < 0.25) return gamma_quantile(rng.uniform(), g);
    const GammaParams base{g.alpha, g.beta, std::nullopt};
    for (;;) {
      const double x = sample_gamma(base, rng);
      if (x >= *g.lower_trunc) return x;
    }
  }
  if (g.alpha < 1.0) {
    const GammaParams boosted{g.alpha + 1.0, g.beta, std::nullopt};
    const double y = sample_gamma(boosted, rng);
    return y * std::pow(rng.uniform(), 1.0 / g.alpha);
  }
  const double d = g.alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = sample_std_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v * g.beta;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * g.beta;
  }
}

/// L (1 - u)^{-1/xi}.
inline double sample_pareto(const ParetoParams& p, RngStream& rng) {
  validate(p);
  return p.threshold * std::pow(1.0 - rng.uniform(), -1.0 / p.xi);
}

/// Poisson(mean): sequential inversion below 10, Hormann's PTRS above.
inline std::uint64_t sample_poisson(double mean, RngStream& rng) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw validation_error("sample_poisson: mean must be finite and non-negative");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    double u = rng.uniform();
    double p = std::exp(-mean);
    std::uint64_t k = 0;
    while (u > p) {
      u -= p;
      ++k;
      p *= mean / static_cast<double>(k);
      if (p == 0.0) break;
    }
    return k;
  }
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - special::log_gamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

/// sigma^2 ~ InvChiSq(nu, beta), i.e. beta / X with X ~ chi^2_nu.
inline double sample_inv_chi_sq(double nu, double beta, RngStream& rng) {
  const double chi2 = sample_gamma(GammaParams{0.5 * nu, 2.0, std::nullopt}, rng);
  return beta / chi2;
}

/// (mu, sigma^2): sigma^2 from InvChiSq(nu, beta), then mu | sigma^2 from N(theta, sigma^2 / phi).
inline std::pair<double, double> sample_normal_inv_chi_sq(const NormalInvChiSqParams& j, RngStream& rng) {
  validate(j);
  const double sigma2 = sample_inv_chi_sq(j.nu, j.beta, rng);
  const double mu = j.theta + std::sqrt(sigma2 / j.phi) * sample_std_normal(rng);
  return {mu, sigma2};
}

} // namespace oprisk

#endif // OPRISK_SAMPLING_HPP
