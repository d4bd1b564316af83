#ifndef OPRISK_ELICITATION_HPP
#define OPRISK_ELICITATION_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "distributions.hpp"
#include "error.hpp"
#include "numeric/least_squares.hpp"
#include "numeric/roots.hpp"

namespace oprisk {

/**
 * Result of fitting prior hyperparameters to expert statements.
 *
 * Residuals are listed per equation in the order the fitting routine
 * documents. Moment equations (means, expected quantiles) report the relative
 * residual model/target - 1; probability equations report model - target.
 */
template <class Params>
struct FitReport {
  Params params;
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = false;

  double max_abs_residual() const {
    double m = 0.0;
    for (const double r : residuals) m = std::max(m, std::abs(r));
    return m;
  }
};

inline constexpr double default_interval_probability = 2.0 / 3.0;
inline constexpr double fit_tolerance = 1e-8;

/// What the expert's point estimate refers to.
enum class Functional { mean, quantile, quantile_ratio, vco };

struct ExpertOpinion {
  Functional functional = Functional::mean;
  double level = 0.5;   ///< q for a quantile, q1 for a ratio
  double level2 = 0.5;  ///< q2 for a ratio
  double point = 0.0;   ///< expected value of the functional
  std::optional<std::pair<double, double>> interval;
  std::optional<double> prob;
  std::optional<double> vco;

  double probability() const { return prob.value_or(default_interval_probability); }
};

namespace detail {

inline constexpr double alpha_min = 1e-4;
inline constexpr double alpha_max = 1e6;
inline constexpr double sigma0_min = 1e-6;
inline constexpr double sigma0_max = 50.0;

inline void require_interval(double a, double b, double p, const char* what) {
  if (!(std::isfinite(a) && std::isfinite(b) && a < b)) throw validation_error(std::string(what) + ": need a < b");
  if (!(p > 0.0 && p < 1.0)) throw validation_error(std::string(what) + ": probability must lie in (0, 1)");
}

// Mean of Gamma(alpha, beta) truncated below at b (b == 0 means untruncated). No mass guard:
// as the mass above b vanishes the value tends to b, which is what the solvers need.
inline double truncated_mean_unchecked(double alpha, double beta, double b) {
  if (b <= 0.0) return alpha * beta;
  const double x = b / beta;
  const double log_q = special::log_gamma_q(alpha, x);
  const double log_term = special::detail::log_gamma_prefactor(alpha, x) - std::log(alpha);
  return alpha * beta * (1.0 + std::exp(log_term - log_q));
}

// P[lo <= xi <= hi] under Gamma(alpha, beta) truncated below at b.
inline double truncated_interval_mass(double alpha, double beta, double b, double lo, double hi) {
  lo = std::max(lo, b);
  if (!(hi > lo)) return 0.0;
  if (b <= 0.0 && lo <= 0.0) return special::gamma_p(alpha, hi / beta);
  const double log_q_b = (b > 0.0) ? special::log_gamma_q(alpha, b / beta) : 0.0;
  const auto lower_tails = special::regularized_gamma(alpha, lo / beta);
  if (b <= 0.0 && lower_tails.lower < 0.5) {
    return special::gamma_p(alpha, hi / beta) - lower_tails.lower;
  }
  const double upper_lo = std::exp(special::log_gamma_q(alpha, lo / beta) - log_q_b);
  const double upper_hi = std::isinf(hi) ? 0.0 : std::exp(special::log_gamma_q(alpha, hi / beta) - log_q_b);
  return upper_lo - upper_hi;
}

// Scale that gives the truncated Gamma(alpha, .) the requested mean.
inline double beta_for_truncated_mean(double alpha, double mean, double b) {
  const double beta_hi = mean / alpha;
  if (b <= 0.0) return beta_hi;
  auto f = [&](double log_beta) { return truncated_mean_unchecked(alpha, std::exp(log_beta), b) - mean; };
  double hi = std::log(beta_hi);
  double f_hi = f(hi);
  // the truncated mean is at least alpha * beta; a negative value here is rounding
  if (f_hi <= 0.0) return beta_hi;
  double lo = hi;
  double f_lo = f_hi;
  for (int i = 0; i < 200 && f_lo >= 0.0; ++i) {
    lo -= std::log(2.0);
    f_lo = f(lo);
  }
  if (f_lo >= 0.0) throw convergence_error("truncated Gamma: no scale reproduces the requested mean");
  return std::exp(numeric::solve_bracketed(f, lo, hi, f_lo, f_hi).x);
}

inline double normal_interval_mass(double z_lo, double z_hi) {
  if (z_lo > 0.0) return special::normal_sf(z_lo) - special::normal_sf(z_hi);
  return special::normal_cdf(z_hi) - special::normal_cdf(z_lo);
}

/**
 * Two-equation fit of a (possibly truncated) Gamma: truncated mean equals
 * `mean` and the probability of [lo, hi] equals `p`. The scale is eliminated
 * through the mean equation, leaving a one-dimensional search in the shape on
 * [1e-4, 1e6]. When several shapes qualify the largest is returned.
 */
inline FitReport<GammaParams> fit_truncated_gamma(double b, double mean, double lo, double hi, double p,
                                                  const char* what) {
  if (!(b >= 0.0 && std::isfinite(b))) throw validation_error(std::string(what) + ": lower bound B must be >= 0");
  if (!(mean > b && std::isfinite(mean))) throw validation_error(std::string(what) + ": expected value must exceed B");
  require_interval(lo, hi, p, what);

  int evaluations = 0;
  auto residual = [&](double alpha) {
    ++evaluations;
    const double beta = beta_for_truncated_mean(alpha, mean, b);
    return truncated_interval_mass(alpha, beta, b, lo, hi) - p;
  };
  const auto root = numeric::solve_on_log_grid(residual, alpha_min, alpha_max);
  if (!root) {
    const double at_cap = residual(alpha_max);
    throw infeasible_error(std::string(what) + ": no Gamma prior with shape in [1e-4, 1e6] matches the opinion (" +
                           (at_cap < 0.0 ? "interval probability is never reached" : "interval probability is always exceeded") + ")");
  }

  FitReport<GammaParams> report;
  const double alpha = root->x;
  const double beta = beta_for_truncated_mean(alpha, mean, b);
  report.params = GammaParams{alpha, beta, b > 0.0 ? std::optional<double>(b) : std::nullopt};
  report.residuals = {truncated_mean_unchecked(alpha, beta, b) / mean - 1.0,
                      truncated_interval_mass(alpha, beta, b, lo, hi) - p};
  report.iterations = evaluations;
  report.converged = report.max_abs_residual() <= fit_tolerance;
  if (!report.converged) throw convergence_error(std::string(what) + ": residuals above tolerance after root search");
  return report;
}

/**
 * One-equation fit of the prior N(mu0, sigma0) of mu for a LogNormal
 * functional exp(mu + shift): the functional is LN(mu0 + shift, sigma0), its
 * mean is `target` and [a, b] carries probability p. Solves for sigma0 on
 * [1e-6, 50] and backs out mu0. Of two roots the larger sigma0 is returned.
 */
inline FitReport<NormalParams> fit_lognormal_functional(double shift, double target, double a, double b, double p,
                                                        const char* what) {
  if (!(target > 0.0 && std::isfinite(target))) throw validation_error(std::string(what) + ": expected value must be positive");
  if (!(a > 0.0)) throw validation_error(std::string(what) + ": interval must be positive");
  require_interval(a, b, p, what);
  const double log_target = std::log(target);
  const double log_a = std::log(a);
  const double log_b = std::log(b);

  int evaluations = 0;
  auto mass = [&](double s) {
    const double c = log_target - 0.5 * s * s;
    return normal_interval_mass((log_a - c) / s, (log_b - c) / s);
  };
  auto residual = [&](double s) {
    ++evaluations;
    return mass(s) - p;
  };
  // When [a, b] excludes the target the mass rises then falls in sigma0, giving two roots.
  // The root on the falling branch is taken; if the mass still exceeds p at the cap it lies beyond it.
  if (residual(sigma0_max) > 0.0) {
    throw convergence_error(std::string(what) + ": sigma0 solution lies outside the bracket (1e-6, 50)");
  }
  const auto root = numeric::solve_on_log_grid(residual, sigma0_min, sigma0_max);
  if (!root) {
    if (residual(sigma0_max) < 0.0 && residual(sigma0_min) < 0.0) {
      throw infeasible_error(std::string(what) + ": interval probability cannot be reached for any sigma0");
    }
    throw convergence_error(std::string(what) + ": sigma0 solution lies outside the bracket (1e-6, 50)");
  }
  const double s = root->x;
  FitReport<NormalParams> report;
  report.params = NormalParams{log_target - 0.5 * s * s - shift, s};
  report.residuals = {std::exp(report.params.mu + shift + 0.5 * s * s) / target - 1.0, mass(s) - p};
  report.iterations = evaluations;
  report.converged = report.max_abs_residual() <= fit_tolerance;
  if (!report.converged) throw convergence_error(std::string(what) + ": residuals above tolerance after root search");
  return report;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Poisson-Gamma
// ---------------------------------------------------------------------------

/// Gamma prior for lambda with E[lambda] = mean and P[a <= lambda <= b] = p; beta = mean / alpha exactly.
inline FitReport<GammaParams> fit_poisson_gamma(double mean, double a, double b, double p = default_interval_probability) {
  if (!(a > 0.0)) throw validation_error("fit_poisson_gamma: need 0 < a");
  return detail::fit_truncated_gamma(0.0, mean, a, b, p, "fit_poisson_gamma");
}

/// alpha = 1 / vco^2, beta = mean / alpha.
inline GammaParams fit_poisson_gamma_vco(double mean, double vco) {
  if (!(mean > 0.0 && std::isfinite(mean))) throw validation_error("fit_poisson_gamma_vco: mean must be positive");
  if (!(vco > 0.0 && std::isfinite(vco))) throw validation_error("fit_poisson_gamma_vco: vco must be positive");
  const double alpha = 1.0 / (vco * vco);
  return GammaParams{alpha, mean / alpha, std::nullopt};
}

inline FitReport<GammaParams> fit_poisson_gamma(const ExpertOpinion& op) {
  if (op.functional != Functional::mean) throw validation_error("fit_poisson_gamma: opinion must concern the mean");
  if (op.vco) {
    FitReport<GammaParams> r;
    r.params = fit_poisson_gamma_vco(op.point, *op.vco);
    r.residuals = {r.params.alpha * r.params.beta / op.point - 1.0, 1.0 / std::sqrt(r.params.alpha) / *op.vco - 1.0};
    r.converged = true;
    return r;
  }
  if (!op.interval) throw validation_error("fit_poisson_gamma: need an interval or a vco");
  return fit_poisson_gamma(op.point, op.interval->first, op.interval->second, op.probability());
}

// ---------------------------------------------------------------------------
// LogNormal-Normal
// ---------------------------------------------------------------------------

/// Prior N(mu0, sigma0) for mu from the expected loss E[M] and P[a <= M <= b] = p; sigma known.
inline FitReport<NormalParams> fit_lognormal_mu_prior_from_mean(double sigma, double expected_loss, double a, double b,
                                                                double p = default_interval_probability) {
  if (!(sigma > 0.0 && std::isfinite(sigma))) throw validation_error("fit_lognormal_mu_prior_from_mean: sigma must be positive");
  return detail::fit_lognormal_functional(0.5 * sigma * sigma, expected_loss, a, b, p, "fit_lognormal_mu_prior_from_mean");
}

/// Prior for mu from the expected q-quantile E[Q_q] and P[a <= Q_q <= b] = p; sigma known.
inline FitReport<NormalParams> fit_lognormal_mu_prior_from_quantile(double sigma, double q, double expected_quantile,
                                                                    double a, double b,
                                                                    double p = default_interval_probability) {
  if (!(sigma > 0.0 && std::isfinite(sigma))) throw validation_error("fit_lognormal_mu_prior_from_quantile: sigma must be positive");
  detail::require_probability(q, "fit_lognormal_mu_prior_from_quantile");
  return detail::fit_lognormal_functional(sigma * std_normal_quantile(q), expected_quantile, a, b, p,
                                          "fit_lognormal_mu_prior_from_quantile");
}

/**
 * Closed forms when the uncertainty of the functional is given as a
 * coefficient of variation. The functional exp(mu + shift) is
 * LN(mu0 + shift, sigma0), whose Vco is sqrt(exp(sigma0^2) - 1), hence
 * sigma0^2 = ln(1 + Vco^2) and mu0 = ln E - shift - sigma0^2 / 2.
 */
inline NormalParams fit_lognormal_mu_prior_from_mean_vco(double sigma, double expected_loss, double vco) {
  if (!(sigma > 0.0) || !(expected_loss > 0.0) || !(vco > 0.0)) {
    throw validation_error("fit_lognormal_mu_prior_from_mean_vco: sigma, mean and vco must be positive");
  }
  const double s2 = std::log1p(vco * vco);
  return NormalParams{std::log(expected_loss) - 0.5 * sigma * sigma - 0.5 * s2, std::sqrt(s2)};
}

inline NormalParams fit_lognormal_mu_prior_from_quantile_vco(double sigma, double q, double expected_quantile, double vco) {
  if (!(sigma > 0.0) || !(expected_quantile > 0.0) || !(vco > 0.0)) {
    throw validation_error("fit_lognormal_mu_prior_from_quantile_vco: sigma, quantile and vco must be positive");
  }
  const double s2 = std::log1p(vco * vco);
  return NormalParams{std::log(expected_quantile) - sigma * std_normal_quantile(q) - 0.5 * s2, std::sqrt(s2)};
}

/// sigma = ln(Q_{q2} / Q_{q1}) / (Z_{q2} - Z_{q1}).
inline double sigma_from_quantile_ratio(double q1, double q2, double ratio) {
  detail::require_probability(q1, "sigma_from_quantile_ratio");
  detail::require_probability(q2, "sigma_from_quantile_ratio");
  if (!(q1 < q2)) throw validation_error("sigma_from_quantile_ratio: need q1 < q2");
  if (!(ratio > 1.0) || !std::isfinite(ratio)) throw validation_error("sigma_from_quantile_ratio: ratio must exceed 1");
  return std::log(ratio) / (std_normal_quantile(q2) - std_normal_quantile(q1));
}

// ---------------------------------------------------------------------------
// Pareto-Gamma with the tail index truncated below at B
// ---------------------------------------------------------------------------

/// Truncated Gamma prior for xi from E[xi] and P[a <= xi <= b] = p. Residuals: mean, interval.
inline FitReport<GammaParams> fit_pareto_gamma(double lower_bound, double mean_xi, double a, double b,
                                               double p = default_interval_probability) {
  if (!(a >= lower_bound)) throw validation_error("fit_pareto_gamma: need B <= a");
  return detail::fit_truncated_gamma(lower_bound, mean_xi, a, b, p, "fit_pareto_gamma");
}

/// ξ-interval [b/(b-L), a/(a-L)] equivalent to L < a <= mu(xi) <= b. Requires b <= B L / (B - 1).
inline std::pair<double, double> expected_loss_interval_to_xi(double lower_bound, double threshold, double a, double b) {
  if (!(lower_bound > 1.0)) throw validation_error("expected-loss interval: need B > 1");
  if (!(threshold > 0.0)) throw validation_error("expected-loss interval: threshold L must be positive");
  if (!(threshold < a && a < b)) throw validation_error("expected-loss interval: need L < a < b");
  const double bound = lower_bound * threshold / (lower_bound - 1.0);
  if (!(b <= bound)) {
    throw validation_error("expected-loss interval: need b <= B L / (B - 1) = " + std::to_string(bound));
  }
  return {b / (b - threshold), a / (a - threshold)};
}

/// ξ-interval [C1, C2] equivalent to L < a <= Q_q(xi) <= b. Requires b <= L exp(-ln(1 - q) / B).
inline std::pair<double, double> quantile_interval_to_xi(double lower_bound, double threshold, double q, double a, double b) {
  detail::require_probability(q, "quantile interval");
  if (!(lower_bound > 0.0)) throw validation_error("quantile interval: need B > 0");
  if (!(threshold > 0.0)) throw validation_error("quantile interval: threshold L must be positive");
  if (!(threshold < a && a < b)) throw validation_error("quantile interval: need L < a < b");
  const double bound = threshold * std::exp(-std::log1p(-q) / lower_bound);
  if (!(b <= bound)) {
    throw validation_error("quantile interval: need b <= L exp(-ln(1 - q) / B) = " + std::to_string(bound));
  }
  const double c = -std::log1p(-q);
  return {c / std::log(b / threshold), c / std::log(a / threshold)};
}

/**
 * Truncated Gamma prior for xi from an interval on the expected loss
 * mu(xi) = L xi / (xi - 1). The interval alone is one equation in two
 * unknowns, so a companion E[xi] is required; without it the call is an
 * error (use fit_least_squares to combine other statements).
 */
inline FitReport<GammaParams> fit_pareto_gamma_from_mean_interval(double lower_bound, double threshold, double a, double b,
                                                                  double p, std::optional<double> companion_mean_xi) {
  const auto [lo, hi] = expected_loss_interval_to_xi(lower_bound, threshold, a, b);
  if (!companion_mean_xi) {
    throw validation_error("fit_pareto_gamma_from_mean_interval: under-determined, supply E[xi] or use fit_least_squares");
  }
  return detail::fit_truncated_gamma(lower_bound, *companion_mean_xi, lo, hi, p, "fit_pareto_gamma_from_mean_interval");
}

/// As above for an interval on the q-quantile Q_q(xi) = L exp(-ln(1 - q) / xi).
inline FitReport<GammaParams> fit_pareto_gamma_from_quantile_interval(double lower_bound, double threshold, double q,
                                                                      double a, double b, double p,
                                                                      std::optional<double> companion_mean_xi) {
  const auto [lo, hi] = quantile_interval_to_xi(lower_bound, threshold, q, a, b);
  if (!companion_mean_xi) {
    throw validation_error("fit_pareto_gamma_from_quantile_interval: under-determined, supply E[xi] or use fit_least_squares");
  }
  return detail::fit_truncated_gamma(lower_bound, *companion_mean_xi, lo, hi, p, "fit_pareto_gamma_from_quantile_interval");
}

// ---------------------------------------------------------------------------
// Expected Pareto functionals under a truncated Gamma prior on xi
// ---------------------------------------------------------------------------

enum class TailFunctional { expected_loss, expected_quantile };

/**
 * E[mu(xi)] or E[Q_q(xi)] under the truncated prior, by adaptive
 * Gauss-Kronrod quadrature between the 1e-15 and 1 - 1e-15 conditional
 * quantiles of the prior (the neglected mass is below 2e-15).
 */
inline double truncated_gamma_expected_functional(const GammaParams& prior, TailFunctional functional, double threshold,
                                                  double q = 0.999) {
  validate(prior);
  if (!(threshold > 0.0)) throw validation_error("truncated_gamma_expected_functional: threshold must be positive");
  const double b = prior.lower_trunc.value_or(0.0);
  if (functional == TailFunctional::expected_loss && !(b > 1.0)) {
    throw validation_error("truncated_gamma_expected_functional: expected loss needs B > 1");
  }
  if (functional == TailFunctional::expected_quantile) {
    detail::require_probability(q, "truncated_gamma_expected_functional");
    if (!(b > 0.0)) throw validation_error("truncated_gamma_expected_functional: expected quantile needs B > 0");
  }
  const double lo = gamma_quantile(1e-15, prior);
  const double hi = gamma_quantile(1.0 - 1e-15, prior);
  const double tail_rate = -std::log1p(-q);
  auto integrand = [&](double xi) {
    const double value = (functional == TailFunctional::expected_loss) ? threshold * xi / (xi - 1.0)
                                                                       : threshold * std::exp(tail_rate / xi);
    return value * gamma_pdf(xi, prior);
  };
  double error = 0.0;
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, lo, hi, 12, 1e-10, &error);
  return integral / (1.0 - 2e-15);
}

// ---------------------------------------------------------------------------
// Least squares over several statements
// ---------------------------------------------------------------------------

enum class EquationId {
  // Gamma family (lambda, or xi truncated below at B)
  gamma_mean,
  gamma_interval,
  pareto_expected_loss_interval,
  pareto_quantile_interval,
  pareto_expected_loss,
  pareto_expected_quantile,
  // Normal family for mu, sigma known
  lognormal_mean,
  lognormal_mean_interval,
  lognormal_quantile,
  lognormal_quantile_interval,
};

/**
 * One expert statement. For *_interval ids `target` is the probability p of
 * [a, b]; otherwise it is the expected value of the functional. `q` is the
 * quantile level where relevant.
 */
struct Constraint {
  EquationId id = EquationId::gamma_mean;
  double target = 0.0;
  double weight = 1.0;
  double a = 0.0;
  double b = 0.0;
  double q = 0.5;

  auto key() const { return std::tuple(static_cast<int>(id), a, b, q, target, weight); }
};

struct GammaPriorSpace {
  double lower_bound = 0.0; ///< B; 0 for an untruncated prior
  double threshold = 1.0;   ///< L, used by the Pareto functionals
};

struct NormalPriorSpace {
  double sigma = 1.0; ///< known LogNormal sigma
};

namespace detail {

inline bool is_gamma_equation(EquationId id) { return static_cast<int>(id) <= static_cast<int>(EquationId::pareto_expected_quantile); }

inline std::vector<Constraint> canonical_constraints(std::vector<Constraint> cs) {
  std::sort(cs.begin(), cs.end(), [](const Constraint& l, const Constraint& r) { return l.key() < r.key(); });
  cs.erase(std::unique(cs.begin(), cs.end(), [](const Constraint& l, const Constraint& r) { return l.key() == r.key(); }),
           cs.end());
  if (cs.size() < 2) throw validation_error("fit_least_squares: need at least two distinct constraints");
  for (const auto& c : cs) {
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) throw validation_error("fit_least_squares: weights must be positive");
    if (!std::isfinite(c.target)) throw validation_error("fit_least_squares: target is not finite");
  }
  return cs;
}

inline double gamma_equation_value(const Constraint& c, const GammaPriorSpace& space, double alpha, double beta) {
  const double b = space.lower_bound;
  switch (c.id) {
    case EquationId::gamma_mean:
      return truncated_mean_unchecked(alpha, beta, b) / c.target - 1.0;
    case EquationId::gamma_interval:
      return truncated_interval_mass(alpha, beta, b, c.a, c.b) - c.target;
    case EquationId::pareto_expected_loss_interval: {
      const auto [lo, hi] = expected_loss_interval_to_xi(b, space.threshold, c.a, c.b);
      return truncated_interval_mass(alpha, beta, b, lo, hi) - c.target;
    }
    case EquationId::pareto_quantile_interval: {
      const auto [lo, hi] = quantile_interval_to_xi(b, space.threshold, c.q, c.a, c.b);
      return truncated_interval_mass(alpha, beta, b, lo, hi) - c.target;
    }
    case EquationId::pareto_expected_loss:
    case EquationId::pareto_expected_quantile: {
      const GammaParams g{alpha, beta, b};
      const auto f = (c.id == EquationId::pareto_expected_loss) ? TailFunctional::expected_loss
                                                                 : TailFunctional::expected_quantile;
      return truncated_gamma_expected_functional(g, f, space.threshold, c.q) / c.target - 1.0;
    }
    default:
      throw validation_error("fit_least_squares: equation does not belong to the Gamma family");
  }
}

inline double normal_equation_value(const Constraint& c, const NormalPriorSpace& space, double mu0, double sigma0) {
  const double shift = (c.id == EquationId::lognormal_mean || c.id == EquationId::lognormal_mean_interval)
                           ? 0.5 * space.sigma * space.sigma
                           : space.sigma * std_normal_quantile(c.q);
  const double loc = mu0 + shift;
  switch (c.id) {
    case EquationId::lognormal_mean:
    case EquationId::lognormal_quantile:
      return std::exp(loc + 0.5 * sigma0 * sigma0) / c.target - 1.0;
    case EquationId::lognormal_mean_interval:
    case EquationId::lognormal_quantile_interval:
      if (!(c.a > 0.0 && c.a < c.b)) throw validation_error("fit_least_squares: need 0 < a < b");
      return normal_interval_mass((std::log(c.a) - loc) / sigma0, (std::log(c.b) - loc) / sigma0) - c.target;
    default:
      throw validation_error("fit_least_squares: equation does not belong to the Normal family");
  }
}

template <class Params>
FitReport<Params> pick_best(std::vector<std::pair<numeric::LeastSquaresResult, Params>>& runs) {
  auto best = std::min_element(runs.begin(), runs.end(),
                               [](const auto& l, const auto& r) { return l.first.cost < r.first.cost; });
  FitReport<Params> report;
  report.params = best->second;
  report.residuals.assign(best->first.residuals.data(), best->first.residuals.data() + best->first.residuals.size());
  report.iterations = best->first.iterations;
  report.converged = best->first.converged;
  return report;
}

} // namespace detail

/**
 * Weighted nonlinear least squares of several statements about a Gamma prior
 * (untruncated, or truncated below at B). Parameterized by (ln alpha, ln beta)
 * so positivity holds; multistart over shapes {0.5, 2, 10, 50, 250, 2000}.
 * Residuals are reported per constraint in canonical (sorted) order.
 */
inline FitReport<GammaParams> fit_least_squares(const GammaPriorSpace& space, std::vector<Constraint> constraints) {
  const auto cs = detail::canonical_constraints(std::move(constraints));
  for (const auto& c : cs) {
    if (!detail::is_gamma_equation(c.id)) throw validation_error("fit_least_squares: mixed prior families");
  }
  // a location guess from the first moment-type statement, else the middle of the first interval
  double location = 0.0;
  for (const auto& c : cs) {
    if (c.id == EquationId::gamma_mean) { location = c.target; break; }
    if (c.id == EquationId::pareto_expected_loss && c.target > space.threshold) {
      location = c.target / (c.target - space.threshold);
      break;
    }
  }
  if (location <= space.lower_bound) {
    for (const auto& c : cs) {
      if (c.id == EquationId::gamma_interval) { location = 0.5 * (c.a + c.b); break; }
      if (c.id == EquationId::pareto_expected_loss_interval) {
        const auto [lo, hi] = expected_loss_interval_to_xi(space.lower_bound, space.threshold, c.a, c.b);
        location = 0.5 * (lo + hi);
        break;
      }
      if (c.id == EquationId::pareto_quantile_interval) {
        const auto [lo, hi] = quantile_interval_to_xi(space.lower_bound, space.threshold, c.q, c.a, c.b);
        location = 0.5 * (lo + hi);
        break;
      }
    }
  }
  if (!(location > 0.0)) location = std::max(1.0, 2.0 * space.lower_bound);

  const auto m = static_cast<Eigen::Index>(cs.size());
  numeric::ResidualFn f = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(m);
    const double alpha = std::exp(x[0]);
    const double beta = std::exp(x[1]);
    for (Eigen::Index i = 0; i < m; ++i) {
      try {
        r[i] = cs[static_cast<std::size_t>(i)].weight * detail::gamma_equation_value(cs[static_cast<std::size_t>(i)], space, alpha, beta);
      } catch (const convergence_error&) {
        r[i] = std::numeric_limits<double>::quiet_NaN();
      } catch (const validation_error& e) {
        if (std::string(e.what()).find("negligible mass") == std::string::npos) throw;
        r[i] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    return r;
  };

  std::vector<std::pair<numeric::LeastSquaresResult, GammaParams>> runs;
  for (const double alpha0 : {0.5, 2.0, 10.0, 50.0, 250.0, 2000.0}) {
    Eigen::VectorXd x0(2);
    x0 << std::log(alpha0), std::log(location / alpha0);
    auto res = numeric::levenberg_marquardt(f, x0);
    if (!res.residuals.allFinite()) continue;
    const GammaParams g{std::exp(res.x[0]), std::exp(res.x[1]),
                        space.lower_bound > 0.0 ? std::optional<double>(space.lower_bound) : std::nullopt};
    runs.emplace_back(std::move(res), g);
  }
  if (runs.empty()) throw convergence_error("fit_least_squares: no start produced a finite fit");
  return detail::pick_best(runs);
}

/// Least squares over statements about the Normal prior of mu (sigma known); (mu0, ln sigma0) parameterization.
inline FitReport<NormalParams> fit_least_squares(const NormalPriorSpace& space, std::vector<Constraint> constraints) {
  if (!(space.sigma > 0.0)) throw validation_error("fit_least_squares: sigma must be positive");
  const auto cs = detail::canonical_constraints(std::move(constraints));
  for (const auto& c : cs) {
    if (detail::is_gamma_equation(c.id)) throw validation_error("fit_least_squares: mixed prior families");
  }
  double mu_guess = 0.0;
  for (const auto& c : cs) {
    const double shift = (c.id == EquationId::lognormal_mean || c.id == EquationId::lognormal_mean_interval)
                             ? 0.5 * space.sigma * space.sigma
                             : space.sigma * std_normal_quantile(c.q);
    if (c.id == EquationId::lognormal_mean || c.id == EquationId::lognormal_quantile) {
      mu_guess = std::log(c.target) - shift;
      break;
    }
    mu_guess = 0.5 * (std::log(c.a) + std::log(c.b)) - shift;
  }

  const auto m = static_cast<Eigen::Index>(cs.size());
  numeric::ResidualFn f = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& c = cs[static_cast<std::size_t>(i)];
      r[i] = c.weight * detail::normal_equation_value(c, space, x[0], std::exp(x[1]));
    }
    return r;
  };

  std::vector<std::pair<numeric::LeastSquaresResult, NormalParams>> runs;
  for (const double s0 : {0.05, 0.2, 0.5, 1.5}) {
    Eigen::VectorXd x0(2);
    x0 << mu_guess - 0.5 * s0 * s0, std::log(s0);
    auto res = numeric::levenberg_marquardt(f, x0);
    if (!res.residuals.allFinite()) continue;
    runs.emplace_back(res, NormalParams{res.x[0], std::exp(res.x[1])});
  }
  if (runs.empty()) throw convergence_error("fit_least_squares: no start produced a finite fit");
  return detail::pick_best(runs);
}

} // namespace oprisk

#endif // OPRISK_ELICITATION_HPP
