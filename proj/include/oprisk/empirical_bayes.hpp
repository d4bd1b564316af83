#ifndef OPRISK_EMPIRICAL_BAYES_HPP
#define OPRISK_EMPIRICAL_BAYES_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <Eigen/Dense>

#include "distributions.hpp"
#include "error.hpp"

namespace oprisk {

struct CountRecord {
  std::int64_t year = 0;
  std::int64_t count = 0;
  double exposure = 1.0;
};

struct BankSeries {
  std::string bank_id;
  std::vector<CountRecord> records;

  std::int64_t total_count() const {
    std::int64_t n = 0;
    for (const auto& r : records) n += r.count;
    return n;
  }
  double total_exposure() const {
    double v = 0.0;
    for (const auto& r : records) v += r.exposure;
    return v;
  }
};

/**
 * Annual counts of several banks for one risk cell. `prescaled` marks panels
 * whose counts were already divided by the exposure upstream: the moment
 * estimator then treats every exposure as 1, and the likelihood (which needs
 * raw counts) refuses the panel.
 */
struct CountPanel {
  std::vector<BankSeries> banks;
  bool prescaled = false;
};

enum class HyperMethod { mle, mom };

/// Which correction term the moment estimator of sigma0^2 uses.
enum class MomVarianceForm {
  unbiased,   ///< (lambda0 / J) sum_j (1 / K_j^2) sum_k 1 / V_jk, unbiased
  main_text,  ///< (lambda0 / J) sum_j (1 / K_j) sum_k 1 / V_jk, kept for compatibility
};

/**
 * Hyperparameter estimate for the Gamma(alpha, beta) distribution of bank
 * rates. alpha and beta are empty when the data show no heterogeneity between
 * banks (`homogeneous`) or the optimum sits on the boundary of the parameter
 * space (`boundary`); lambda0 is always reported.
 */
struct HyperEstimate {
  std::optional<double> alpha;
  std::optional<double> beta;
  double lambda0 = 0.0;
  double sigma0_sq = 0.0;
  HyperMethod method = HyperMethod::mom;
  std::optional<double> loglik;
  bool homogeneous = false;
  bool boundary = false;
  double sigma0_sq_unclamped = 0.0; ///< moment estimate before clamping at 0
  int iterations = 0;

  bool defined() const { return alpha.has_value() && beta.has_value(); }
  GammaParams params() const {
    if (!defined()) throw validation_error("HyperEstimate: alpha and beta are undefined for this panel");
    return GammaParams{*alpha, *beta, std::nullopt};
  }
};

namespace detail {

inline void validate_panel(const CountPanel& panel, std::size_t min_banks) {
  if (panel.banks.size() < min_banks) {
    throw validation_error("count panel: need at least " + std::to_string(min_banks) + " banks");
  }
  for (const auto& bank : panel.banks) {
    if (bank.records.empty()) throw validation_error("count panel: bank '" + bank.bank_id + "' has no records");
    for (const auto& r : bank.records) {
      if (r.count < 0) throw validation_error("count panel: negative count for bank '" + bank.bank_id + "'");
      if (!(r.exposure > 0.0) || !std::isfinite(r.exposure)) {
        throw validation_error("count panel: exposure must be positive for bank '" + bank.bank_id + "'");
      }
    }
  }
}

struct BankTotals {
  double n;
  double v;
};

inline std::vector<BankTotals> bank_totals(const CountPanel& panel) {
  std::vector<BankTotals> out;
  out.reserve(panel.banks.size());
  for (const auto& b : panel.banks) out.push_back({static_cast<double>(b.total_count()), b.total_exposure()});
  return out;
}

// Counts up to this size use exact finite sums for the Gamma-function differences; lgamma(alpha + N) - lgamma(alpha)
// loses most of its digits when alpha >> N, which is where boundary fits live.
inline constexpr double exact_sum_limit = 1000.0;

// N ln(beta) + ln Gamma(alpha + N) - ln Gamma(alpha)
inline double log_rising(double alpha, double beta, double n) {
  if (n > exact_sum_limit) return std::lgamma(alpha + n) - std::lgamma(alpha) + n * std::log(beta);
  double s = 0.0;
  for (double i = 0.0; i < n; i += 1.0) s += std::log(alpha * beta + i * beta);
  return s;
}

// log-likelihood in the form N ln(beta) - (alpha + N) ln(1 + beta V), identical to the
// alpha ln(beta) / ln(1/beta + V) form up to rearrangement but free of cancellation
inline double log_likelihood(double alpha, double beta, const std::vector<BankTotals>& totals) {
  double ll = 0.0;
  for (const auto& t : totals) ll += log_rising(alpha, beta, t.n) - (alpha + t.n) * std::log1p(beta * t.v);
  return ll;
}

// Gradient and Hessian of the log-likelihood with respect to (ln alpha, ln beta).
inline void log_likelihood_derivatives(double alpha, double beta, const std::vector<BankTotals>& totals,
                                       Eigen::Vector2d& grad, Eigen::Matrix2d& hess) {
  double ga = 0.0, gb = 0.0, haa = 0.0, hab = 0.0, hbb = 0.0;
  for (const auto& t : totals) {
    const double s = 1.0 + beta * t.v;
    double dpsi = 0.0, dtri = 0.0;
    if (t.n > exact_sum_limit) {
      dpsi = boost::math::digamma(alpha + t.n) - boost::math::digamma(alpha);
      dtri = boost::math::trigamma(alpha + t.n) - boost::math::trigamma(alpha);
    } else {
      for (double i = 0.0; i < t.n; i += 1.0) {
        dpsi += 1.0 / (alpha + i);
        dtri -= 1.0 / ((alpha + i) * (alpha + i));
      }
    }
    ga += dpsi - std::log1p(beta * t.v);
    gb += t.n / beta - (alpha + t.n) * t.v / s;
    haa += dtri;
    hab += -t.v / s;
    hbb += -t.n / (beta * beta) + (alpha + t.n) * t.v * t.v / (s * s);
  }
  grad << alpha * ga, beta * gb;
  hess << alpha * alpha * haa + alpha * ga, alpha * beta * hab, alpha * beta * hab, beta * beta * hbb + beta * gb;
}

} // namespace detail

/// Negative log-likelihood of the pooled bank totals under Gamma(alpha, beta) rates (constants in the data dropped).
inline double neg_log_likelihood(double alpha, double beta, const CountPanel& panel) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw validation_error("neg_log_likelihood: alpha and beta must be positive");
  }
  detail::validate_panel(panel, 1);
  return -detail::log_likelihood(alpha, beta, detail::bank_totals(panel));
}

/**
 * Moment estimator. lambda_j is the mean of N_jk / V_jk over the bank's
 * years, lambda0 the mean of the lambda_j, and sigma0^2 the between-bank
 * variance of the lambda_j less the expected Poisson noise, clamped at 0.
 */
inline HyperEstimate fit_mom(const CountPanel& panel, MomVarianceForm form = MomVarianceForm::unbiased) {
  detail::validate_panel(panel, 2);
  const auto j_count = static_cast<double>(panel.banks.size());
  std::vector<double> lambda_j;
  lambda_j.reserve(panel.banks.size());
  double noise = 0.0;
  for (const auto& bank : panel.banks) {
    const auto k = static_cast<double>(bank.records.size());
    double sum_rate = 0.0;
    double sum_inv_v = 0.0;
    for (const auto& r : bank.records) {
      const double v = panel.prescaled ? 1.0 : r.exposure;
      sum_rate += static_cast<double>(r.count) / v;
      sum_inv_v += 1.0 / v;
    }
    lambda_j.push_back(sum_rate / k);
    noise += sum_inv_v / (form == MomVarianceForm::unbiased ? k * k : k);
  }
  double lambda0 = 0.0;
  for (const double l : lambda_j) lambda0 += l;
  lambda0 /= j_count;
  double ss = 0.0;
  for (const double l : lambda_j) ss += (l - lambda0) * (l - lambda0);

  HyperEstimate est;
  est.method = HyperMethod::mom;
  est.lambda0 = lambda0;
  est.sigma0_sq_unclamped = ss / (j_count - 1.0) - lambda0 / j_count * noise;
  est.sigma0_sq = std::max(est.sigma0_sq_unclamped, 0.0);
  if (est.sigma0_sq > 0.0 && lambda0 > 0.0) {
    est.alpha = lambda0 * lambda0 / est.sigma0_sq;
    est.beta = est.sigma0_sq / lambda0;
  } else {
    est.homogeneous = true;
  }
  return est;
}

/**
 * Maximum likelihood over (ln alpha, ln beta) by damped Newton iterations
 * with the analytic gradient and Hessian, started from the moment estimate
 * and two perturbations of it. Optima that run off to alpha > 1e10 or
 * beta < 1e-12 are reported as boundary solutions without alpha and beta.
 */
inline HyperEstimate fit_mle(const CountPanel& panel) {
  detail::validate_panel(panel, 2);
  if (panel.prescaled) throw validation_error("fit_mle: the likelihood needs raw counts, not a prescaled panel");
  const auto totals = detail::bank_totals(panel);
  double n_total = 0.0, v_total = 0.0;
  for (const auto& t : totals) {
    n_total += t.n;
    v_total += t.v;
  }

  HyperEstimate est;
  est.method = HyperMethod::mle;
  if (n_total == 0.0) {
    // likelihood increases monotonically as beta -> 0
    est.boundary = true;
    est.homogeneous = true;
    est.lambda0 = 0.0;
    return est;
  }

  const double pooled_rate = n_total / v_total;
  const auto mom = fit_mom(panel);
  std::vector<Eigen::Vector2d> starts;
  const double a0 = mom.defined() ? *mom.alpha : 10.0;
  const double b0 = mom.defined() ? *mom.beta : pooled_rate / 10.0;
  for (const double f : {1.0, 0.5, 2.0}) starts.emplace_back(std::log(a0 * f), std::log(b0 / f));
  starts.emplace_back(std::log(1.0), std::log(pooled_rate));

  constexpr double log_alpha_max = 23.025850929940457; // ln 1e10
  constexpr double log_beta_min = -27.631021115928547; // ln 1e-12
  auto ll_at = [&](const Eigen::Vector2d& x) { return detail::log_likelihood(std::exp(x[0]), std::exp(x[1]), totals); };

  double best_ll = -std::numeric_limits<double>::infinity();
  Eigen::Vector2d best_x = starts.front();
  bool best_boundary = false;
  int total_iterations = 0;
  for (const auto& start : starts) {
    Eigen::Vector2d x = start;
    double ll = ll_at(x);
    if (!std::isfinite(ll)) continue;
    bool hit_boundary = false;
    for (int it = 0; it < 500; ++it) {
      ++total_iterations;
      Eigen::Vector2d g;
      Eigen::Matrix2d h;
      detail::log_likelihood_derivatives(std::exp(x[0]), std::exp(x[1]), totals, g, h);
      if (g.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, std::abs(ll))) break;
      // ascend along -H^{-1} g when H is negative definite, else along damped steps
      double mu = 0.0;
      bool improved = false;
      for (int tries = 0; tries < 60; ++tries) {
        Eigen::Matrix2d a = -h;
        a.diagonal().array() += mu;
        Eigen::LLT<Eigen::Matrix2d> llt(a);
        if (llt.info() != Eigen::Success) {
          mu = (mu == 0.0) ? 1e-6 * std::max(1.0, h.norm()) : mu * 10.0;
          continue;
        }
        Eigen::Vector2d step = llt.solve(g);
        const double len = step.norm();
        if (len > 2.0) step *= 2.0 / len;
        Eigen::Vector2d trial = x + step;
        const double trial_ll = ll_at(trial);
        if (std::isfinite(trial_ll) && trial_ll >= ll) {
          improved = trial_ll > ll || step.norm() < 1e-14;
          x = trial;
          ll = trial_ll;
          break;
        }
        // Near the optimum the gain drops below the rounding of ll; judge by the gradient instead.
        if (mu == 0.0 && std::isfinite(trial_ll) && ll - trial_ll <= 1e-13 * std::max(1.0, std::abs(ll))) {
          Eigen::Vector2d g_trial;
          Eigen::Matrix2d h_trial;
          detail::log_likelihood_derivatives(std::exp(trial[0]), std::exp(trial[1]), totals, g_trial, h_trial);
          if (g_trial.norm() < 0.5 * g.norm()) {
            improved = true;
            x = trial;
            ll = trial_ll;
            break;
          }
        }
        mu = (mu == 0.0) ? 1e-6 * std::max(1.0, h.norm()) : mu * 10.0;
      }
      if (x[0] > log_alpha_max || x[1] < log_beta_min) {
        hit_boundary = true;
        break;
      }
      if (!improved) break;
    }
    if (ll > best_ll) {
      best_ll = ll;
      best_x = x;
      best_boundary = hit_boundary;
    }
  }
  if (!std::isfinite(best_ll)) throw convergence_error("fit_mle: likelihood is not finite at any start");

  est.iterations = total_iterations;
  est.loglik = best_ll;
  const double alpha = std::exp(best_x[0]);
  const double beta = std::exp(best_x[1]);
  est.lambda0 = alpha * beta;
  // As alpha -> inf at fixed alpha*beta the likelihood tends to the pooled Poisson one.
  double ll_poisson = 0.0;
  for (const auto& t : totals) ll_poisson += (t.n > 0.0 ? t.n * std::log(pooled_rate) : 0.0) - pooled_rate * t.v;
  if (ll_poisson >= best_ll - 1e-9 * std::max(1.0, std::abs(best_ll))) best_boundary = true;
  if (best_boundary) {
    est.boundary = true;
    est.homogeneous = true;
    est.lambda0 = pooled_rate;
    est.sigma0_sq = 0.0;
    return est;
  }
  est.alpha = alpha;
  est.beta = beta;
  est.sigma0_sq = alpha * beta * beta;
  return est;
}

/// Gamma posterior of one bank's rate: alpha + sum N, beta / (1 + beta sum V).
inline GammaParams bank_posterior(const GammaParams& hyper, const BankSeries& bank) {
  validate(hyper);
  if (hyper.truncated()) throw validation_error("bank_posterior: hyperprior must be untruncated");
  double n = 0.0;
  double v = 0.0;
  for (const auto& r : bank.records) {
    if (r.count < 0) throw validation_error("bank_posterior: negative count");
    if (!(r.exposure > 0.0)) throw validation_error("bank_posterior: exposure must be positive");
    n += static_cast<double>(r.count);
    v += r.exposure;
  }
  return GammaParams{hyper.alpha + n, hyper.beta / (1.0 + hyper.beta * v), std::nullopt};
}

/// Predictive count distribution NegBin(r = alpha, p = 1 / (1 + V beta)) for a year with exposure V.
inline NegBinParams predictive_counts(const GammaParams& posterior, double next_exposure = 1.0) {
  validate(posterior);
  if (posterior.truncated()) throw validation_error("predictive_counts: posterior must be untruncated");
  if (!(next_exposure > 0.0) || !std::isfinite(next_exposure)) {
    throw validation_error("predictive_counts: exposure must be positive");
  }
  return NegBinParams{posterior.alpha, 1.0 / (1.0 + next_exposure * posterior.beta)};
}

} // namespace oprisk

#endif // OPRISK_EMPIRICAL_BAYES_HPP
