#ifndef OPRISK_CAPITAL_HPP
#define OPRISK_CAPITAL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <Eigen/Dense>

#include "distributions.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "sampling.hpp"

namespace oprisk {

/// A risk-profile parameter known exactly (posterior collapsed to a point).
struct PointMass {
  double value = 0.0;
};

using FrequencyProfile = std::variant<GammaParams, PointMass>;

/// LogNormal severities with known sigma; sigma == 0 makes every loss exp(mu).
struct LogNormalSeverity {
  std::variant<NormalParams, PointMass> mu;
  double sigma = 1.0;
};

/// LogNormal severities with (mu, sigma^2) jointly Normal-InvChiSq.
struct LogNormalJointSeverity {
  NormalInvChiSqParams params;
};

/// Pareto severities above threshold L with tail index xi.
struct ParetoSeverity {
  std::variant<GammaParams, PointMass> xi;
  double threshold = 1.0;
};

using SeverityModel = std::variant<LogNormalSeverity, LogNormalJointSeverity, ParetoSeverity>;

/// Minimum coefficient of variation for a sampled risk profile.
struct FloorSpec {
  double value = 0.05;
};

struct RiskCellModel {
  std::string cell_id;
  FrequencyProfile frequency = PointMass{0.0};
  double exposure = 1.0; ///< Poisson mean is lambda * exposure
  SeverityModel severity = LogNormalSeverity{};
  std::optional<FloorSpec> variance_floor;
  bool acknowledge_infinite_mean = false;
};

enum class CopulaKind { independent, gaussian };
enum class ProfileCoordinate { frequency, severity };

struct CoupledCoordinate {
  std::size_t cell = 0;
  ProfileCoordinate coordinate = ProfileCoordinate::frequency;
};

/**
 * Dependence between risk profiles. `coupling[i]` names the profile
 * coordinate carried by row/column i of `correlation`; coordinates not listed
 * are drawn independently. A joint (mu, sigma^2) severity couples through mu.
 */
struct CopulaSpec {
  CopulaKind kind = CopulaKind::independent;
  Eigen::MatrixXd correlation;
  std::vector<CoupledCoordinate> coupling;
};

struct SimulationOptions {
  std::uint64_t samples = 100000; ///< K
  std::uint64_t seed = 0;
  double quantile = 0.999;
  unsigned threads = 0;       ///< 0 = hardware concurrency
  bool interpolate = false;   ///< interpolated instead of order-statistic quantile
  bool keep_profiles = false; ///< also return the sampled lambda and severity profile of every replication
};

struct CapitalResult {
  std::vector<std::string> cell_ids;
  std::vector<std::vector<double>> per_cell_samples;
  std::vector<double> total_samples;
  std::vector<std::vector<double>> per_cell_lambda;   ///< filled when keep_profiles is set
  std::vector<std::vector<double>> per_cell_severity; ///< mu or xi; filled when keep_profiles is set
  std::vector<double> per_cell_quantile;
  double total_quantile = 0.0;
  double sum_of_quantiles = 0.0;
  double quantile_level = 0.999;
  std::uint64_t seed = 0;
  std::uint64_t samples = 0;
  std::vector<std::string> diagnostics;
};

// ---------------------------------------------------------------------------
// Quantiles and the variance floor
// ---------------------------------------------------------------------------

/**
 * Order statistic X_(ceil(qK)) of the sample (1-based). A product qK within
 * 1e-9 relative of an integer counts as that integer, so 0.999 * 1000 gives
 * index 999 despite rounding. With `interpolate`, linear interpolation at
 * position q (K - 1) of the 0-based sorted sample is used instead.
 */
inline double empirical_quantile(std::vector<double> samples, double q, bool interpolate = false) {
  if (samples.empty()) throw validation_error("empirical_quantile: empty sample");
  detail::require_probability(q, "empirical_quantile");
  const auto k = samples.size();
  if (interpolate) {
    std::sort(samples.begin(), samples.end());
    const double pos = q * static_cast<double>(k - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= k) return samples.back();
    const double frac = pos - static_cast<double>(i);
    return samples[i] + frac * (samples[i + 1] - samples[i]);
  }
  const double t = q * static_cast<double>(k);
  const double r = std::round(t);
  double idx = (std::abs(t - r) <= 1e-9 * std::max(1.0, t)) ? r : std::ceil(t);
  idx = std::clamp(idx, 1.0, static_cast<double>(k));
  const auto pos = static_cast<std::size_t>(idx) - 1;
  std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(pos), samples.end());
  return samples[pos];
}

inline double capital_sum_of_quantiles(const CapitalResult& result) {
  double s = 0.0;
  for (const double q : result.per_cell_quantile) s += q;
  return s;
}

/**
 * Raise the spread of a Gamma posterior so its coefficient of variation
 * 1/sqrt(alpha) is at least `floor.value`, holding alpha * beta fixed. The
 * floor acts on the untruncated parameters; a truncation bound is kept.
 */
inline GammaParams apply_variance_floor(const GammaParams& posterior, const FloorSpec& floor) {
  validate(posterior);
  if (!(floor.value > 0.0) || !std::isfinite(floor.value)) throw validation_error("variance floor must be positive");
  if (1.0 / std::sqrt(posterior.alpha) >= floor.value) return posterior;
  const double mean = posterior.alpha * posterior.beta;
  const double alpha = 1.0 / (floor.value * floor.value);
  return GammaParams{alpha, mean / alpha, posterior.lower_trunc};
}

/// Normal posterior: raise sigma to floor * |mu| when sigma / |mu| is below the floor. Undefined for mu == 0.
inline NormalParams apply_variance_floor(const NormalParams& posterior, const FloorSpec& floor) {
  validate(posterior);
  if (!(floor.value > 0.0) || !std::isfinite(floor.value)) throw validation_error("variance floor must be positive");
  if (posterior.mu == 0.0) throw validation_error("variance floor: coefficient of variation undefined for a zero mean");
  const double target = floor.value * std::abs(posterior.mu);
  if (posterior.sigma >= target) return posterior;
  return NormalParams{posterior.mu, target};
}

// ---------------------------------------------------------------------------
// One year of one cell
// ---------------------------------------------------------------------------

namespace detail {

inline double frequency_from_uniform(const FrequencyProfile& f, double u) {
  if (const auto* p = std::get_if<PointMass>(&f)) return p->value;
  return gamma_quantile(u, std::get<GammaParams>(f));
}

inline double draw_frequency(const FrequencyProfile& f, RngStream& rng) {
  if (const auto* p = std::get_if<PointMass>(&f)) return p->value;
  return sample_gamma(std::get<GammaParams>(f), rng);
}

/// Severity profile of one year: LogNormal (mu, sigma) or Pareto xi.
struct SeverityDraw {
  double a = 0.0; ///< mu or xi
  double sigma = 0.0;
};

inline SeverityDraw severity_from_uniform(const SeverityModel& s, double u, RngStream& rng) {
  if (const auto* ln = std::get_if<LogNormalSeverity>(&s)) {
    if (const auto* p = std::get_if<PointMass>(&ln->mu)) return {p->value, ln->sigma};
    return {normal_quantile(u, std::get<NormalParams>(ln->mu)), ln->sigma};
  }
  if (const auto* joint = std::get_if<LogNormalJointSeverity>(&s)) {
    const auto& j = joint->params;
    const boost::math::students_t_distribution<double> t(j.nu);
    const double mu = j.theta + shifted_t_scale(j) * boost::math::quantile(t, u);
    // sigma^2 | mu is InvChiSq(nu + 1, beta + phi (mu - theta)^2)
    const double d = mu - j.theta;
    const double sigma2 = sample_inv_chi_sq(j.nu + 1.0, j.beta + j.phi * d * d, rng);
    return {mu, std::sqrt(sigma2)};
  }
  const auto& par = std::get<ParetoSeverity>(s);
  if (const auto* p = std::get_if<PointMass>(&par.xi)) return {p->value, 0.0};
  return {gamma_quantile(u, std::get<GammaParams>(par.xi)), 0.0};
}

inline SeverityDraw draw_severity(const SeverityModel& s, RngStream& rng) {
  if (const auto* joint = std::get_if<LogNormalJointSeverity>(&s)) {
    const auto [mu, sigma2] = sample_normal_inv_chi_sq(joint->params, rng);
    return {mu, std::sqrt(sigma2)};
  }
  if (const auto* ln = std::get_if<LogNormalSeverity>(&s)) {
    if (const auto* p = std::get_if<PointMass>(&ln->mu)) return {p->value, ln->sigma};
    return {sample_normal(std::get<NormalParams>(ln->mu), rng), ln->sigma};
  }
  const auto& par = std::get<ParetoSeverity>(s);
  if (const auto* p = std::get_if<PointMass>(&par.xi)) return {p->value, 0.0};
  return {sample_gamma(std::get<GammaParams>(par.xi), rng), 0.0};
}

inline double compound_year(const RiskCellModel& m, double lambda, const SeverityDraw& sev, RngStream& rng) {
  const std::uint64_t n = sample_poisson(lambda * m.exposure, rng);
  double z = 0.0;
  if (const auto* par = std::get_if<ParetoSeverity>(&m.severity)) {
    const ParetoParams p{sev.a, par->threshold};
    for (std::uint64_t i = 0; i < n; ++i) z += sample_pareto(p, rng);
  } else {
    for (std::uint64_t i = 0; i < n; ++i) z += sample_lognormal(sev.a, sev.sigma, rng);
  }
  return z;
}

/// Validates the cell, applies its variance floor and reports whether predictive means are infinite.
inline RiskCellModel prepare_cell(const RiskCellModel& m, bool& infinite_mean) {
  RiskCellModel out = m;
  infinite_mean = false;
  if (!(m.exposure > 0.0) || !std::isfinite(m.exposure)) throw validation_error("cell '" + m.cell_id + "': exposure must be positive");
  if (auto* g = std::get_if<GammaParams>(&out.frequency)) {
    validate(*g);
    if (m.variance_floor) *g = apply_variance_floor(*g, *m.variance_floor);
  } else if (!(std::get<PointMass>(out.frequency).value >= 0.0)) {
    throw validation_error("cell '" + m.cell_id + "': frequency must be non-negative");
  }
  if (auto* ln = std::get_if<LogNormalSeverity>(&out.severity)) {
    if (!(ln->sigma >= 0.0) || !std::isfinite(ln->sigma)) throw validation_error("cell '" + m.cell_id + "': sigma must be >= 0");
    if (auto* n = std::get_if<NormalParams>(&ln->mu)) {
      validate(*n);
      if (m.variance_floor) *n = apply_variance_floor(*n, *m.variance_floor);
    }
  } else if (auto* joint = std::get_if<LogNormalJointSeverity>(&out.severity)) {
    validate(joint->params);
  } else {
    auto& par = std::get<ParetoSeverity>(out.severity);
    if (!(par.threshold > 0.0)) throw validation_error("cell '" + m.cell_id + "': Pareto threshold must be positive");
    if (auto* g = std::get_if<GammaParams>(&par.xi)) {
      validate(*g);
      if (m.variance_floor) *g = apply_variance_floor(*g, *m.variance_floor);
      infinite_mean = !(g->lower_trunc.value_or(0.0) > 1.0);
    } else {
      const double xi = std::get<PointMass>(par.xi).value;
      if (!(xi > 0.0)) throw validation_error("cell '" + m.cell_id + "': xi must be positive");
      infinite_mean = xi <= 1.0;
    }
    if (infinite_mean && !m.acknowledge_infinite_mean) {
      throw validation_error("cell '" + m.cell_id +
                             "': Pareto tail index has mass at xi <= 1 (infinite mean); truncate at B > 1 or acknowledge");
    }
  }
  return out;
}

template <class Body>
void parallel_replications(std::uint64_t k, unsigned threads, Body&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(k, 1)));
  if (threads <= 1) {
    body(0, k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::uint64_t chunk = (k + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::uint64_t begin = std::min(k, t * chunk);
    const std::uint64_t end = std::min(k, begin + chunk);
    pool.emplace_back([&, t, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct ProfileStore {
  std::vector<std::vector<double>> lambda;
  std::vector<std::vector<double>> severity;

  ProfileStore(std::size_t cells, const SimulationOptions& opt) {
    if (!opt.keep_profiles) return;
    lambda.assign(cells, std::vector<double>(opt.samples));
    severity.assign(cells, std::vector<double>(opt.samples));
  }
  void record(std::size_t j, std::uint64_t k, double l, const SeverityDraw& sev) {
    if (lambda.empty()) return;
    lambda[j][k] = l;
    severity[j][k] = sev.a;
  }
};

inline CapitalResult finish(std::vector<RiskCellModel> const& models, std::vector<std::vector<double>> per_cell,
                            const SimulationOptions& opt, const std::vector<bool>& infinite_mean,
                            ProfileStore profiles) {
  CapitalResult r;
  r.per_cell_lambda = std::move(profiles.lambda);
  r.per_cell_severity = std::move(profiles.severity);
  r.seed = opt.seed;
  r.samples = opt.samples;
  r.quantile_level = opt.quantile;
  r.total_samples.assign(opt.samples, 0.0);
  for (std::size_t j = 0; j < models.size(); ++j) {
    r.cell_ids.push_back(models[j].cell_id);
    for (std::uint64_t k = 0; k < opt.samples; ++k) r.total_samples[k] += per_cell[j][k];
    r.per_cell_quantile.push_back(empirical_quantile(per_cell[j], opt.quantile, opt.interpolate));
    if (infinite_mean[j]) {
      r.diagnostics.push_back("cell '" + models[j].cell_id + "': Pr[xi <= 1] > 0, sample means are unreliable");
    }
  }
  r.per_cell_samples = std::move(per_cell);
  r.total_quantile = empirical_quantile(r.total_samples, opt.quantile, opt.interpolate);
  r.sum_of_quantiles = capital_sum_of_quantiles(r);
  return r;
}

inline void validate_options(const SimulationOptions& opt, std::size_t cells) {
  if (cells == 0) throw validation_error("simulation needs at least one risk cell");
  if (opt.samples < 1) throw validation_error("simulation needs at least one replication");
  detail::require_probability(opt.quantile, "simulation quantile");
}

} // namespace detail

/**
 * One simulated annual loss of a cell: draw lambda and the severity profile
 * from their posteriors (one draw for the whole year), N ~ Poisson(lambda V),
 * then sum N independent severities.
 */
inline double simulate_cell_year(const RiskCellModel& model, RngStream& rng) {
  bool infinite_mean = false;
  const auto m = detail::prepare_cell(model, infinite_mean);
  const double lambda = detail::draw_frequency(m.frequency, rng);
  const auto sev = detail::draw_severity(m.severity, rng);
  return detail::compound_year(m, lambda, sev, rng);
}

/// K independent replications of every cell; replication k uses RngStream(seed, k) whatever the thread count.
inline CapitalResult run_independent(const std::vector<RiskCellModel>& models, const SimulationOptions& opt) {
  detail::validate_options(opt, models.size());
  std::vector<RiskCellModel> prepared;
  std::vector<bool> infinite_mean;
  for (const auto& m : models) {
    bool inf = false;
    prepared.push_back(detail::prepare_cell(m, inf));
    infinite_mean.push_back(inf);
  }
  std::vector<std::vector<double>> per_cell(models.size(), std::vector<double>(opt.samples));
  detail::ProfileStore profiles(models.size(), opt);
  detail::parallel_replications(opt.samples, opt.threads, [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t k = begin; k < end; ++k) {
      RngStream rng(opt.seed, k);
      for (std::size_t j = 0; j < prepared.size(); ++j) {
        const double lambda = detail::draw_frequency(prepared[j].frequency, rng);
        const auto sev = detail::draw_severity(prepared[j].severity, rng);
        profiles.record(j, k, lambda, sev);
        per_cell[j][k] = detail::compound_year(prepared[j], lambda, sev, rng);
      }
    }
  });
  return detail::finish(models, std::move(per_cell), opt, infinite_mean, std::move(profiles));
}

/**
 * Replications with risk profiles drawn jointly through a Gaussian copula:
 * correlated standard normals are mapped through Phi and each margin's
 * posterior quantile function. A `CopulaKind::independent` spec defers to
 * run_independent.
 */
inline CapitalResult run_copula(const std::vector<RiskCellModel>& models, const CopulaSpec& copula,
                                const SimulationOptions& opt) {
  if (copula.kind == CopulaKind::independent) return run_independent(models, opt);
  detail::validate_options(opt, models.size());
  const auto d = static_cast<Eigen::Index>(copula.coupling.size());
  if (d == 0) throw validation_error("copula: no coupled coordinates");
  if (copula.correlation.rows() != d || copula.correlation.cols() != d) {
    throw validation_error("copula: correlation is " + std::to_string(copula.correlation.rows()) + "x" +
                           std::to_string(copula.correlation.cols()) + " but " + std::to_string(d) +
                           " coordinates are coupled");
  }
  // slot[j][c] = copula dimension driving coordinate c of cell j, or -1
  std::vector<std::array<Eigen::Index, 2>> slot(models.size(), {-1, -1});
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto& c = copula.coupling[static_cast<std::size_t>(i)];
    if (c.cell >= models.size()) throw validation_error("copula: coupled cell index out of range");
    auto& s = slot[c.cell][c.coordinate == ProfileCoordinate::frequency ? 0 : 1];
    if (s != -1) throw validation_error("copula: coordinate coupled twice");
    s = i;
  }
  const Eigen::MatrixXd& r = copula.correlation;
  if (!r.allFinite()) throw validation_error("copula: correlation has non-finite entries");
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::abs(r(i, i) - 1.0) > 1e-12) throw validation_error("copula: correlation diagonal must be 1");
    for (Eigen::Index k = 0; k < i; ++k) {
      if (std::abs(r(i, k) - r(k, i)) > 1e-12) throw validation_error("copula: correlation must be symmetric");
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
  const double min_eigen = eig.eigenvalues().minCoeff();
  if (min_eigen < -1e-10) {
    throw validation_error("copula: correlation is not positive semidefinite (smallest eigenvalue " +
                           std::to_string(min_eigen) + ")");
  }
  // factor R = A A^T through the eigendecomposition so singular (comonotone) matrices work too
  const Eigen::MatrixXd factor =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  std::vector<RiskCellModel> prepared;
  std::vector<bool> infinite_mean;
  for (const auto& m : models) {
    bool inf = false;
    prepared.push_back(detail::prepare_cell(m, inf));
    infinite_mean.push_back(inf);
  }
  std::vector<std::vector<double>> per_cell(models.size(), std::vector<double>(opt.samples));
  detail::ProfileStore profiles(models.size(), opt);
  detail::parallel_replications(opt.samples, opt.threads, [&](std::uint64_t begin, std::uint64_t end) {
    Eigen::VectorXd eps(d);
    Eigen::VectorXd z(d);
    for (std::uint64_t k = begin; k < end; ++k) {
      RngStream rng(opt.seed, k);
      for (Eigen::Index i = 0; i < d; ++i) eps[i] = sample_std_normal(rng);
      z.noalias() = factor * eps;
      auto coupled_uniform = [&](Eigen::Index i) {
        return std::clamp(special::normal_cdf(z[i]), 1e-300, 1.0 - 1e-16);
      };
      for (std::size_t j = 0; j < prepared.size(); ++j) {
        const auto& m = prepared[j];
        const double lambda = (slot[j][0] >= 0) ? detail::frequency_from_uniform(m.frequency, coupled_uniform(slot[j][0]))
                                                : detail::draw_frequency(m.frequency, rng);
        const auto sev = (slot[j][1] >= 0) ? detail::severity_from_uniform(m.severity, coupled_uniform(slot[j][1]), rng)
                                           : detail::draw_severity(m.severity, rng);
        profiles.record(j, k, lambda, sev);
        per_cell[j][k] = detail::compound_year(m, lambda, sev, rng);
      }
    }
  });
  return detail::finish(models, std::move(per_cell), opt, infinite_mean, std::move(profiles));
}

} // namespace oprisk

#endif // OPRISK_CAPITAL_HPP
