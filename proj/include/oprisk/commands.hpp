#ifndef OPRISK_COMMANDS_HPP
#define OPRISK_COMMANDS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "capital.hpp"
#include "conjugate.hpp"
#include "elicitation.hpp"
#include "empirical_bayes.hpp"
#include "error.hpp"
#include "io.hpp"

namespace oprisk::cli {

using json = nlohmann::json;

enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_validation = 2,
  exit_nonconvergence = 3,
  exit_infeasible = 4,
};

/// Command-line values that override the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> samples;
  std::optional<double> quantile;
  std::optional<std::filesystem::path> out;
  std::optional<unsigned> threads;
  bool audit = false;
};

struct Context {
  std::filesystem::path base_dir; ///< relative data paths resolve against this
  Overrides overrides;
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

inline std::filesystem::path resolve(const Context& ctx, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : ctx.base_dir / path;
}

inline std::filesystem::path out_dir(const Context& ctx, const json& block) {
  if (ctx.overrides.out) return *ctx.overrides.out;
  if (block.contains("out")) return resolve(ctx, block.at("out").get<std::string>());
  return std::filesystem::current_path();
}

inline double number(const json& j, const char* key) {
  if (!j.contains(key)) throw validation_error(std::string("config: missing '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw validation_error(std::string("config: '") + key + "' must be a number");
  return v.get<double>();
}

inline std::optional<double> optional_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return number(j, key);
}

inline std::string text(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) throw validation_error(std::string("config: missing string '") + key + "'");
  return j.at(key).get<std::string>();
}

inline std::pair<double, double> interval(const json& j) {
  if (!j.contains("interval")) throw validation_error("config: missing 'interval'");
  const auto& v = j.at("interval");
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw validation_error("config: 'interval' must be [a, b]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

inline double probability(const json& j) { return optional_number(j, "probability").value_or(default_interval_probability); }

inline json rounded(double x) {
  if (!std::isfinite(x)) return io::format_number(x);
  return io::round12(x);
}

inline json rounded(const std::vector<double>& xs) {
  json a = json::array();
  for (const double x : xs) a.push_back(rounded(x));
  return a;
}

inline json gamma_json(const GammaParams& g) {
  json j{{"alpha", rounded(g.alpha)}, {"beta", rounded(g.beta)}};
  if (g.lower_trunc) j["lower_bound"] = rounded(*g.lower_trunc);
  return j;
}

inline GammaParams gamma_from(const json& j) {
  GammaParams g{number(j, "alpha"), number(j, "beta"), optional_number(j, "lower_bound")};
  if (g.lower_trunc && *g.lower_trunc == 0.0) g.lower_trunc.reset();
  validate(g);
  return g;
}

inline NormalParams normal_from(const json& j) {
  NormalParams n{number(j, "mu"), number(j, "sigma")};
  validate(n);
  return n;
}

inline void table_row(std::ostream& os, const std::string& key, const std::string& value) {
  os << std::left << std::setw(20) << key << value << '\n';
}

inline void table_row(std::ostream& os, const std::string& key, double value) {
  table_row(os, key, io::format_number(value));
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

template <class Params>
void report_residuals(std::ostream& os, const FitReport<Params>& r) {
  table_row(os, "max |residual|", r.max_abs_residual());
  table_row(os, "converged", r.converged ? "yes" : "no");
}

inline const json& block_of(const json& config, const char* name) {
  if (!config.is_object()) throw validation_error("config: top level must be an object");
  return config.contains(name) ? config.at(name) : config;
}

inline std::uint64_t seed_for(const Context& ctx, const json& block, const char* command) {
  if (ctx.overrides.seed) return *ctx.overrides.seed;
  if (block.contains("seed")) return block.at("seed").get<std::uint64_t>();
  const bool audit = ctx.overrides.audit || block.value("audit", false);
  if (audit) throw validation_error(std::string(command) + ": audit mode requires an explicit seed");
  ctx.err << "warning: " << command << ": no seed given, using 0\n";
  return 0;
}

inline EquationId equation_from(const std::string& s) {
  static const std::map<std::string, EquationId> ids{
      {"gamma_mean", EquationId::gamma_mean},
      {"gamma_interval", EquationId::gamma_interval},
      {"pareto_expected_loss_interval", EquationId::pareto_expected_loss_interval},
      {"pareto_quantile_interval", EquationId::pareto_quantile_interval},
      {"pareto_expected_loss", EquationId::pareto_expected_loss},
      {"pareto_expected_quantile", EquationId::pareto_expected_quantile},
      {"lognormal_mean", EquationId::lognormal_mean},
      {"lognormal_mean_interval", EquationId::lognormal_mean_interval},
      {"lognormal_quantile", EquationId::lognormal_quantile},
      {"lognormal_quantile_interval", EquationId::lognormal_quantile_interval},
  };
  const auto it = ids.find(s);
  if (it == ids.end()) throw validation_error("config: unknown equation '" + s + "'");
  return it->second;
}

inline std::vector<Constraint> constraints_from(const json& block) {
  if (!block.contains("constraints") || !block.at("constraints").is_array()) {
    throw validation_error("config: least_squares needs a 'constraints' array");
  }
  std::vector<Constraint> cs;
  for (const auto& c : block.at("constraints")) {
    Constraint k;
    k.id = equation_from(text(c, "equation"));
    k.target = number(c, "target");
    k.weight = optional_number(c, "weight").value_or(1.0);
    if (c.contains("interval")) std::tie(k.a, k.b) = interval(c);
    k.q = optional_number(c, "q").value_or(0.5);
    cs.push_back(k);
  }
  return cs;
}

} // namespace detail

// ---------------------------------------------------------------------------
// fit-prior
// ---------------------------------------------------------------------------

/**
 * Fit prior hyperparameters to an opinion block. Writes fit_prior.json to the
 * output directory and a table to `ctx.out`. A least-squares fit that cannot
 * meet every constraint to 1e-8 prints its residuals and returns exit code 4.
 */
inline int cmd_fit_prior(const json& config, const Context& ctx) {
  using namespace detail;
  const json& block = block_of(config, "fit_prior");
  const std::string family = text(block, "family");
  json result{{"family", family}};
  std::ostream& os = ctx.out;
  table_row(os, "family", family);
  bool exact = true;

  auto put_gamma = [&](const FitReport<GammaParams>& r) {
    result["params"] = gamma_json(r.params);
    result["residuals"] = rounded(r.residuals);
    result["iterations"] = r.iterations;
    result["converged"] = r.converged;
    table_row(os, "alpha", r.params.alpha);
    table_row(os, "beta", r.params.beta);
    if (r.params.lower_trunc) table_row(os, "lower bound B", *r.params.lower_trunc);
    report_residuals(os, r);
    exact = r.max_abs_residual() <= fit_tolerance;
  };
  auto put_normal = [&](const FitReport<NormalParams>& r, double sigma) {
    result["params"] = json{{"mu0", rounded(r.params.mu)}, {"sigma0", rounded(r.params.sigma)}, {"sigma", rounded(sigma)}};
    result["residuals"] = rounded(r.residuals);
    result["iterations"] = r.iterations;
    result["converged"] = r.converged;
    table_row(os, "mu0", r.params.mu);
    table_row(os, "sigma0", r.params.sigma);
    table_row(os, "sigma", sigma);
    report_residuals(os, r);
    exact = r.max_abs_residual() <= fit_tolerance;
  };

  if (family == "poisson_gamma") {
    const double mean = number(block, "mean");
    if (const auto vco = optional_number(block, "vco")) {
      const auto g = fit_poisson_gamma_vco(mean, *vco);
      result["params"] = gamma_json(g);
      result["converged"] = true;
      table_row(os, "alpha", g.alpha);
      table_row(os, "beta", g.beta);
    } else {
      const auto [a, b] = interval(block);
      put_gamma(fit_poisson_gamma(mean, a, b, probability(block)));
    }
  } else if (family == "lognormal") {
    double sigma = 0.0;
    if (block.contains("quantile_ratio")) {
      const auto& qr = block.at("quantile_ratio");
      sigma = sigma_from_quantile_ratio(number(qr, "q1"), number(qr, "q2"), number(qr, "ratio"));
    } else {
      sigma = number(block, "sigma");
    }
    const std::string functional = block.value("functional", std::string("mean"));
    const double expected = number(block, "expected");
    const auto vco = optional_number(block, "vco");
    if (functional == "mean") {
      if (vco) {
        const auto n = fit_lognormal_mu_prior_from_mean_vco(sigma, expected, *vco);
        put_normal(FitReport<NormalParams>{n, {}, 0, true}, sigma);
      } else {
        const auto [a, b] = interval(block);
        put_normal(fit_lognormal_mu_prior_from_mean(sigma, expected, a, b, probability(block)), sigma);
      }
    } else if (functional == "quantile") {
      const double q = number(block, "q");
      if (vco) {
        const auto n = fit_lognormal_mu_prior_from_quantile_vco(sigma, q, expected, *vco);
        put_normal(FitReport<NormalParams>{n, {}, 0, true}, sigma);
      } else {
        const auto [a, b] = interval(block);
        put_normal(fit_lognormal_mu_prior_from_quantile(sigma, q, expected, a, b, probability(block)), sigma);
      }
    } else {
      throw validation_error("config: lognormal functional must be 'mean' or 'quantile'");
    }
  } else if (family == "pareto_gamma") {
    const auto [a, b] = interval(block);
    put_gamma(fit_pareto_gamma(number(block, "lower_bound"), number(block, "mean"), a, b, probability(block)));
  } else if (family == "pareto_expected_loss_interval") {
    const auto [a, b] = interval(block);
    put_gamma(fit_pareto_gamma_from_mean_interval(number(block, "lower_bound"), number(block, "threshold"), a, b,
                                                  probability(block), optional_number(block, "companion_mean")));
  } else if (family == "pareto_quantile_interval") {
    const auto [a, b] = interval(block);
    put_gamma(fit_pareto_gamma_from_quantile_interval(number(block, "lower_bound"), number(block, "threshold"),
                                                      number(block, "q"), a, b, probability(block),
                                                      optional_number(block, "companion_mean")));
  } else if (family == "least_squares") {
    const std::string space = text(block, "space");
    if (space == "gamma") {
      const GammaPriorSpace s{optional_number(block, "lower_bound").value_or(0.0),
                              optional_number(block, "threshold").value_or(1.0)};
      put_gamma(fit_least_squares(s, constraints_from(block)));
    } else if (space == "normal") {
      const double sigma = number(block, "sigma");
      put_normal(fit_least_squares(NormalPriorSpace{sigma}, constraints_from(block)), sigma);
    } else {
      throw validation_error("config: least_squares space must be 'gamma' or 'normal'");
    }
  } else {
    throw validation_error("config: unknown fit_prior family '" + family + "'");
  }

  result["exact"] = exact;
  io::write_file(out_dir(ctx, block) / "fit_prior.json", dump(result));
  if (!exact) {
    ctx.err << "error: fit_prior: constraints are inconsistent; least-squares compromise reported above\n";
    return exit_infeasible;
  }
  return exit_ok;
}

// ---------------------------------------------------------------------------
// update
// ---------------------------------------------------------------------------

namespace detail {

template <class Series>
const Series& pick_series(const std::vector<Series>& all, const json& block, const char* what) {
  if (block.contains("series")) {
    const auto id = text(block, "series");
    for (const auto& s : all) {
      if constexpr (std::is_same_v<Series, BankSeries>) {
        if (s.bank_id == id) return s;
      } else {
        if (s.cell_id == id) return s;
      }
    }
    throw validation_error(std::string("update: series '") + id + "' not found in " + what);
  }
  if (all.size() != 1) {
    throw validation_error(std::string("update: ") + what + " holds " + std::to_string(all.size()) +
                           " series; choose one with 'series'");
  }
  return all.front();
}

} // namespace detail

/**
 * Posterior trajectory, one row per observation. Models:
 *   poisson_gamma: counts file; alpha_hat, beta_hat, posterior mean, sum N / sum V
 *   lognormal:     losses file, known sigma; mu0_hat, sigma0_hat in the alpha/beta columns,
 *                  posterior mean of mu, mean of ln X
 *   pareto:        losses file, threshold L; posterior (alpha, beta), (truncated) posterior
 *                  mean of xi, k / sum ln(X / L)
 * Rows follow the year order of the data (stable within a year).
 */
inline int cmd_update(const json& config, const Context& ctx) {
  using namespace detail;
  const json& block = block_of(config, "update");
  const std::string model = text(block, "model");
  const json& prior = block.at("prior");
  std::vector<io::TrajectoryRow> rows;

  if (model == "poisson_gamma") {
    if (!block.contains("counts")) throw validation_error("update: poisson_gamma model needs a 'counts' file");
    const auto ingest = io::ingest_counts(resolve(ctx, text(block, "counts")));
    for (const auto& w : ingest.warnings) ctx.err << "warning: " << w << '\n';
    if (ingest.panel.banks.empty()) throw validation_error("update: counts file has no data");
    auto records = pick_series(ingest.panel.banks, block, "counts file").records;
    std::stable_sort(records.begin(), records.end(), [](const auto& l, const auto& r) { return l.year < r.year; });
    GammaParams g = gamma_from(prior);
    if (g.truncated()) throw validation_error("update: poisson_gamma prior must be untruncated");
    double n_sum = 0.0, v_sum = 0.0;
    std::size_t step = 0;
    for (const auto& r : records) {
      g = bank_posterior(g, BankSeries{"", {r}});
      n_sum += static_cast<double>(r.count);
      v_sum += r.exposure;
      rows.push_back({++step, g.alpha, g.beta, g.alpha * g.beta, n_sum / v_sum});
    }
  } else if (model == "lognormal" || model == "pareto") {
    if (!block.contains("losses")) throw validation_error("update: " + model + " model needs a 'losses' file");
    std::optional<double> drop_below;
    const double threshold = (model == "pareto") ? number(block, "threshold") : 0.0;
    if (model == "pareto" && block.value("drop_below_threshold", false)) drop_below = threshold;
    const auto ingest = io::ingest_losses(resolve(ctx, text(block, "losses")), drop_below);
    for (const auto& w : ingest.warnings) ctx.err << "warning: " << w << '\n';
    if (ingest.cells.empty()) throw validation_error("update: losses file has no data");
    auto losses = pick_series(ingest.cells, block, "losses file").losses;
    std::stable_sort(losses.begin(), losses.end(), [](const auto& l, const auto& r) { return l.year < r.year; });

    std::size_t step = 0;
    if (model == "lognormal") {
      auto post = as_posterior(normal_from(prior), number(block, "sigma"));
      double y_sum = 0.0;
      for (const auto& r : losses) {
        const double y = std::log(r.amount);
        post = lognormal_mu_step(post, y);
        y_sum += y;
        ++step;
        rows.push_back({step, post.params.mu, post.params.sigma, post.params.mu, y_sum / static_cast<double>(step)});
      }
    } else {
      ParetoXiPosterior post{gamma_from(prior), threshold, 0};
      if (!(threshold > 0.0)) throw validation_error("update: threshold must be positive");
      double log_sum = 0.0;
      for (const auto& r : losses) {
        post = pareto_xi_step(post, r.amount);
        log_sum += std::log(r.amount / threshold);
        ++step;
        const double mle = log_sum > 0.0 ? static_cast<double>(step) / log_sum : std::numeric_limits<double>::infinity();
        rows.push_back({step, post.params.alpha, post.params.beta, truncated_posterior_mean(post), mle});
      }
      if (!post.params.truncated() && infinite_mean_warning(post)) {
        ctx.err << "warning: update: Pr[xi <= 1] = " << io::format_number(infinite_mean_probability(post))
                << " exceeds " << io::format_number(infinite_mean_warning_level) << "; predictive means are infinite\n";
      }
    }
  } else {
    throw validation_error("update: unknown model '" + model + "'");
  }

  std::ostringstream csv;
  io::emit_trajectory(csv, rows);
  io::write_file(out_dir(ctx, block) / "trajectory.csv", csv.str());
  table_row(ctx.out, "model", model);
  table_row(ctx.out, "steps", std::to_string(rows.size()));
  if (!rows.empty()) {
    table_row(ctx.out, "alpha_hat", rows.back().alpha_hat);
    table_row(ctx.out, "beta_hat", rows.back().beta_hat);
    table_row(ctx.out, "bayes_estimate", rows.back().bayes_estimate);
    table_row(ctx.out, "mle_estimate", rows.back().mle_estimate);
  }
  return exit_ok;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

/// Empirical-Bayes hyperparameters from a multi-bank panel, MLE and moments side by side (calibrate.json).
inline int cmd_calibrate(const json& config, const Context& ctx) {
  using namespace detail;
  const json& block = block_of(config, "calibrate");
  auto ingest = io::ingest_counts(resolve(ctx, text(block, "counts")));
  for (const auto& w : ingest.warnings) ctx.err << "warning: " << w << '\n';
  ingest.panel.prescaled = block.value("prescaled", false);
  const std::string form = block.value("mom_form", std::string("unbiased"));
  MomVarianceForm mom_form;
  if (form == "unbiased") {
    mom_form = MomVarianceForm::unbiased;
  } else if (form == "main_text") {
    mom_form = MomVarianceForm::main_text;
  } else {
    throw validation_error("calibrate: mom_form must be 'unbiased' or 'main_text'");
  }
  const bool audit = ctx.overrides.audit || block.value("audit", false);
  std::optional<std::uint64_t> seed = ctx.overrides.seed;
  if (!seed && block.contains("seed")) seed = block.at("seed").get<std::uint64_t>();
  if (!seed && audit) throw validation_error("calibrate: audit mode requires an explicit seed");

  auto describe = [&](const HyperEstimate& e, const char* name) {
    json j{{"lambda0", rounded(e.lambda0)},
           {"sigma0_sq", rounded(e.sigma0_sq)},
           {"homogeneous", e.homogeneous},
           {"boundary", e.boundary}};
    j["alpha"] = e.alpha ? rounded(*e.alpha) : json(nullptr);
    j["beta"] = e.beta ? rounded(*e.beta) : json(nullptr);
    if (e.loglik) j["loglik"] = rounded(*e.loglik);
    if (e.method == HyperMethod::mom) j["sigma0_sq_unclamped"] = rounded(e.sigma0_sq_unclamped);
    const std::string p(name);
    table_row(ctx.out, p + " alpha", e.alpha ? io::format_number(*e.alpha) : "undefined");
    table_row(ctx.out, p + " beta", e.beta ? io::format_number(*e.beta) : "undefined");
    table_row(ctx.out, p + " lambda0", e.lambda0);
    table_row(ctx.out, p + " sigma0^2", e.sigma0_sq);
    if (e.homogeneous) table_row(ctx.out, p + " note", e.boundary ? "boundary solution" : "homogeneous portfolio");
    return j;
  };

  json result{{"banks", ingest.panel.banks.size()}, {"mom_form", form}};
  if (seed) result["seed"] = *seed;
  table_row(ctx.out, "banks", std::to_string(ingest.panel.banks.size()));
  if (!ingest.panel.prescaled) {
    result["mle"] = describe(fit_mle(ingest.panel), "mle");
  } else {
    result["mle"] = nullptr;
  }
  result["mom"] = describe(fit_mom(ingest.panel, mom_form), "mom");
  io::write_file(out_dir(ctx, block) / "calibrate.json", dump(result));
  return exit_ok;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

namespace detail {

inline FrequencyProfile frequency_from(const json& j) {
  if (j.contains("point")) return PointMass{number(j, "point")};
  if (j.contains("gamma")) return gamma_from(j.at("gamma"));
  throw validation_error("config: frequency needs 'gamma' or 'point'");
}

inline SeverityModel severity_from(const json& j) {
  const std::string family = text(j, "family");
  if (family == "lognormal") {
    LogNormalSeverity s;
    s.sigma = number(j, "sigma");
    const json& mu = j.at("mu");
    if (mu.contains("point")) {
      s.mu = PointMass{number(mu, "point")};
    } else if (mu.contains("normal")) {
      s.mu = normal_from(mu.at("normal"));
    } else {
      throw validation_error("config: lognormal 'mu' needs 'normal' or 'point'");
    }
    return s;
  }
  if (family == "lognormal_joint") {
    return LogNormalJointSeverity{{number(j, "nu"), number(j, "beta"), number(j, "theta"), number(j, "phi")}};
  }
  if (family == "pareto") {
    ParetoSeverity s;
    s.threshold = number(j, "threshold");
    const json& xi = j.at("xi");
    if (xi.contains("point")) {
      s.xi = PointMass{number(xi, "point")};
    } else if (xi.contains("gamma")) {
      s.xi = gamma_from(xi.at("gamma"));
    } else {
      throw validation_error("config: pareto 'xi' needs 'gamma' or 'point'");
    }
    return s;
  }
  throw validation_error("config: unknown severity family '" + family + "'");
}

inline std::vector<RiskCellModel> cells_from(const json& block) {
  if (!block.contains("cells") || !block.at("cells").is_array() || block.at("cells").empty()) {
    throw validation_error("simulate: need a non-empty 'cells' array");
  }
  std::vector<RiskCellModel> cells;
  for (const auto& c : block.at("cells")) {
    RiskCellModel m;
    m.cell_id = text(c, "id");
    for (const auto& other : cells) {
      if (other.cell_id == m.cell_id) throw validation_error("simulate: duplicate cell id '" + m.cell_id + "'");
    }
    m.exposure = optional_number(c, "exposure").value_or(1.0);
    m.frequency = frequency_from(c.at("frequency"));
    m.severity = severity_from(c.at("severity"));
    if (const auto floor = optional_number(c, "variance_floor")) m.variance_floor = FloorSpec{*floor};
    m.acknowledge_infinite_mean = c.value("acknowledge_infinite_mean", false);
    cells.push_back(std::move(m));
  }
  return cells;
}

inline CopulaSpec copula_from(const json& block, const std::vector<RiskCellModel>& cells) {
  CopulaSpec spec;
  if (!block.contains("copula")) return spec;
  const json& c = block.at("copula");
  const std::string kind = c.value("kind", std::string("independent"));
  if (kind == "independent") return spec;
  if (kind != "gaussian") throw validation_error("simulate: copula kind must be 'independent' or 'gaussian'");
  spec.kind = CopulaKind::gaussian;
  for (const auto& k : c.at("coupling")) {
    const std::string id = text(k, "cell");
    const auto it = std::find_if(cells.begin(), cells.end(), [&](const auto& m) { return m.cell_id == id; });
    if (it == cells.end()) throw validation_error("simulate: copula refers to unknown cell '" + id + "'");
    const std::string coord = text(k, "coordinate");
    if (coord != "frequency" && coord != "severity") {
      throw validation_error("simulate: coupling coordinate must be 'frequency' or 'severity'");
    }
    spec.coupling.push_back({static_cast<std::size_t>(it - cells.begin()),
                             coord == "frequency" ? ProfileCoordinate::frequency : ProfileCoordinate::severity});
  }
  const json& m = c.at("correlation");
  const auto n = static_cast<Eigen::Index>(m.size());
  spec.correlation.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = m.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw validation_error("simulate: correlation must be a square matrix");
    }
    for (Eigen::Index k = 0; k < n; ++k) spec.correlation(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return spec;
}

inline double sample_mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (const double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

} // namespace detail

/**
 * Monte Carlo capital. Writes summary.json, cell_samples.csv
 * (`replication,<cell ids>`) and total_samples.csv (`replication,total`).
 * Output depends only on the config, the seed and K, not on --threads.
 */
inline int cmd_simulate(const json& config, const Context& ctx) {
  using namespace detail;
  const json& block = block_of(config, "simulate");
  SimulationOptions opt;
  opt.seed = seed_for(ctx, block, "simulate");
  opt.samples = ctx.overrides.samples.value_or(block.value("samples", std::uint64_t{100000}));
  opt.quantile = ctx.overrides.quantile.value_or(block.value("quantile", 0.999));
  opt.threads = ctx.overrides.threads.value_or(block.value("threads", 0u));
  opt.interpolate = block.value("interpolate", false);

  const auto cells = cells_from(block);
  const auto copula = copula_from(block, cells);
  const auto result = run_copula(cells, copula, opt);

  json summary{{"seed", result.seed},
               {"samples", result.samples},
               {"quantile", rounded(result.quantile_level)},
               {"copula", copula.kind == CopulaKind::gaussian ? "gaussian" : "independent"},
               {"quantile_estimator", opt.interpolate ? "interpolated" : "order_statistic"}};
  json cell_json = json::array();
  for (std::size_t j = 0; j < cells.size(); ++j) {
    cell_json.push_back({{"id", result.cell_ids[j]},
                         {"quantile", rounded(result.per_cell_quantile[j])},
                         {"mean", rounded(sample_mean(result.per_cell_samples[j]))}});
  }
  summary["cells"] = cell_json;
  summary["total_quantile"] = rounded(result.total_quantile);
  summary["total_mean"] = rounded(sample_mean(result.total_samples));
  summary["sum_of_quantiles"] = rounded(result.sum_of_quantiles);
  summary["diagnostics"] = result.diagnostics;

  const auto dir = out_dir(ctx, block);
  std::string cell_csv = "replication";
  for (const auto& id : result.cell_ids) cell_csv += "," + id;
  cell_csv += "\n";
  std::string total_csv = "replication,total\n";
  for (std::uint64_t k = 0; k < result.samples; ++k) {
    const auto idx = std::to_string(k + 1);
    cell_csv += idx;
    for (const auto& s : result.per_cell_samples) cell_csv += "," + io::format_number(s[k]);
    cell_csv += "\n";
    total_csv += idx + "," + io::format_number(result.total_samples[k]) + "\n";
  }
  io::write_file(dir / "summary.json", dump(summary));
  io::write_file(dir / "cell_samples.csv", cell_csv);
  io::write_file(dir / "total_samples.csv", total_csv);

  for (std::size_t j = 0; j < cells.size(); ++j) {
    table_row(ctx.out, "q(" + result.cell_ids[j] + ")", result.per_cell_quantile[j]);
  }
  table_row(ctx.out, "q(total)", result.total_quantile);
  table_row(ctx.out, "sum of quantiles", result.sum_of_quantiles);
  for (const auto& d : result.diagnostics) ctx.err << "note: " << d << '\n';
  return exit_ok;
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

/// Load `config_path`, run `command` and map library errors to the exit-code contract.
inline int run_command(const std::string& command, const std::filesystem::path& config_path, const Overrides& overrides,
                       std::ostream& out, std::ostream& err) {
  try {
    if (overrides.quantile && !(*overrides.quantile > 0.0 && *overrides.quantile < 1.0)) {
      throw validation_error("--quantile must lie in (0, 1)");
    }
    if (overrides.samples && *overrides.samples == 0) throw validation_error("--samples must be at least 1");
    std::ifstream in(config_path);
    if (!in) throw validation_error("cannot open config '" + config_path.string() + "'");
    json config;
    try {
      config = json::parse(in);
    } catch (const json::parse_error& e) {
      throw validation_error("config '" + config_path.string() + "': " + e.what());
    }
    const Context ctx{config_path.has_parent_path() ? config_path.parent_path() : std::filesystem::path("."),
                      overrides, out, err};
    if (command == "fit-prior") return cmd_fit_prior(config, ctx);
    if (command == "update") return cmd_update(config, ctx);
    if (command == "calibrate") return cmd_calibrate(config, ctx);
    if (command == "simulate") return cmd_simulate(config, ctx);
    throw validation_error("unknown command '" + command + "'");
  } catch (const validation_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_validation;
  } catch (const json::exception& e) {
    err << "error: config: " << e.what() << '\n';
    return exit_validation;
  } catch (const infeasible_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_infeasible;
  } catch (const convergence_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_nonconvergence;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_validation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_failure;
  }
}

} // namespace oprisk::cli

#endif // OPRISK_COMMANDS_HPP
