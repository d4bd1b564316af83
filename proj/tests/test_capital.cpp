#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include <oprisk/capital.hpp>

using namespace oprisk;

namespace {

RiskCellModel fixed_cell(const std::string& id, double lambda, double mu, double sigma) {
  RiskCellModel m;
  m.cell_id = id;
  m.frequency = PointMass{lambda};
  m.severity = LogNormalSeverity{PointMass{mu}, sigma};
  return m;
}

RiskCellModel uncertain_cell(const std::string& id) {
  RiskCellModel m;
  m.cell_id = id;
  m.frequency = GammaParams{3.407, 0.147, std::nullopt};
  m.severity = LogNormalSeverity{NormalParams{0.28, 0.21}, 1.0};
  return m;
}

double mean_of(const std::vector<double>& x) {
  double m = 0.0;
  for (const double v : x) m += v / static_cast<double>(x.size());
  return m;
}

// Sample variance and the standard error of that estimate.
std::pair<double, double> variance_with_se(const std::vector<double>& x) {
  const double m = mean_of(x);
  const auto n = static_cast<double>(x.size());
  double m2 = 0.0, m4 = 0.0;
  for (const double v : x) {
    const double d = (v - m) * (v - m);
    m2 += d / n;
    m4 += d * d / n;
  }
  return {m2, std::sqrt((m4 - m2 * m2) / n)};
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

template <class Cdf>
double ks_one_sample(std::vector<double> x, Cdf cdf) {
  std::sort(x.begin(), x.end());
  const auto n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return d;
}

// Percentile bootstrap interval of the empirical quantile.
std::pair<double, double> bootstrap_quantile_ci(const std::vector<double>& x, double q, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  std::vector<double> stats, resample(x.size());
  for (int b = 0; b < 200; ++b) {
    for (auto& v : resample) v = x[pick(eng)];
    stats.push_back(empirical_quantile(resample, q));
  }
  std::sort(stats.begin(), stats.end());
  return {stats[4], stats[195]};
}

SimulationOptions options(std::uint64_t k, std::uint64_t seed, unsigned threads = 1) {
  SimulationOptions o;
  o.samples = k;
  o.seed = seed;
  o.threads = threads;
  return o;
}

} // namespace

// ---------------------------------------------------------------------------
// Quantiles
// ---------------------------------------------------------------------------

TEST(EmpiricalQuantile, OrderStatisticRule) {
  EXPECT_EQ(empirical_quantile(std::vector<double>(37, 2.5), 0.999), 2.5);
  std::vector<double> x;
  for (int i = 1000; i >= 1; --i) x.push_back(i);
  EXPECT_EQ(empirical_quantile(x, 0.999), 999.0);
  EXPECT_EQ(empirical_quantile(x, 0.5), 500.0);
  EXPECT_EQ(empirical_quantile(x, 0.9995), 1000.0);
  EXPECT_EQ(empirical_quantile(x, 1e-6), 1.0);
  EXPECT_EQ(empirical_quantile({7.0}, 0.999), 7.0);
}

TEST(EmpiricalQuantile, InterpolatedVariant) {
  std::vector<double> x;
  for (int i = 1; i <= 1000; ++i) x.push_back(i);
  EXPECT_NEAR(empirical_quantile(x, 0.999, true), 1.0 + 0.999 * 999.0, 1e-9);
  EXPECT_EQ(empirical_quantile({1.0, 3.0}, 0.5, true), 2.0);
}

TEST(EmpiricalQuantile, UnitExponential) {
  RngStream rng(3, 0);
  std::vector<double> x(1000000);
  for (auto& v : x) v = -std::log(rng.uniform());
  EXPECT_NEAR(empirical_quantile(x, 0.999), std::log(1000.0), 0.15);
}

TEST(EmpiricalQuantile, Errors) {
  EXPECT_THROW(empirical_quantile({}, 0.5), validation_error);
  EXPECT_THROW(empirical_quantile({1.0}, 0.0), validation_error);
  EXPECT_THROW(empirical_quantile({1.0}, 1.0), validation_error);
}

// ---------------------------------------------------------------------------
// Variance floor
// ---------------------------------------------------------------------------

TEST(VarianceFloor, InactiveAboveTheFloor) {
  const GammaParams g{100.0, 0.004, std::nullopt}; // Vco 0.10
  const auto out = apply_variance_floor(g, FloorSpec{0.05});
  EXPECT_EQ(out.alpha, g.alpha);
  EXPECT_EQ(out.beta, g.beta);
  const NormalParams n{2.0, 0.2};
  EXPECT_EQ(apply_variance_floor(n, FloorSpec{0.05}).sigma, 0.2);
}

TEST(VarianceFloor, RaisesGammaSpreadAtFixedMean) {
  const auto at = apply_variance_floor(GammaParams{400.0, 0.001, std::nullopt}, FloorSpec{0.05});
  EXPECT_NEAR(1.0 / std::sqrt(at.alpha), 0.05, 1e-15);
  EXPECT_NEAR(at.alpha * at.beta, 0.4, 1e-15);

  const auto tight = apply_variance_floor(GammaParams{1e4, 4e-5, 3.0}, FloorSpec{0.05});
  EXPECT_NEAR(tight.alpha, 400.0, 1e-9);
  EXPECT_NEAR(tight.alpha * tight.beta, 0.4, 1e-15);
  EXPECT_EQ(tight.lower_trunc, 3.0);
}

TEST(VarianceFloor, PreservesMeanOnRandomCases) {
  RngStream rng(11, 0);
  for (int i = 0; i < 20; ++i) {
    const GammaParams g{500.0 + 1e5 * rng.uniform(), 1e-4 + rng.uniform(), std::nullopt};
    const auto out = apply_variance_floor(g, FloorSpec{0.01 + 0.1 * rng.uniform()});
    EXPECT_NEAR(out.alpha * out.beta, g.alpha * g.beta, 1e-12 * g.alpha * g.beta);

    const NormalParams n{(rng.uniform() - 0.5) * 10.0, 1e-3 * rng.uniform()};
    const auto nout = apply_variance_floor(n, FloorSpec{0.05});
    EXPECT_EQ(nout.mu, n.mu);
    EXPECT_NEAR(nout.sigma, 0.05 * std::abs(n.mu), 1e-15);
  }
}

TEST(VarianceFloor, Errors) {
  EXPECT_THROW(apply_variance_floor(GammaParams{1.0, 1.0, std::nullopt}, FloorSpec{0.0}), validation_error);
  EXPECT_THROW(apply_variance_floor(NormalParams{1.0, 1.0}, FloorSpec{-0.1}), validation_error);
  EXPECT_THROW(apply_variance_floor(NormalParams{0.0, 1.0}, FloorSpec{0.05}), validation_error);
}

TEST(VarianceFloor, AppliedToCellProfiles) {
  RiskCellModel m;
  m.cell_id = "floored";
  m.frequency = GammaParams{1e6, 1e-6, std::nullopt};
  m.severity = LogNormalSeverity{PointMass{0.0}, 0.0};
  m.variance_floor = FloorSpec{0.05};
  auto opt = options(20000, 5);
  opt.keep_profiles = true;
  const auto r = run_independent({m}, opt);
  const auto [var, se] = variance_with_se(r.per_cell_lambda[0]);
  EXPECT_NEAR(var, 0.05 * 0.05, 4 * se);
}

// ---------------------------------------------------------------------------
// One cell-year
// ---------------------------------------------------------------------------

TEST(SimulateCellYear, ZeroFrequencyGivesNoLoss) {
  RngStream rng(1, 0);
  const auto m = fixed_cell("z", 0.0, 3.0, 2.0);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(simulate_cell_year(m, rng), 0.0);
}

TEST(SimulateCellYear, UnitSeveritiesGivePoissonCounts) {
  const double lambda = 2.5;
  const auto m = fixed_cell("p", lambda, 0.0, 0.0);
  RngStream rng(2, 0);
  const int n = 1000000;
  std::map<long, double> freq;
  for (int i = 0; i < n; ++i) {
    const double z = simulate_cell_year(m, rng);
    ASSERT_EQ(z, std::round(z));
    freq[static_cast<long>(z)] += 1.0 / n;
  }
  double tv = 0.0, covered = 0.0, pk = std::exp(-lambda);
  for (long k = 0; k < 60; ++k) {
    tv += std::abs(pk - freq[k]);
    covered += pk;
    pk *= lambda / static_cast<double>(k + 1);
  }
  tv += 1.0 - covered;
  EXPECT_LT(0.5 * tv, 0.005);
}

TEST(SimulateCellYear, MeanFollowsTowerProperty) {
  auto m = uncertain_cell("tower");
  m.severity = LogNormalSeverity{NormalParams{0.28, 0.21}, 0.5};
  m.exposure = 1.5;
  RngStream rng(4, 0);
  const int n = 1000000;
  std::vector<double> z(n);
  for (auto& v : z) v = simulate_cell_year(m, rng);
  const double expected = 3.407 * 0.147 * 1.5 * std::exp(0.28 + 0.5 * 0.21 * 0.21 + 0.5 * 0.25);
  const double se = std::sqrt(variance_with_se(z).first / n);
  EXPECT_NEAR(mean_of(z), expected, 3 * se);
}

TEST(SimulateCellYear, ParetoWithInfiniteMeanNeedsAcknowledgement) {
  RiskCellModel m;
  m.cell_id = "tail";
  m.frequency = PointMass{1.0};
  m.severity = ParetoSeverity{GammaParams{23.086, 0.217, std::nullopt}, 1.0};
  RngStream rng(5, 0);
  try {
    simulate_cell_year(m, rng);
    FAIL() << "expected a validation error";
  } catch (const validation_error& e) {
    EXPECT_NE(std::string(e.what()).find("tail"), std::string::npos);
  }
  m.severity = ParetoSeverity{PointMass{0.8}, 1.0};
  EXPECT_THROW(simulate_cell_year(m, rng), validation_error);

  m.acknowledge_infinite_mean = true;
  const auto r = run_independent({m}, options(100, 5));
  ASSERT_EQ(r.diagnostics.size(), 1u);

  m.acknowledge_infinite_mean = false;
  m.severity = ParetoSeverity{GammaParams{23.086, 0.217, 2.0}, 1.0};
  EXPECT_TRUE(run_independent({m}, options(100, 5)).diagnostics.empty());
}

TEST(SimulateCellYear, InvalidCells) {
  RngStream rng(6, 0);
  auto m = fixed_cell("bad", 1.0, 0.0, 1.0);
  m.exposure = 0.0;
  EXPECT_THROW(simulate_cell_year(m, rng), validation_error);
  m = fixed_cell("bad", -1.0, 0.0, 1.0);
  EXPECT_THROW(simulate_cell_year(m, rng), validation_error);
  m = fixed_cell("bad", 1.0, 0.0, -1.0);
  EXPECT_THROW(simulate_cell_year(m, rng), validation_error);
  m.severity = ParetoSeverity{PointMass{2.0}, 0.0};
  EXPECT_THROW(simulate_cell_year(m, rng), validation_error);
}

// ---------------------------------------------------------------------------
// Independent engine
// ---------------------------------------------------------------------------

TEST(RunIndependent, SingleCellTotalsAreTheCellSamples) {
  const auto r = run_independent({uncertain_cell("a")}, options(5000, 9));
  EXPECT_EQ(r.total_samples, r.per_cell_samples[0]);
  EXPECT_EQ(r.total_quantile, r.per_cell_quantile[0]);
  EXPECT_EQ(r.sum_of_quantiles, r.total_quantile);
  EXPECT_EQ(r.samples, 5000u);
  EXPECT_EQ(r.seed, 9u);
  EXPECT_TRUE(r.per_cell_lambda.empty());
}

TEST(RunIndependent, TotalIsTheSumOfCells) {
  const auto r = run_independent({uncertain_cell("a"), fixed_cell("b", 1.0, 0.0, 1.0)}, options(2000, 9));
  for (std::size_t k = 0; k < 2000; ++k) {
    EXPECT_EQ(r.total_samples[k], r.per_cell_samples[0][k] + r.per_cell_samples[1][k]);
  }
  EXPECT_EQ(r.sum_of_quantiles, r.per_cell_quantile[0] + r.per_cell_quantile[1]);
}

TEST(RunIndependent, VariancesOfIndependentCellsAdd) {
  // Compound Poisson variance lambda E[X^2] with E[X^2] = exp(2 mu + 2 sigma^2).
  const auto r = run_independent({fixed_cell("a", 2.0, 0.0, 0.5), fixed_cell("b", 0.7, 0.3, 0.3)}, options(200000, 13));
  const double v1 = 2.0 * std::exp(0.5), v2 = 0.7 * std::exp(0.6 + 0.18);
  const auto [vt, se] = variance_with_se(r.total_samples);
  EXPECT_NEAR(vt, v1 + v2, 4 * se);
}

TEST(RunIndependent, PointMassesGiveTheClassicalCompoundModel) {
  // Direct compound-Poisson simulator on an unrelated generator.
  const double lambda = 3.0, mu = 0.5, sigma = 0.8;
  const int k = 100000;
  std::mt19937_64 eng(2024);
  std::poisson_distribution<int> counts(lambda);
  std::lognormal_distribution<double> sev(mu, sigma);
  std::vector<double> direct(k);
  for (auto& z : direct) {
    const int n = counts(eng);
    z = 0.0;
    for (int i = 0; i < n; ++i) z += sev(eng);
  }
  const auto r = run_independent({fixed_cell("c", lambda, mu, sigma)}, options(k, 17));
  EXPECT_LT(ks_two_sample(r.total_samples, direct), 1.358 * std::sqrt(2.0 / k));
}

TEST(RunIndependent, ThreadCountDoesNotChangeSamples) {
  const std::vector<RiskCellModel> cells{uncertain_cell("a"), fixed_cell("b", 4.0, 1.0, 2.0)};
  const auto one = run_independent(cells, options(3001, 21, 1));
  for (const unsigned t : {2u, 3u, 8u}) {
    const auto many = run_independent(cells, options(3001, 21, t));
    EXPECT_EQ(one.per_cell_samples, many.per_cell_samples) << t;
    EXPECT_EQ(one.total_samples, many.total_samples) << t;
    EXPECT_EQ(one.total_quantile, many.total_quantile) << t;
  }
  const auto other_seed = run_independent(cells, options(3001, 22, 1));
  EXPECT_NE(one.total_samples, other_seed.total_samples);
}

TEST(RunIndependent, SumOfQuantilesIsConservative) {
  const std::vector<RiskCellModel> cells{uncertain_cell("a"), uncertain_cell("b"), fixed_cell("c", 1.0, 0.5, 1.2)};
  int conservative = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = run_independent(cells, options(20000, 100 + seed));
    const auto [lo, hi] = bootstrap_quantile_ci(r.total_samples, 0.999, seed);
    if (r.sum_of_quantiles >= lo) ++conservative;
  }
  EXPECT_EQ(conservative, 20);
}

TEST(RunIndependent, HigherFrequencyMeanRaisesTotalMean) {
  auto low = uncertain_cell("a");
  auto high = low;
  high.frequency = GammaParams{4.0, 0.147, std::nullopt};
  const auto rl = run_independent({low}, options(100000, 31));
  const auto rh = run_independent({high}, options(100000, 31));
  EXPECT_GT(mean_of(rh.total_samples), mean_of(rl.total_samples));
}

TEST(RunIndependent, QuantileStableAcrossSampleSizes) {
  const std::vector<RiskCellModel> cells{uncertain_cell("a")};
  const auto small = run_independent(cells, options(50000, 41));
  const auto large = run_independent(cells, options(200000, 42));
  const auto [lo, hi] = bootstrap_quantile_ci(small.total_samples, 0.999, 41);
  EXPECT_GE(large.total_quantile, lo);
  EXPECT_LE(large.total_quantile, hi);
}

TEST(RunIndependent, OptionErrors) {
  EXPECT_THROW(run_independent({}, options(10, 0)), validation_error);
  EXPECT_THROW(run_independent({uncertain_cell("a")}, options(0, 0)), validation_error);
  auto bad_q = options(10, 0);
  bad_q.quantile = 1.0;
  EXPECT_THROW(run_independent({uncertain_cell("a")}, bad_q), validation_error);
}

TEST(RunIndependent, KeptProfilesFollowThePosteriors) {
  auto m = uncertain_cell("a");
  m.severity = ParetoSeverity{GammaParams{23.086, 0.217, 2.0}, 1.0};
  auto opt = options(20000, 51);
  opt.keep_profiles = true;
  const auto r = run_independent({m}, opt);
  const GammaParams freq{3.407, 0.147, std::nullopt};
  const GammaParams xi{23.086, 0.217, 2.0};
  const double crit = 1.358 / std::sqrt(20000.0);
  EXPECT_LT(ks_one_sample(r.per_cell_lambda[0], [&](double x) { return gamma_cdf(x, freq); }), crit);
  EXPECT_LT(ks_one_sample(r.per_cell_severity[0], [&](double x) { return gamma_cdf(x, xi); }), crit);
}

// ---------------------------------------------------------------------------
// Copula engine
// ---------------------------------------------------------------------------

namespace {

CopulaSpec gaussian(std::initializer_list<std::initializer_list<double>> rows, std::vector<CoupledCoordinate> coupling) {
  CopulaSpec c;
  c.kind = CopulaKind::gaussian;
  const auto d = static_cast<Eigen::Index>(rows.size());
  c.correlation.resize(d, d);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (const double v : row) c.correlation(i, j++) = v;
    ++i;
  }
  c.coupling = std::move(coupling);
  return c;
}

const CoupledCoordinate freq0{0, ProfileCoordinate::frequency};
const CoupledCoordinate freq1{1, ProfileCoordinate::frequency};
const CoupledCoordinate sev0{0, ProfileCoordinate::severity};
const CoupledCoordinate sev1{1, ProfileCoordinate::severity};

} // namespace

TEST(RunCopula, RejectsInvalidCorrelation) {
  const std::vector<RiskCellModel> cells{uncertain_cell("a"), uncertain_cell("b")};
  const auto opt = options(10, 0);
  try {
    run_copula(cells, gaussian({{1, 0.9, 0.9}, {0.9, 1, -0.9}, {0.9, -0.9, 1}}, {freq0, freq1, sev0}), opt);
    FAIL() << "expected a validation error";
  } catch (const validation_error& e) {
    EXPECT_NE(std::string(e.what()).find("smallest eigenvalue -"), std::string::npos) << e.what();
  }
  EXPECT_THROW(run_copula(cells, gaussian({{1, 0.5}, {0.5, 1}}, {freq0}), opt), validation_error);
  EXPECT_THROW(run_copula(cells, gaussian({{1, 0.5}, {0.4, 1}}, {freq0, freq1}), opt), validation_error);
  EXPECT_THROW(run_copula(cells, gaussian({{2, 0.5}, {0.5, 1}}, {freq0, freq1}), opt), validation_error);
  EXPECT_THROW(run_copula(cells, gaussian({{1, 0.5}, {0.5, 1}}, {freq0, freq0}), opt), validation_error);
  EXPECT_THROW(run_copula(cells, gaussian({{1, 0.5}, {0.5, 1}}, {freq0, {2, ProfileCoordinate::frequency}}), opt),
               validation_error);
  EXPECT_THROW(run_copula(cells, gaussian({}, {}), opt), validation_error);
}

TEST(RunCopula, MarginsAreThePosteriors) {
  auto a = uncertain_cell("a");
  auto b = uncertain_cell("b");
  b.frequency = GammaParams{0.7, 2.0, std::nullopt};
  b.severity = ParetoSeverity{GammaParams{23.086, 0.217, 2.0}, 1.0};
  auto opt = options(20000, 61);
  opt.keep_profiles = true;
  const auto r = run_copula({a, b},
                            gaussian({{1, 0.8, -0.3, 0.5}, {0.8, 1, 0.2, 0.4}, {-0.3, 0.2, 1, 0.1}, {0.5, 0.4, 0.1, 1}},
                                     {freq0, freq1, sev0, sev1}),
                            opt);
  // four margins tested together: Bonferroni-corrected 5% critical value
  const double crit = 1.593 / std::sqrt(20000.0);
  const GammaParams fa{3.407, 0.147, std::nullopt}, fb{0.7, 2.0, std::nullopt}, xi{23.086, 0.217, 2.0};
  const NormalParams mu{0.28, 0.21};
  EXPECT_LT(ks_one_sample(r.per_cell_lambda[0], [&](double x) { return gamma_cdf(x, fa); }), crit);
  EXPECT_LT(ks_one_sample(r.per_cell_lambda[1], [&](double x) { return gamma_cdf(x, fb); }), crit);
  EXPECT_LT(ks_one_sample(r.per_cell_severity[0], [&](double x) { return normal_cdf(x, mu); }), crit);
  EXPECT_LT(ks_one_sample(r.per_cell_severity[1], [&](double x) { return gamma_cdf(x, xi); }), crit);

  // and the frequencies really are dependent
  const auto& la = r.per_cell_lambda[0];
  const auto& lb = r.per_cell_lambda[1];
  const double ma = mean_of(la), mb = mean_of(lb);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t k = 0; k < la.size(); ++k) {
    cov += (la[k] - ma) * (lb[k] - mb);
    va += (la[k] - ma) * (la[k] - ma);
    vb += (lb[k] - mb) * (lb[k] - mb);
  }
  EXPECT_GT(cov / std::sqrt(va * vb), 0.5);
}

TEST(RunCopula, IdentityCorrelationMatchesIndependentRun) {
  const std::vector<RiskCellModel> cells{uncertain_cell("a"), uncertain_cell("b")};
  const auto ind = run_independent(cells, options(50000, 71));
  const auto cop = run_copula(cells, gaussian({{1, 0}, {0, 1}}, {freq0, freq1}), options(50000, 72));
  for (std::size_t j = 0; j < 2; ++j) {
    const auto [lo_i, hi_i] = bootstrap_quantile_ci(ind.per_cell_samples[j], 0.999, 1);
    const auto [lo_c, hi_c] = bootstrap_quantile_ci(cop.per_cell_samples[j], 0.999, 2);
    EXPECT_TRUE(lo_i <= hi_c && lo_c <= hi_i) << j;
  }
}

TEST(RunCopula, IndependentKindDefersToIndependentEngine) {
  const std::vector<RiskCellModel> cells{uncertain_cell("a")};
  EXPECT_EQ(run_copula(cells, CopulaSpec{}, options(500, 3)).total_samples,
            run_independent(cells, options(500, 3)).total_samples);
}

TEST(RunCopula, ComonotoneIdenticalCellsAddQuantiles) {
  // Large exposure so parameter uncertainty dominates process noise; both profiles comonotone.
  RiskCellModel m;
  m.cell_id = "big";
  m.frequency = GammaParams{4.0, 0.25, std::nullopt};
  m.exposure = 500.0;
  m.severity = LogNormalSeverity{NormalParams{0.0, 0.3}, 0.1};
  auto b = m;
  b.cell_id = "big2";
  const auto r = run_copula({m, b},
                            gaussian({{1, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 1}, {0, 0, 1, 1}}, {freq0, freq1, sev0, sev1}),
                            options(20000, 81));
  const auto [lo, hi] = bootstrap_quantile_ci(r.total_samples, 0.999, 81);
  const double band = hi - lo;
  EXPECT_NEAR(r.total_quantile, r.sum_of_quantiles, band);

  const auto ind = run_independent({m, b}, options(20000, 81));
  EXPECT_LT(ind.total_quantile, ind.sum_of_quantiles - band);
}

TEST(RunCopula, JointSeverityCouplesThroughMu) {
  RiskCellModel m;
  m.cell_id = "joint";
  m.frequency = GammaParams{3.0, 0.5, std::nullopt};
  m.severity = LogNormalJointSeverity{NormalInvChiSqParams{6.0, 2.0, 1.0, 4.0}};
  auto opt = options(20000, 91);
  opt.keep_profiles = true;
  const auto r = run_copula({m, m}, gaussian({{1, 0.6}, {0.6, 1}}, {sev0, sev1}), opt);
  const auto& j = std::get<LogNormalJointSeverity>(m.severity).params;
  const boost::math::students_t_distribution<double> t(j.nu);
  EXPECT_LT(ks_one_sample(r.per_cell_severity[0],
                          [&](double x) { return boost::math::cdf(t, (x - j.theta) / shifted_t_scale(j)); }),
            1.358 / std::sqrt(20000.0));
}

TEST(RunCopula, ThreadCountDoesNotChangeSamples) {
  const std::vector<RiskCellModel> cells{uncertain_cell("a"), uncertain_cell("b")};
  const auto spec = gaussian({{1, 0.7}, {0.7, 1}}, {freq0, sev1});
  const auto one = run_copula(cells, spec, options(2003, 5, 1));
  const auto many = run_copula(cells, spec, options(2003, 5, 4));
  EXPECT_EQ(one.per_cell_samples, many.per_cell_samples);
  EXPECT_EQ(one.total_quantile, many.total_quantile);
}
