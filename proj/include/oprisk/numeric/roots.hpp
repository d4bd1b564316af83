#ifndef OPRISK_NUMERIC_ROOTS_HPP
#define OPRISK_NUMERIC_ROOTS_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "../error.hpp"

namespace oprisk::numeric {

struct RootResult {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
};

/// Root of f on [lo, hi] given f(lo), f(hi) of opposite sign (TOMS 748).
template <class F>
RootResult solve_bracketed(F&& f, double lo, double hi, double flo, double fhi, int max_iter = 200) {
  if (flo == 0.0) return {lo, 0.0, 0};
  if (fhi == 0.0) return {hi, 0.0, 0};
  if ((flo > 0.0) == (fhi > 0.0)) {
    throw convergence_error("solve_bracketed: endpoints do not bracket a root");
  }
  std::uintmax_t iters = static_cast<std::uintmax_t>(max_iter);
  const auto [a, b] = boost::math::tools::toms748_solve(
      f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52), iters);
  const double fa = f(a);
  const double fb = f(b);
  const bool take_a = std::abs(fa) <= std::abs(fb);
  return {take_a ? a : b, take_a ? fa : fb, static_cast<int>(iters)};
}

/**
 * Scan a geometric grid on [lo, hi] for a sign change of f and solve inside it.
 *
 * The grid is walked from `hi` towards `lo`, so when f changes sign more than
 * once the root with the largest argument is returned. Returns nullopt when no
 * sign change exists on the grid.
 */
template <class F>
std::optional<RootResult> solve_on_log_grid(F&& f, double lo, double hi, int points_per_decade = 8) {
  const double step = std::pow(10.0, 1.0 / points_per_decade);
  double x_hi = hi;
  double f_hi = f(x_hi);
  if (f_hi == 0.0) return RootResult{x_hi, 0.0, 0};
  while (x_hi > lo) {
    const double x_lo = std::max(lo, x_hi / step);
    const double f_lo = f(x_lo);
    if (std::isfinite(f_lo) && std::isfinite(f_hi) && (f_lo > 0.0) != (f_hi > 0.0)) {
      return solve_bracketed(f, x_lo, x_hi, f_lo, f_hi);
    }
    if (f_lo == 0.0) return RootResult{x_lo, 0.0, 0};
    x_hi = x_lo;
    f_hi = f_lo;
  }
  return std::nullopt;
}

} // namespace oprisk::numeric

#endif // OPRISK_NUMERIC_ROOTS_HPP
