#ifndef OPRISK_NUMERIC_LEAST_SQUARES_HPP
#define OPRISK_NUMERIC_LEAST_SQUARES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace oprisk::numeric {

struct LeastSquaresResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residuals;
  double cost = std::numeric_limits<double>::infinity(); ///< 0.5 * |r|^2
  int iterations = 0;
  bool converged = false;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

namespace detail {

inline Eigen::MatrixXd central_jacobian(const ResidualFn& f, const Eigen::VectorXd& x, Eigen::Index m) {
  Eigen::MatrixXd jac(m, x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp[j] += h;
    xm[j] -= h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

inline bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

} // namespace detail

/**
 * Levenberg-Marquardt with a central-difference Jacobian, for small
 * unconstrained problems. Residual evaluations that return non-finite values
 * are treated as rejected steps.
 *
 * Converged means one of: cost below `cost_tol`, scaled gradient below
 * `grad_tol`, or a relative step below `step_tol`. Hitting `max_iter` leaves
 * converged false.
 */
inline LeastSquaresResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x0, int max_iter = 500,
                                              double cost_tol = 1e-24, double grad_tol = 1e-14,
                                              double step_tol = 1e-15) {
  LeastSquaresResult out;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd r = f(x);
  if (!detail::all_finite(r)) {
    out.x = x;
    out.residuals = r;
    return out;
  }
  double cost = 0.5 * r.squaredNorm();
  double lambda = 1e-3;

  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    if (cost <= cost_tol) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd jac = detail::central_jacobian(f, x, r.size());
    const Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() <= grad_tol * std::max(1.0, cost)) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    bool accepted = false;
    for (int tries = 0; tries < 60 && !accepted; ++tries) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * (jtj.diagonal().array() + 1e-12).matrix();
      const Eigen::VectorXd step = a.ldlt().solve(-grad);
      const Eigen::VectorXd trial = x + step;
      const Eigen::VectorXd r_trial = f(trial);
      const double trial_cost = detail::all_finite(r_trial) ? 0.5 * r_trial.squaredNorm()
                                                            : std::numeric_limits<double>::infinity();
      if (trial_cost < cost) {
        const bool tiny_step = step.norm() <= step_tol * (x.norm() + step_tol);
        x = trial;
        r = r_trial;
        cost = trial_cost;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (tiny_step) {
          out.converged = true;
        }
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) {
      // no descent direction at any damping: stationary to working precision
      out.converged = true;
      break;
    }
    if (out.converged) break;
  }
  out.x = x;
  out.residuals = r;
  out.cost = cost;
  return out;
}

} // namespace oprisk::numeric

#endif // OPRISK_NUMERIC_LEAST_SQUARES_HPP
