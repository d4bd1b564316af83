#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include <oprisk/special_functions.hpp>

using namespace oprisk;

TEST(IncompleteGamma, MatchesBoostAcrossShapes) {
  for (const double a : {0.01, 0.3, 1.0, 3.407, 23.086, 150.0, 5000.0, 1e6}) {
    for (const double rel : {1e-3, 0.1, 0.5, 0.9, 1.0, 1.1, 2.0, 5.0}) {
      const double x = a * rel + (a < 1.0 ? rel : 0.0);
      const double p = boost::math::gamma_p(a, x);
      const double q = boost::math::gamma_q(a, x);
      const auto t = special::regularized_gamma(a, x);
      if (p > 1e-290) EXPECT_NEAR(t.lower / p, 1.0, 1e-11) << "a=" << a << " x=" << x;
      if (q > 1e-290) EXPECT_NEAR(t.upper / q, 1.0, 1e-11) << "a=" << a << " x=" << x;
      EXPECT_NEAR(t.lower + t.upper, 1.0, 1e-15);
    }
  }
}

TEST(IncompleteGamma, BoundaryArguments) {
  EXPECT_EQ(special::gamma_p(2.0, 0.0), 0.0);
  EXPECT_EQ(special::gamma_q(2.0, 0.0), 1.0);
  EXPECT_EQ(special::gamma_p(2.0, std::numeric_limits<double>::infinity()), 1.0);
  EXPECT_NEAR(special::gamma_p(1.0, 1.0), 1.0 - std::exp(-1.0), 1e-15);
}

TEST(IncompleteGamma, RejectsBadShape) {
  EXPECT_THROW(special::gamma_p(0.0, 1.0), validation_error);
  EXPECT_THROW(special::gamma_p(-1.0, 1.0), validation_error);
  EXPECT_THROW(special::gamma_q(std::numeric_limits<double>::infinity(), 1.0), validation_error);
  EXPECT_THROW(special::gamma_p(1.0, std::nan("")), validation_error);
}

TEST(IncompleteGamma, LogUpperTailStaysFiniteWhereTailUnderflows) {
  EXPECT_NEAR(special::log_gamma_q(2.0, 50.0), std::log(boost::math::gamma_q(2.0, 50.0)), 1e-12);
  EXPECT_NEAR(special::log_gamma_q(3.0, 0.5), std::log(boost::math::gamma_q(3.0, 0.5)), 1e-13);
  // Q(1, x) = e^{-x}
  EXPECT_NEAR(special::log_gamma_q(1.0, 2000.0), -2000.0, 1e-9);
  EXPECT_TRUE(std::isfinite(special::log_gamma_q(23.0, 5000.0)));
}

TEST(NormalQuantile, InvertsCdfToTwelveDigits) {
  for (const double q : {1e-300, 1e-20, 1e-10, 0.001, 0.02425, 0.3, 0.5, 0.7, 0.975, 0.999, 1.0 - 1e-10}) {
    const double z = special::normal_quantile(q);
    if (q < 0.5) {
      EXPECT_NEAR(special::normal_cdf(z) / q, 1.0, 1e-12) << q;
    } else {
      EXPECT_NEAR(special::normal_cdf(z), q, 1e-12) << q;
    }
  }
}

TEST(NormalQuantile, MatchesInverseErf) {
  for (const double q : {0.001, 0.1, 0.5, 0.841345, 0.975}) {
    const double oracle = std::sqrt(2.0) * boost::math::erf_inv(2.0 * q - 1.0);
    EXPECT_NEAR(special::normal_quantile(q), oracle, 1e-12) << q;
  }
}

TEST(NormalQuantile, RejectsLevelsOutsideOpenInterval) {
  EXPECT_THROW(special::normal_quantile(0.0), validation_error);
  EXPECT_THROW(special::normal_quantile(1.0), validation_error);
  EXPECT_THROW(special::normal_quantile(std::nan("")), validation_error);
}

TEST(NormalTails, UpperTailKeepsPrecision) {
  EXPECT_NEAR(special::normal_sf(10.0) / 7.619853024160527e-24, 1.0, 1e-12);
  EXPECT_NEAR(special::normal_cdf(-10.0) / 7.619853024160527e-24, 1.0, 1e-12);
}
