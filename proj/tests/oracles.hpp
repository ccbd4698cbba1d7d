#pragma once

// Independent numerical references: CRPS as the integral of the squared
// difference between the forecast CDF and the observation step, and moments
// by integrating the survival function.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "vphm/metrics.hpp"

namespace oracle {

/// Adaptive Gauss-Kronrod over consecutive breakpoints.
inline double integrate(const std::function<double(double)> &f, std::vector<double> points) {
  std::sort(points.begin(), points.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    if (points[k + 1] <= points[k])
      continue;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, points[k], points[k + 1], 8,
                                                                           1e-11);
  }
  return total;
}

inline double crps_gaussian(double mu, double sigma, double y) {
  const boost::math::normal_distribution<double> n(mu, sigma);
  auto f = [&](double x) {
    const double F = boost::math::cdf(n, x);
    return x < y ? F * F : (1.0 - F) * (1.0 - F);
  };
  const double lo = std::min(mu, y) - 12.0 * sigma, hi = std::max(mu, y) + 12.0 * sigma;
  return integrate(f, {lo, mu - 3.0 * sigma, mu, mu + 3.0 * sigma, y, hi});
}

/// CDF used for scoring: the tails outside the knots are atoms on the end knots.
inline double scoring_cdf(const vphm::metrics::PiecewiseCdf &d, double x) {
  if (x < d.values().front())
    return 0.0;
  if (x >= d.values().back())
    return 1.0;
  return d.cdf(x);
}

inline double crps_piecewise(const vphm::metrics::PiecewiseCdf &d, double y) {
  auto f = [&](double x) {
    const double F = scoring_cdf(d, x);
    return x < y ? F * F : (1.0 - F) * (1.0 - F);
  };
  std::vector<double> pts = d.values();
  pts.push_back(y);
  return integrate(f, pts);
}

/// E[X] = a + int_a^b (1 - F), E[X^2] = a^2 + int_a^b 2x(1 - F), for support [a, b].
inline double variance_piecewise(const vphm::metrics::PiecewiseCdf &d) {
  const double a = d.values().front();
  const auto &pts = d.values();
  const double m1 = a + integrate([&](double x) { return 1.0 - scoring_cdf(d, x); }, pts);
  const double m2 = a * a + integrate([&](double x) { return 2.0 * x * (1.0 - scoring_cdf(d, x)); }, pts);
  return m2 - m1 * m1;
}

} // namespace oracle
