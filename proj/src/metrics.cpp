#include "vphm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "vphm/error.hpp"

namespace vphm::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Integral over [a,b] of (g(x) - h)^2 where g is linear from ga to gb.
double segment_square(double a, double b, double ga, double gb, double h) {
  const double u = ga - h, v = gb - h;
  return (b - a) * (u * u + u * v + v * v) / 3.0;
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b || a == 0)
    throw Error(Errc::LengthMismatch, "expected equal non-empty lengths, got " +
                                          std::to_string(a) + " and " + std::to_string(b));
}

} // namespace

PiecewiseCdf::PiecewiseCdf(std::vector<double> values, std::vector<double> levels)
    : values_(std::move(values)), levels_(std::move(levels)) {
  if (values_.size() != levels_.size() || values_.size() < 2)
    throw Error(Errc::LengthMismatch, "piecewise CDF needs >= 2 (value, level) pairs");
  for (double l : levels_)
    require(l >= 0.0 && l <= 1.0, "piecewise CDF levels must lie in [0,1]");
  std::sort(values_.begin(), values_.end());
  std::sort(levels_.begin(), levels_.end());
}

double PiecewiseCdf::cdf(double x) const {
  if (x < values_.front())
    return levels_.front();
  if (x >= values_.back())
    return levels_.back();
  // First knot strictly greater than x; x lies in [v[k-1], v[k]).
  auto k = static_cast<std::size_t>(std::upper_bound(values_.begin(), values_.end(), x) -
                                    values_.begin());
  const double a = values_[k - 1], b = values_[k];
  const double t = (x - a) / (b - a);
  return levels_[k - 1] + t * (levels_[k] - levels_[k - 1]);
}

double PiecewiseCdf::quantile(double p) const {
  if (p <= levels_.front())
    return values_.front();
  if (p >= levels_.back())
    return values_.back();
  auto k = static_cast<std::size_t>(std::lower_bound(levels_.begin(), levels_.end(), p) -
                                    levels_.begin());
  const double la = levels_[k - 1], lb = levels_[k];
  if (lb == la)
    return values_[k];
  const double t = (p - la) / (lb - la);
  return values_[k - 1] + t * (values_[k] - values_[k - 1]);
}

double PiecewiseCdf::mean() const {
  double m = levels_.front() * values_.front() + (1.0 - levels_.back()) * values_.back();
  for (std::size_t k = 0; k + 1 < values_.size(); ++k)
    m += (levels_[k + 1] - levels_[k]) * 0.5 * (values_[k] + values_[k + 1]);
  return m;
}

double PiecewiseCdf::variance() const {
  const double c = mean();
  const double lo = values_.front() - c, hi = values_.back() - c;
  double v = levels_.front() * lo * lo + (1.0 - levels_.back()) * hi * hi;
  for (std::size_t k = 0; k + 1 < values_.size(); ++k) {
    const double a = values_[k] - c, b = values_[k + 1] - c;
    v += (levels_[k + 1] - levels_[k]) * (a * a + a * b + b * b) / 3.0;
  }
  return std::max(v, 0.0);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_quantile(double p) {
  if (p <= 0.0)
    return -kInf;
  if (p >= 1.0)
    return kInf;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double crps_gaussian(double mu, double sigma, double y) {
  if (sigma <= 0.0)
    return std::abs(y - mu);
  const double z = (y - mu) / sigma;
  return sigma * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) -
                  1.0 / std::sqrt(std::numbers::pi));
}

double crps_piecewise(const PiecewiseCdf &d, double y) {
  const auto &v = d.values();
  const auto &l = d.levels();
  double total = 0.0;
  if (y < v.front())
    total += v.front() - y;
  if (y > v.back())
    total += y - v.back();
  for (std::size_t k = 0; k + 1 < v.size(); ++k) {
    const double a = v[k], b = v[k + 1];
    if (b <= a)
      continue;
    const double ga = l[k], gb = l[k + 1];
    if (y <= a) {
      total += segment_square(a, b, ga, gb, 1.0);
    } else if (y >= b) {
      total += segment_square(a, b, ga, gb, 0.0);
    } else {
      const double gy = ga + (gb - ga) * (y - a) / (b - a);
      total += segment_square(a, y, ga, gy, 0.0) + segment_square(y, b, gy, gb, 1.0);
    }
  }
  return total;
}

double crps(const PredictiveDistribution &dist, double y) {
  if (const auto *g = std::get_if<Gaussian>(&dist))
    return crps_gaussian(g->mu, g->sigma, y);
  return crps_piecewise(std::get<PiecewiseCdf>(dist), y);
}

double quantile(const PredictiveDistribution &dist, double p) {
  if (const auto *g = std::get_if<Gaussian>(&dist)) {
    if (g->sigma <= 0.0)
      return g->mu;
    return g->mu + g->sigma * normal_quantile(p);
  }
  return std::get<PiecewiseCdf>(dist).quantile(p);
}

double variance(const PredictiveDistribution &dist) {
  if (const auto *g = std::get_if<Gaussian>(&dist))
    return g->sigma * g->sigma;
  return std::get<PiecewiseCdf>(dist).variance();
}

CrpsSummary summarize(std::span<const double> scores) {
  if (scores.empty())
    throw Error(Errc::LengthMismatch, "no scores to summarize");
  const double n = static_cast<double>(scores.size());
  double m = 0.0;
  for (double s : scores)
    m += s;
  m /= n;
  double v = 0.0;
  for (double s : scores)
    v += (s - m) * (s - m);
  return {m, std::sqrt(v / n)};
}

CrpsSummary crps_summary(std::span<const PredictiveDistribution> dists, std::span<const double> ys) {
  check_lengths(dists.size(), ys.size());
  std::vector<double> scores(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i)
    scores[i] = crps(dists[i], ys[i]);
  return summarize(scores);
}

CalibrationCurve calibration_curve(std::span<const PredictiveDistribution> dists,
                                   std::span<const double> ys, std::size_t grid_size) {
  check_lengths(dists.size(), ys.size());
  require(grid_size >= 2, "calibration grid needs >= 2 points");
  CalibrationCurve c;
  c.expected.resize(grid_size);
  c.observed.resize(grid_size);
  const double T = static_cast<double>(ys.size());
  for (std::size_t g = 0; g < grid_size; ++g) {
    const double p = static_cast<double>(g) / static_cast<double>(grid_size - 1);
    std::size_t hits = 0;
    for (std::size_t t = 0; t < ys.size(); ++t)
      if (ys[t] <= quantile(dists[t], p))
        ++hits;
    c.expected[g] = p;
    c.observed[g] = static_cast<double>(hits) / T;
  }
  for (std::size_t g = 1; g < grid_size; ++g) {
    const double dp = c.expected[g] - c.expected[g - 1];
    c.miscalibration_area += 0.5 * dp *
                             (std::abs(c.observed[g] - c.expected[g]) +
                              std::abs(c.observed[g - 1] - c.expected[g - 1]));
  }
  return c;
}

double sharpness(std::span<const PredictiveDistribution> dists) {
  if (dists.empty())
    throw Error(Errc::EmptyInput, "sharpness of an empty set");
  double s = 0.0;
  for (const auto &d : dists)
    s += variance(d);
  return std::sqrt(s / static_cast<double>(dists.size()));
}

double picp(std::span<const double> lower, std::span<const double> upper, std::span<const double> ys) {
  check_lengths(lower.size(), ys.size());
  check_lengths(upper.size(), ys.size());
  std::size_t inside = 0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (lower[i] > upper[i])
      throw Error(Errc::InvertedInterval, "lower > upper at index " + std::to_string(i));
    if (lower[i] <= ys[i] && ys[i] <= upper[i])
      ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(ys.size());
}

kv::Table ScoreReport::to_kv() const {
  return {{"crps_mean", kv::format_double(crps_mean)},
          {"crps_std", kv::format_double(crps_std)},
          {"miscalibration_area", kv::format_double(miscalibration_area)},
          {"sharpness", kv::format_double(sharpness)},
          {"picp", kv::format_double(picp)},
          {"n_points", std::to_string(n_points)}};
}

ScoreReport score(std::span<const PredictiveDistribution> dists, std::span<const double> ys,
                  std::size_t grid_size) {
  ScoreReport r;
  const auto c = crps_summary(dists, ys);
  r.crps_mean = c.mean;
  r.crps_std = c.std;
  r.miscalibration_area = calibration_curve(dists, ys, grid_size).miscalibration_area;
  r.sharpness = sharpness(dists);
  std::vector<double> lo(ys.size()), hi(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    lo[i] = quantile(dists[i], 0.025);
    hi[i] = quantile(dists[i], 0.975);
  }
  r.picp = picp(lo, hi, ys);
  r.n_points = ys.size();
  return r;
}

} // namespace vphm::metrics
