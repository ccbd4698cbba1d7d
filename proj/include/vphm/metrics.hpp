#pragma once

// Probabilistic forecast scores: CRPS, calibration curve with miscalibration
// area, sharpness and prediction-interval coverage (PICP).

#include <span>
#include <variant>
#include <vector>

#include "vphm/kv.hpp"

namespace vphm::metrics {

/// Normal forecast. sigma == 0 is accepted as the point-mass limit.
struct Gaussian {
  double mu = 0.0;
  double sigma = 1.0;
};

/// Monotone CDF through (value, level) knots, linear in between.
///
/// `cdf()` extends flat outside the knots (lowest level below the first knot,
/// highest level at and above the last). For scoring, the uncovered tail mass
/// (level_min below, 1 - level_max above) sits as atoms on the extreme knots,
/// which keeps CRPS and variance finite.
class PiecewiseCdf {
public:
  PiecewiseCdf() = default;
  /// Values are sorted (quantile-crossing repair); levels must lie in [0,1].
  PiecewiseCdf(std::vector<double> values, std::vector<double> levels);

  double cdf(double x) const;
  double quantile(double p) const;
  double mean() const;
  double variance() const;

  const std::vector<double> &values() const { return values_; }
  const std::vector<double> &levels() const { return levels_; }

private:
  std::vector<double> values_;
  std::vector<double> levels_;
};

using PredictiveDistribution = std::variant<Gaussian, PiecewiseCdf>;

double normal_cdf(double z);
double normal_pdf(double z);
/// Inverse standard normal CDF; +-infinity at 1 and 0.
double normal_quantile(double p);

double crps_gaussian(double mu, double sigma, double y);
double crps_piecewise(const PiecewiseCdf &dist, double y);
double crps(const PredictiveDistribution &dist, double y);

double quantile(const PredictiveDistribution &dist, double p);
double variance(const PredictiveDistribution &dist);

struct CrpsSummary {
  double mean = 0.0;
  double std = 0.0; ///< population standard deviation of per-point scores
};

CrpsSummary summarize(std::span<const double> scores);
CrpsSummary crps_summary(std::span<const PredictiveDistribution> dists, std::span<const double> ys);

struct CalibrationCurve {
  std::vector<double> expected; ///< uniform grid on [0,1]
  std::vector<double> observed;
  double miscalibration_area = 0.0;
};

CalibrationCurve calibration_curve(std::span<const PredictiveDistribution> dists,
                                   std::span<const double> ys, std::size_t grid_size = 101);

/// sqrt(mean variance).
double sharpness(std::span<const PredictiveDistribution> dists);

/// Fraction of ys with lower <= y <= upper.
double picp(std::span<const double> lower, std::span<const double> upper, std::span<const double> ys);

struct ScoreReport {
  double crps_mean = 0.0;
  double crps_std = 0.0;
  double miscalibration_area = 0.0;
  double sharpness = 0.0;
  double picp = 0.0; ///< of the central 95% interval
  std::size_t n_points = 0;

  kv::Table to_kv() const;
};

ScoreReport score(std::span<const PredictiveDistribution> dists, std::span<const double> ys,
                  std::size_t grid_size = 101);

} // namespace vphm::metrics
