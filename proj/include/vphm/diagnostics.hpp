#pragma once

// Battery health verdicts from prediction-interval coverage of the measured
// voltage.

#include <span>
#include <string>
#include <vector>

#include "vphm/metrics.hpp"
#include "vphm/prob_cnn.hpp"

namespace vphm::diagnostics {

enum class Verdict { Ok, Nok };

std::string to_string(Verdict v);

struct HealthReport {
  std::string flight_id;
  std::string model = "cnn";
  double picp_score = 0.0;
  Verdict verdict = Verdict::Nok;
  double interval_z = 1.96;
  double threshold = 0.9;
  std::size_t n_points = 0;
};

inline constexpr double kDefaultZ = 1.96;
inline constexpr double kDefaultThreshold = 0.9;

/// OK iff picp >= threshold.
Verdict verdict_for(double picp, double threshold);

/// Interval corrected voltage +/- z * sigma_TU on the corrected steps.
/// `measured` is aligned with the whole flight. Throws LengthMismatch.
HealthReport diagnose(const cnn::HybridForecast &forecast, std::span<const double> measured,
                      double z = kDefaultZ, double threshold = kDefaultThreshold);

/// Central interval between the Phi(-z) and Phi(z) quantiles of each
/// distribution; used for the quantile baselines.
HealthReport diagnose(const std::string &flight_id, const std::string &model,
                      std::span<const metrics::PredictiveDistribution> dists,
                      std::span<const double> measured, double z = kDefaultZ,
                      double threshold = kDefaultThreshold);

struct FleetRow {
  std::string flight_id;
  std::string model;
  std::string picp; ///< three decimals
  Verdict verdict = Verdict::Nok;
  bool duplicate = false;
};

struct FleetReport {
  std::vector<FleetRow> rows;

  /// Aligned text table.
  std::string to_table() const;
  /// Machine-readable rows: flight_id,model,picp,verdict,duplicate.
  std::string to_csv() const;
};

/// Rows sorted by flight id then model; repeated (flight, model) pairs are
/// kept and flagged. Requires a non-empty input.
FleetReport fleet_report(std::span<const HealthReport> reports);

} // namespace vphm::diagnostics
