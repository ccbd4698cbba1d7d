#pragma once

// Per-flight forecasts for every model family and the score/calibration
// report layouts shared by the CLI and the acceptance suite.

#include <span>
#include <string>
#include <vector>

#include "vphm/baselines.hpp"
#include "vphm/ingest.hpp"
#include "vphm/metrics.hpp"
#include "vphm/physics.hpp"
#include "vphm/prob_cnn.hpp"

namespace vphm::evaluation {

/// Predictive distributions and measurements on a flight's corrected steps.
struct FlightForecast {
  std::string flight_id;
  std::string model;
  std::vector<metrics::PredictiveDistribution> dists;
  std::vector<double> measured;
};

/// Degenerate forecast at the physics voltage; its CRPS is the absolute error.
FlightForecast physics_forecast(const ingest::FlightLog &log, const physics::BatteryParams &params,
                                std::size_t window_size, double initial_soc = 1.0);

FlightForecast cnn_forecast(const cnn::Model &model, const ingest::FlightLog &log,
                            const physics::BatteryParams &params, const cnn::ForecastOptions &options);

/// Physics voltage plus the baseline's residual quantiles.
FlightForecast baseline_forecast(const baselines::BaselineModel &model, const ingest::FlightLog &log,
                                 const physics::BatteryParams &params, std::size_t window_size,
                                 double initial_soc = 1.0);

struct ScoreRow {
  std::string flight_id; ///< "TOTAL" for the pooled row
  std::string model;
  metrics::ScoreReport report;
};

/// One row per flight followed by a pooled TOTAL row.
std::vector<ScoreRow> score_model(std::span<const FlightForecast> forecasts);

/// Columnar text: flight_id model crps_mean crps_std miscalibration_area sharpness picp n_points.
std::string format_scores(std::span<const ScoreRow> rows);

struct CalibrationSeries {
  std::string model;
  metrics::CalibrationCurve curve;
};

/// Pooled calibration curve of one model over all its flights.
CalibrationSeries calibration_series(std::span<const FlightForecast> forecasts);

/// Columns: expected, then observed frequency per model.
std::string format_calibration(std::span<const CalibrationSeries> series);

} // namespace vphm::evaluation
