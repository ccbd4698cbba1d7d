#include "vphm/evaluation.hpp"

#include <algorithm>
#include <cstdio>

#include "vphm/error.hpp"

namespace vphm::evaluation {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width)
    s.append(width - s.size(), ' ');
  return s;
}

} // namespace

FlightForecast physics_forecast(const ingest::FlightLog &log, const physics::BatteryParams &params,
                                std::size_t window_size, double initial_soc) {
  require(window_size >= 1 && log.size() >= window_size, "physics_forecast: flight shorter than a window");
  const auto sim = physics::simulate(log.currents(), log.sample_period, params, initial_soc);
  FlightForecast f{log.flight_id, "physics", {}, {}};
  for (std::size_t k = window_size - 1; k < log.size(); ++k) {
    f.dists.emplace_back(metrics::Gaussian{sim.voltage[k], 0.0});
    f.measured.push_back(log.samples[k].voltage);
  }
  return f;
}

FlightForecast cnn_forecast(const cnn::Model &model, const ingest::FlightLog &log,
                            const physics::BatteryParams &params, const cnn::ForecastOptions &options) {
  const auto hf = cnn::forecast_flight(model, log, params, options);
  return {log.flight_id, "cnn", hf.distributions(), hf.corrected_slice(log.voltages())};
}

FlightForecast baseline_forecast(const baselines::BaselineModel &model, const ingest::FlightLog &log,
                                 const physics::BatteryParams &params, std::size_t window_size,
                                 double initial_soc) {
  const auto windows = cnn::flight_windows(log, params, window_size, initial_soc);
  FlightForecast f{log.flight_id, baselines::kind_of(model), {}, {}};
  for (const auto &w : windows) {
    auto qs = baselines::predict(model, w.inputs);
    const double physics_v = w.inputs[2 * (window_size - 1) + 1];
    for (double &v : qs.values)
      v += physics_v;
    f.dists.emplace_back(baselines::quantiles_to_distribution(qs));
    f.measured.push_back(log.samples[w.end_index].voltage);
  }
  return f;
}

std::vector<ScoreRow> score_model(std::span<const FlightForecast> forecasts) {
  require(!forecasts.empty(), "score_model: no forecasts");
  std::vector<ScoreRow> rows;
  std::vector<metrics::PredictiveDistribution> all;
  std::vector<double> ys;
  for (const auto &f : forecasts) {
    rows.push_back({f.flight_id, f.model, metrics::score(f.dists, f.measured)});
    all.insert(all.end(), f.dists.begin(), f.dists.end());
    ys.insert(ys.end(), f.measured.begin(), f.measured.end());
  }
  rows.push_back({"TOTAL", forecasts.front().model, metrics::score(all, ys)});
  return rows;
}

std::string format_scores(std::span<const ScoreRow> rows) {
  std::size_t wf = 9, wm = 7;
  for (const auto &r : rows) {
    wf = std::max(wf, r.flight_id.size());
    wm = std::max(wm, r.model.size());
  }
  std::string out = pad("flight_id", wf + 2) + pad("model", wm + 2) +
                    "crps_mean   crps_std    calib_area  sharpness   picp    n_points\n";
  for (const auto &r : rows) {
    const auto &s = r.report;
    out += pad(r.flight_id, wf + 2) + pad(r.model, wm + 2) + pad(fixed(s.crps_mean, 6), 12) +
           pad(fixed(s.crps_std, 6), 12) + pad(fixed(s.miscalibration_area, 4), 12) +
           pad(fixed(s.sharpness, 6), 12) + pad(fixed(s.picp, 3), 8) + std::to_string(s.n_points) + "\n";
  }
  return out;
}

CalibrationSeries calibration_series(std::span<const FlightForecast> forecasts) {
  require(!forecasts.empty(), "calibration_series: no forecasts");
  std::vector<metrics::PredictiveDistribution> all;
  std::vector<double> ys;
  for (const auto &f : forecasts) {
    all.insert(all.end(), f.dists.begin(), f.dists.end());
    ys.insert(ys.end(), f.measured.begin(), f.measured.end());
  }
  return {forecasts.front().model, metrics::calibration_curve(all, ys)};
}

std::string format_calibration(std::span<const CalibrationSeries> series) {
  require(!series.empty(), "format_calibration: no series");
  std::string out = "expected";
  for (const auto &s : series)
    out += " " + s.model;
  out += "\n";
  const std::size_t n = series.front().curve.expected.size();
  for (std::size_t g = 0; g < n; ++g) {
    out += fixed(series.front().curve.expected[g], 2);
    for (const auto &s : series)
      out += " " + fixed(s.curve.observed.at(g), 6);
    out += "\n";
  }
  return out;
}

} // namespace vphm::evaluation
