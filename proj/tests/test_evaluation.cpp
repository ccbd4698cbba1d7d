#include <doctest.h>

#include <cmath>
#include <sstream>

#include "vphm/evaluation.hpp"
#include "vphm/synthgen.hpp"

using namespace vphm;
using namespace vphm::evaluation;

namespace {

std::vector<ingest::FlightLog> fleet(std::size_t n) {
  synthgen::ScenarioSpec s;
  s.duration = 100;
  s.bias = synthgen::BiasKind::Constant;
  s.bias_value = 0.2;
  std::vector<ingest::FlightLog> out;
  for (auto &g : synthgen::generate_fleet(n, s, std::vector<double>(n, 1.0)))
    out.push_back(g.log);
  return out;
}

} // namespace

TEST_SUITE("evaluation") {

TEST_CASE("physics forecast scores its absolute error") {
  const auto logs = fleet(1);
  const auto p = physics::default_params("lipo-30ah");
  const auto f = physics_forecast(logs[0], p, 10);
  const auto sim = physics::simulate(logs[0].currents(), 1.0, p, 1.0);
  REQUIRE(f.dists.size() == 91);
  double mae = 0.0;
  for (std::size_t k = 9; k < 100; ++k)
    mae += std::abs(logs[0].samples[k].voltage - sim.voltage[k]) / 91.0;
  const auto rows = score_model(std::vector<FlightForecast>{f});
  CHECK(rows[0].report.crps_mean == doctest::Approx(mae).epsilon(1e-12));
  CHECK(rows[0].report.sharpness == 0.0);
}

TEST_CASE("score table has one row per flight plus a total") {
  const auto logs = fleet(8);
  const auto p = physics::default_params("lipo-30ah");
  std::vector<FlightForecast> fs;
  for (const auto &l : logs)
    fs.push_back(physics_forecast(l, p, 10));
  const auto rows = score_model(fs);
  REQUIRE(rows.size() == 9);
  CHECK(rows.back().flight_id == "TOTAL");
  CHECK(rows.back().report.n_points == 8 * 91);
  double mean = 0.0;
  for (std::size_t k = 0; k < 8; ++k)
    mean += rows[k].report.crps_mean / 8.0;
  CHECK(rows.back().report.crps_mean == doctest::Approx(mean));

  const auto text = format_scores(rows);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("flight_id", 0) == 0);
  CHECK(line.find("crps_mean") != std::string::npos);
  CHECK(line.find("n_points") != std::string::npos);
  std::size_t n = 0;
  while (std::getline(in, line))
    ++n;
  CHECK(n == 9);
}

TEST_CASE("baseline forecast adds the physics voltage back") {
  const auto logs = fleet(1);
  const auto p = physics::default_params("lipo-30ah");
  baselines::QlrModel m;
  m.levels = {0.25, 0.75};
  m.feature_mean.assign(20, 0.0);
  m.feature_scale.assign(20, 1.0);
  m.coefficients = {std::vector<double>(21, 0.0), std::vector<double>(21, 0.0)};
  m.coefficients[0][0] = 0.1;
  m.coefficients[1][0] = 0.3;
  const auto f = baseline_forecast(m, logs[0], p, 10);
  const auto sim = physics::simulate(logs[0].currents(), 1.0, p, 1.0);
  REQUIRE(f.dists.size() == 91);
  CHECK(f.model == "qlr");
  CHECK(metrics::quantile(f.dists[0], 0.5) == doctest::Approx(sim.voltage[9] + 0.2));
}

TEST_CASE("calibration table layout") {
  const auto logs = fleet(2);
  const auto p = physics::default_params("lipo-30ah");
  std::vector<FlightForecast> fs;
  for (const auto &l : logs)
    fs.push_back(physics_forecast(l, p, 10));
  const std::vector<CalibrationSeries> series = {calibration_series(fs)};
  const auto text = format_calibration(series);
  CHECK(text.rfind("expected physics\n0.00 ", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 102);
}

} // TEST_SUITE
