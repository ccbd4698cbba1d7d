#include <doctest.h>

#include <cmath>
#include <random>

#include "vphm/error.hpp"
#include "vphm/physics.hpp"

using namespace vphm;
using namespace vphm::physics;

namespace {

BatteryParams small_battery() {
  auto p = default_params("lipo-30ah");
  p.q_max = 3600.0; // 1 Ah empties within minutes at tens of amperes
  return p;
}

ingest::FlightLog log_from(std::span<const double> current, std::span<const double> voltage) {
  ingest::FlightLog log;
  log.flight_id = "sim";
  for (std::size_t k = 0; k < current.size(); ++k)
    log.samples.push_back({static_cast<double>(k), current[k], voltage[k]});
  return log;
}

std::vector<double> wavy_load(std::size_t n) {
  std::vector<double> i(n);
  for (std::size_t k = 0; k < n; ++k)
    i[k] = 40.0 + 15.0 * std::sin(static_cast<double>(k) / 37.0) + 8.0 * std::sin(static_cast<double>(k) / 5.3);
  return i;
}

} // namespace

TEST_SUITE("physics") {

TEST_CASE("lipo preset") {
  const auto p = default_params("lipo-30ah");
  CHECK(p.q_max == 108000.0);
  CHECK(p.v_min == 3.0);
  CHECK(p.n_cells == 1);
  try {
    default_params("bogus");
    FAIL("expected UnknownChemistry");
  } catch (const Error &e) {
    CHECK(e.code() == Errc::UnknownChemistry);
  }
}

TEST_CASE("open-circuit curve is monotone between its end points") {
  const auto p = default_params("lipo-30ah");
  CHECK(p.ocv(0.0) == doctest::Approx(3.049).epsilon(1e-3));
  CHECK(p.ocv(1.0) == doctest::Approx(4.2106).epsilon(1e-4));
  double prev = p.ocv(0.0);
  for (int k = 1; k <= 1000; ++k) {
    const double v = p.ocv(k / 1000.0);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("draining to empty approaches the cutoff monotonically") {
  const auto p = small_battery();
  std::vector<double> i(400, 20.0);
  const auto r = simulate(i, 1.0, p, 1.0);
  REQUIRE(r.eod_index.has_value());
  const std::size_t settle = static_cast<std::size_t>(5 * std::max(p.ohmic_tau, p.eta_tau));
  for (std::size_t k = settle + 1; k < *r.eod_index; ++k)
    CHECK(r.voltage[k] <= r.voltage[k - 1]);
  CHECK(r.voltage[*r.eod_index] < p.v_min);
  CHECK(r.voltage[*r.eod_index - 1] >= p.v_min);
}

TEST_CASE("rest at equilibrium is a fixed point") {
  const auto p = default_params("lipo-30ah");
  const auto s0 = equilibrium_state(p, 0.7);
  auto s = s0;
  for (int k = 0; k < 100; ++k)
    s = step(s, 0.0, 1.0, p);
  const auto a = s0.to_array(), b = s.to_array();
  for (std::size_t j = 0; j < a.size(); ++j)
    CHECK(std::abs(a[j] - b[j]) <= 1e-9 * std::max(1.0, std::abs(a[j])));
}

TEST_CASE("one ampere for an hour draws 3600 C") {
  const auto p = default_params("lipo-30ah");
  auto s = equilibrium_state(p, 1.0);
  const double before = s.negative_charge();
  for (int k = 0; k < 3600; ++k)
    s = step(s, 1.0, 1.0, p);
  const double drawn = before - s.negative_charge();
  CHECK(std::abs(drawn - 3600.0) <= 1e-6 * 3600.0);
}

TEST_CASE("non-positive dt is rejected") {
  const auto p = default_params("lipo-30ah");
  try {
    step(equilibrium_state(p, 0.5), 1.0, -1.0, p);
    FAIL("expected a precondition failure");
  } catch (const Error &e) {
    CHECK(e.code() == Errc::Precondition);
  }
}

TEST_CASE("zero current holds the open-circuit voltage") {
  auto p = default_params("lipo-30ah");
  p.n_cells = 6;
  std::vector<double> i(200, 0.0);
  const auto r = simulate(i, 1.0, p, 0.8);
  for (double v : r.voltage)
    CHECK(v == doctest::Approx(6.0 * p.ocv(0.8)).epsilon(1e-12));
}

TEST_CASE("six cells give six times the single-cell voltage") {
  auto one = default_params("lipo-30ah");
  auto six = one;
  six.n_cells = 6;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = equilibrium_state(one, u(rng));
    s.v_o = 0.1 * u(rng);
    s.v_eta_p = 0.05 * u(rng);
    CHECK(terminal_voltage(s, six) == 6.0 * terminal_voltage(s, one));
  }
}

TEST_CASE("constant discharge lowers the state of charge every step") {
  const auto p = default_params("lipo-30ah");
  std::vector<double> i(500, 25.0);
  const auto r = simulate(i, 1.0, p, 0.9);
  for (std::size_t k = 1; k < r.soc.size(); ++k)
    CHECK(r.soc[k] < r.soc[k - 1]);
}

TEST_CASE("heavier load reaches the cutoff sooner") {
  const auto p = small_battery();
  std::vector<double> one(400, 20.0), two(400, 40.0);
  const auto r1 = simulate(one, 1.0, p, 1.0), r2 = simulate(two, 1.0, p, 1.0);
  REQUIRE(r1.eod_index.has_value());
  REQUIRE(r2.eod_index.has_value());
  CHECK(*r2.eod_index < *r1.eod_index);
}

TEST_CASE("charge conservation on random profiles") {
  const auto p = default_params("lipo-30ah");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 80.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> i(300);
    double total = 0.0;
    for (auto &x : i) {
      x = u(rng);
      total += x * 0.5;
    }
    // Charge after the last step: simulate reports the final state.
    const auto r = simulate(i, 0.5, p, 0.95);
    const double drawn = equilibrium_state(p, 0.95).negative_charge() - r.final_state.negative_charge();
    CHECK(std::abs(drawn - total) <= 1e-6 * total);
  }
}

TEST_CASE("halving dt shrinks the error sixteen-fold") {
  const auto p = default_params("lipo-30ah");
  auto final_voltage = [&](double dt) {
    auto s = equilibrium_state(p, 0.9);
    const int n = static_cast<int>(std::lround(8.0 / dt));
    for (int k = 0; k < n; ++k)
      s = step(s, 50.0, dt, p);
    return terminal_voltage(s, p);
  };
  const double v1 = final_voltage(1.0), v2 = final_voltage(0.5), v3 = final_voltage(0.25),
               v4 = final_voltage(0.125);
  const double slope_a = std::log2(std::abs(v1 - v2) / std::abs(v2 - v3));
  const double slope_b = std::log2(std::abs(v2 - v3) / std::abs(v3 - v4));
  CHECK(slope_a >= 3.5);
  CHECK(slope_b >= 3.5);
}

TEST_CASE("calibration recovers the generating parameters") {
  const auto truth = default_params("lipo-30ah");
  const auto i = wavy_load(1500);
  const auto v = simulate(i, 1.0, truth, 1.0).voltage;
  auto start = truth;
  start.r_ohmic *= 1.3;
  start.q_max *= 0.9;
  const auto fit = calibrate(start, log_from(i, v), 1.0);
  CHECK(fit.params.r_ohmic == doctest::Approx(truth.r_ohmic).epsilon(0.01));
  CHECK(fit.params.q_max == doctest::Approx(truth.q_max).epsilon(0.01));
  for (std::size_t k = 1; k < fit.objective_trace.size(); ++k)
    CHECK(fit.objective_trace[k] <= fit.objective_trace[k - 1]);
}

TEST_CASE("calibration follows a doubled resistance") {
  auto truth = default_params("lipo-30ah");
  truth.r_ohmic *= 2.0;
  const auto i = wavy_load(1500);
  const auto v = simulate(i, 1.0, truth, 1.0).voltage;
  const auto fit = calibrate(default_params("lipo-30ah"), log_from(i, v), 1.0);
  CHECK(fit.params.r_ohmic == doctest::Approx(truth.r_ohmic).epsilon(0.05));
  CHECK(fit.params.surface_fraction == truth.surface_fraction);
}

TEST_CASE("calibration needs enough samples") {
  const auto p = default_params("lipo-30ah");
  std::vector<double> i(10, 5.0), v(10, 4.0);
  try {
    calibrate(p, log_from(i, v));
    FAIL("expected Degenerate");
  } catch (const Error &e) {
    CHECK(e.code() == Errc::Degenerate);
  }
}

TEST_CASE("parameter text round-trips") {
  auto p = default_params("lipo-30ah");
  p.r_ohmic = 0.0123456789;
  const auto back = params_from_kv(params_to_kv(p), default_params("lipo-30ah"));
  CHECK(back.r_ohmic == p.r_ohmic);
  CHECK(back.ocv_p == p.ocv_p);
  CHECK(back.q_max == p.q_max);
}

} // TEST_SUITE
