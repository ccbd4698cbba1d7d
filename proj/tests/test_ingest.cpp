#include <doctest.h>

#include <filesystem>
#include <random>

#include "vphm/error.hpp"
#include "vphm/ingest.hpp"

using namespace vphm;
using namespace vphm::ingest;

namespace {

RawRecord rec(double t, std::optional<double> i, std::optional<double> v) { return {t, i, v}; }

FlightLog ramp_log(std::size_t n) {
  FlightLog log;
  log.flight_id = "ramp";
  for (std::size_t k = 0; k < n; ++k)
    log.samples.push_back({static_cast<double>(k), 10.0 + static_cast<double>(k), 4.0 - 0.01 * static_cast<double>(k)});
  return log;
}

Errc code_of(auto &&fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::Precondition;
}

} // namespace

TEST_SUITE("ingest") {

TEST_CASE("three data rows give three records") {
  const auto r = parse_flight_csv_text("time_s,current_a,voltage_v\n0,1,4\n1,2,3.9\n2,3,3.8\n");
  REQUIRE(r.size() == 3);
  CHECK(r[1].time == 1.0);
  CHECK(*r[2].current == 3.0);
  CHECK(*r[0].voltage == 4.0);
}

TEST_CASE("NaN and empty cells become missing") {
  const auto r = parse_flight_csv_text("time_s,current_a,voltage_v\n0,1,NaN\n1,,3.9\n");
  CHECK_FALSE(r[0].voltage.has_value());
  CHECK_FALSE(r[1].current.has_value());
  CHECK(*r[1].voltage == 3.9);
}

TEST_CASE("columns are matched by name, in any order") {
  const auto r = parse_flight_csv_text("voltage_v,time_s,current_a\n4.1,0,7\n");
  CHECK(r[0].time == 0.0);
  CHECK(*r[0].current == 7.0);
  CHECK(*r[0].voltage == 4.1);
}

TEST_CASE("missing current column") {
  CHECK(code_of([] { parse_flight_csv_text("time_s,voltage_v\n0,4\n"); }) == Errc::MissingColumn);
}

TEST_CASE("header without rows is empty") {
  CHECK(code_of([] { parse_flight_csv_text("time_s,current_a,voltage_v\n"); }) == Errc::EmptyFile);
}

TEST_CASE("duplicate timestamp keeps the first record") {
  std::vector<RawRecord> r = {rec(0, 1, 4), rec(1, 2, 4), rec(1, 9, 3), rec(2, 3, 4), rec(3, 4, 4)};
  const auto log = clean(r);
  REQUIRE(log.size() == 4);
  CHECK(log.samples[1].current == 2.0);
}

TEST_CASE("missing current is imputed with the column mean") {
  std::vector<RawRecord> r = {rec(0, 1.0, 4), rec(1, std::nullopt, 4), rec(2, 3.0, 4)};
  CHECK(clean(r).samples[1].current == doctest::Approx(2.0));
}

TEST_CASE("implausible voltage drops the only record") {
  std::vector<RawRecord> r = {rec(0, 1.0, 999.0)};
  CHECK(code_of([&] { clean(r); }) == Errc::AllRecordsInvalid);
}

TEST_CASE("cleaning sorts by time and shifts the origin") {
  std::vector<RawRecord> r = {rec(12, 1, 4), rec(10, 2, 4), rec(11, 3, 4)};
  const auto log = clean(r);
  CHECK(log.samples[0].time == 0.0);
  CHECK(log.samples[0].current == 2.0);
  CHECK(log.samples[2].time == 2.0);
  CHECK(log.sample_period == 1.0);
}

TEST_CASE("cleaning is idempotent and leaves its input alone") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<RawRecord> r;
    for (int k = 0; k < 50; ++k) {
      const double t = std::floor(u(rng) * 40.0);
      std::optional<double> i = u(rng) < 0.1 ? std::nullopt : std::optional(u(rng) * 250.0 - 10.0);
      std::optional<double> v = u(rng) < 0.1 ? std::nullopt : std::optional(u(rng) * 35.0);
      r.push_back({t, i, v});
    }
    const auto copy = r;
    FlightLog once;
    try {
      once = clean(r);
    } catch (const Error &) {
      continue;
    }
    CHECK(r.size() == copy.size());
    const auto twice = clean(to_records(once));
    REQUIRE(twice.size() == once.size());
    for (std::size_t k = 0; k < once.size(); ++k) {
      CHECK(twice.samples[k].time == once.samples[k].time);
      CHECK(twice.samples[k].current == once.samples[k].current);
      CHECK(twice.samples[k].voltage == once.samples[k].voltage);
    }
  }
}

TEST_CASE("window count follows the stride formula") {
  const auto log = ramp_log(12);
  const auto v = log.voltages();
  CHECK(make_windows(log, v, 10, 1).size() == 3);
  const auto log20 = ramp_log(20);
  CHECK(make_windows(log20, log20.voltages(), 10, 3).size() == 4);
}

TEST_CASE("windows against the measured voltage have zero targets") {
  const auto log = ramp_log(15);
  for (const auto &w : make_windows(log, log.voltages(), 10, 1))
    CHECK(w.target == 0.0);
}

TEST_CASE("short log is rejected") {
  const auto log = ramp_log(9);
  CHECK(code_of([&] { make_windows(log, log.voltages(), 10, 1); }) == Errc::TooShort);
}

TEST_CASE("window tails rebuild the residual series") {
  const auto log = ramp_log(30);
  std::vector<double> physics(30);
  for (std::size_t k = 0; k < 30; ++k)
    physics[k] = 3.5 + 0.003 * static_cast<double>(k * k % 7);
  const auto ws = make_windows(log, physics, 10, 1);
  REQUIRE(ws.size() == 21);
  for (std::size_t w = 0; w < ws.size(); ++w) {
    const std::size_t k = w + 9;
    CHECK(ws[w].end_index == k);
    CHECK(ws[w].target == log.samples[k].voltage - physics[k]);
    // Last row holds (current, physics voltage) at the window end.
    CHECK(ws[w].inputs[18] == log.samples[k].current);
    CHECK(ws[w].inputs[19] == physics[k]);
  }
}

TEST_CASE("flight split sizes") {
  std::vector<FlightLog> logs(33);
  std::set<std::string> train;
  for (int k = 0; k < 33; ++k) {
    logs[static_cast<std::size_t>(k)].flight_id = "f" + std::to_string(k);
    if (k < 25)
      train.insert("f" + std::to_string(k));
  }
  auto [tr, te] = split_by_flight(logs, train);
  CHECK(tr.size() == 25);
  CHECK(te.size() == 8);

  auto [none, all] = split_by_flight(logs, {});
  CHECK(none.empty());
  CHECK(all.size() == 33);

  CHECK(code_of([&] { split_by_flight(logs, {"nope"}); }) == Errc::UnknownFlight);
}

TEST_CASE("csv write then load round-trips") {
  const auto dir = std::filesystem::temp_directory_path() / "vphm_ingest_rt";
  std::filesystem::create_directories(dir);
  FlightLog log = ramp_log(5);
  log.samples[2].voltage = 3.123456789012345;
  write_flight_csv(dir / "ramp.csv", log);
  const auto back = load_flight(dir / "ramp.csv");
  CHECK(back.flight_id == "ramp");
  REQUIRE(back.size() == 5);
  CHECK(back.samples[2].voltage == log.samples[2].voltage);
  std::filesystem::remove_all(dir);
}

} // TEST_SUITE
