#include <doctest.h>

#include <cmath>

#include "vphm/error.hpp"
#include "vphm/synthgen.hpp"

using namespace vphm;
using namespace vphm::synthgen;

TEST_SUITE("synthgen") {

TEST_CASE("noise-free flight equals the simulation") {
  ScenarioSpec s;
  s.sigma_v = 0.0;
  s.sigma_i = 0.0;
  s.duration = 500;
  const auto g = generate(s);
  const auto sim = physics::simulate(g.load, s.dt, g.params, s.initial_soc);
  REQUIRE(g.log.size() == 500);
  for (std::size_t k = 0; k < 500; ++k) {
    CHECK(g.log.samples[k].voltage == sim.voltage[k]);
    CHECK(g.log.samples[k].current == g.load[k]);
    CHECK(g.log.samples[k].time == static_cast<double>(k));
  }
}

TEST_CASE("generation is deterministic in the seed") {
  ScenarioSpec s;
  s.duration = 300;
  const auto a = generate(s), b = generate(s);
  s.seed = 1;
  const auto c = generate(s);
  bool differs = false;
  for (std::size_t k = 0; k < 300; ++k) {
    CHECK(a.log.samples[k].voltage == b.log.samples[k].voltage);
    differs |= a.log.samples[k].voltage != c.log.samples[k].voltage;
  }
  CHECK(differs);
}

TEST_CASE("load profiles stay in range") {
  ScenarioSpec s;
  s.duration = 2000;
  for (double v : load_profile(s, 3)) {
    CHECK(v >= s.load_min);
    CHECK(v <= s.load_max);
  }
  s.load = LoadKind::Steps;
  const auto steps = load_profile(s, 0);
  CHECK(steps[0] == 30.0);
  CHECK(steps[300] == 50.0);
  CHECK(steps[600] == 40.0);
  CHECK(steps[900] == 30.0);
  s.load = LoadKind::Constant;
  for (double v : load_profile(s, 0))
    CHECK(v == s.load_mean);
}

TEST_CASE("constant bias and noise statistics") {
  ScenarioSpec s;
  s.bias = BiasKind::Constant;
  s.bias_value = 0.2;
  s.sigma_v = 0.02;
  const auto g = generate(s);
  const auto sim = physics::simulate(g.load, s.dt, g.params, s.initial_soc);
  const double n = static_cast<double>(g.log.size());
  double mean_bias = 0.0, mean_noise = 0.0;
  for (std::size_t k = 0; k < g.log.size(); ++k) {
    CHECK(g.truth[k] == doctest::Approx(sim.voltage[k] + 0.2));
    mean_bias += (g.log.samples[k].voltage - sim.voltage[k]) / n;
    mean_noise += (g.log.samples[k].voltage - g.truth[k]) / n;
  }
  CHECK(std::abs(mean_bias - 0.2) < 3.0 * 0.02 / std::sqrt(n));
  CHECK(std::abs(mean_noise) < 3.0 * 0.02 / std::sqrt(n));
}

TEST_CASE("late noise factor scales the second half") {
  ScenarioSpec s;
  s.late_noise_factor = 2.0;
  s.duration = 4000;
  const auto g = generate(s);
  double early = 0.0, late = 0.0;
  for (std::size_t k = 0; k < 4000; ++k) {
    const double r = g.log.samples[k].voltage - g.truth[k];
    (k < 2000 ? early : late) += r * r / 2000.0;
  }
  CHECK(std::sqrt(late / early) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("soc ramp bias grows as charge drains") {
  ScenarioSpec s;
  s.bias = BiasKind::SocRamp;
  s.bias_value = 0.5;
  s.sigma_v = 0.0;
  const auto g = generate(s);
  const auto sim = physics::simulate(g.load, s.dt, g.params, s.initial_soc);
  CHECK(g.truth[0] == doctest::Approx(sim.voltage[0]));
  CHECK(g.truth.back() - sim.voltage.back() == doctest::Approx(0.5 * (1.0 - sim.soc.back())));
}

TEST_CASE("a smaller battery reaches the cutoff earlier") {
  ScenarioSpec s;
  s.duration = 5400;
  s.load = LoadKind::Constant;
  s.load_mean = 40.0;
  s.sigma_v = 0.0;
  s.sigma_i = 0.0;
  auto full = generate(s);
  s.q_max_scale = 0.8;
  auto worn = generate(s);
  const auto sf = physics::simulate(full.load, s.dt, full.params, 1.0);
  const auto sw = physics::simulate(worn.load, s.dt, worn.params, 1.0);
  REQUIRE(sw.eod_index.has_value());
  CHECK((!sf.eod_index || *sw.eod_index < *sf.eod_index));
  CHECK(worn.params.q_max == doctest::Approx(0.8 * full.params.q_max));
}

TEST_CASE("fleet ids, shared truth and distinct noise") {
  ScenarioSpec s;
  s.duration = 200;
  const std::vector<double> scales = {1.0, 1.0, 0.8};
  const auto fleet = generate_fleet(3, s, scales);
  REQUIRE(fleet.size() == 3);
  CHECK(fleet[0].log.flight_id == "flight_000");
  CHECK(fleet[2].log.flight_id == "flight_002");
  CHECK(fleet[0].truth == fleet[1].truth);
  CHECK(fleet[0].load == fleet[1].load);
  CHECK(fleet[0].log.samples[5].voltage != fleet[1].log.samples[5].voltage);
  CHECK(fleet[2].params.q_max == doctest::Approx(0.8 * fleet[0].params.q_max));

  const auto varied = generate_fleet(2, s, std::vector<double>{1.0, 1.0}, true);
  CHECK(varied[0].load != varied[1].load);

  CHECK(generate_fleet(0, s, std::vector<double>{}).empty());
  CHECK_THROWS_AS(generate_fleet(2, s, std::vector<double>{1.0}), Error);
}

TEST_CASE("scenario text round-trips and validates") {
  ScenarioSpec s;
  s.bias = BiasKind::SocRamp;
  s.load = LoadKind::Steps;
  s.step_levels = {10.0, 20.5};
  s.seed = 99;
  const auto back = ScenarioSpec::from_kv(s.to_kv());
  CHECK(back.bias == BiasKind::SocRamp);
  CHECK(back.load == LoadKind::Steps);
  CHECK(back.step_levels == s.step_levels);
  CHECK(back.seed == 99);

  kv::Table bad = {{"load", "sawtooth"}};
  CHECK_THROWS_AS(ScenarioSpec::from_kv(bad), Error);
  ScenarioSpec neg;
  neg.sigma_v = -1.0;
  try {
    neg.validate();
    FAIL("expected InvalidConfig");
  } catch (const Error &e) {
    CHECK(e.code() == Errc::InvalidConfig);
  }
}

} // TEST_SUITE
