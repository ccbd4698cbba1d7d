#include "vphm/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "vphm/error.hpp"

namespace vphm::synthgen {

namespace {

using Rng = std::mt19937_64;

Rng stream(std::uint64_t seed, std::uint32_t purpose, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose,
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

const char *load_name(LoadKind k) {
  switch (k) {
  case LoadKind::Constant:
    return "constant";
  case LoadKind::Steps:
    return "steps";
  default:
    return "random_walk";
  }
}

const char *bias_name(BiasKind k) {
  switch (k) {
  case BiasKind::None:
    return "none";
  case BiasKind::Constant:
    return "constant";
  default:
    return "soc_ramp";
  }
}

GeneratedFlight generate_with(const ScenarioSpec &spec, std::uint64_t load_stream,
                              std::uint64_t noise_stream) {
  spec.validate();
  const auto params = scenario_params(spec);
  const auto load = load_profile(spec, load_stream);
  const auto sim = physics::simulate(load, spec.dt, params, spec.initial_soc);

  GeneratedFlight g;
  g.params = params;
  g.load = load;
  g.truth = sim.voltage;
  for (std::size_t k = 0; k < g.truth.size(); ++k) {
    if (spec.bias == BiasKind::Constant)
      g.truth[k] += spec.bias_value;
    else if (spec.bias == BiasKind::SocRamp)
      g.truth[k] += spec.bias_value * (1.0 - sim.soc[k]);
  }

  Rng rng = stream(spec.seed, 1, noise_stream);
  std::normal_distribution<double> normal(0.0, 1.0);
  g.log.flight_id = spec.flight_id;
  g.log.sample_period = spec.dt;
  g.log.samples.resize(load.size());
  const double half = 0.5 * spec.duration;
  for (std::size_t k = 0; k < load.size(); ++k) {
    const double t = static_cast<double>(k) * spec.dt;
    const double f = t >= half ? spec.late_noise_factor : 1.0;
    // Draw order is fixed (current, then voltage) so zero-sigma channels stay exact.
    const double ni = normal(rng), nv = normal(rng);
    auto &s = g.log.samples[k];
    s.time = t;
    s.current = load[k] + spec.sigma_i * f * ni;
    s.voltage = g.truth[k] + spec.sigma_v * f * nv;
  }
  return g;
}

} // namespace

const std::set<std::string> &ScenarioSpec::keys() {
  static const std::set<std::string> k = {
      "flight_id", "duration",   "dt",          "load",         "load_mean",      "load_min",
      "load_max",  "walk_sigma", "walk_reversion", "walk_smoothing", "step_levels", "step_period",
      "sigma_v",   "sigma_i",    "late_noise_factor", "bias",    "bias_value",     "chemistry",
      "q_max_scale", "r_scale",  "initial_soc", "seed"};
  return k;
}

void ScenarioSpec::validate() const {
  auto bad = [](const std::string &what) { throw Error(Errc::InvalidConfig, what); };
  if (!(duration > 0.0) || !(dt > 0.0))
    bad("duration and dt must be positive");
  if (duration < dt)
    bad("duration shorter than one sample");
  if (!(sigma_v >= 0.0) || !(sigma_i >= 0.0) || !(late_noise_factor >= 0.0))
    bad("noise levels must be non-negative");
  if (!(load_min <= load_max))
    bad("load_min exceeds load_max");
  if (load == LoadKind::Steps && (step_levels.empty() || !(step_period > 0.0)))
    bad("steps load needs levels and a positive period");
  if (!(walk_smoothing >= 0.0 && walk_smoothing < 1.0))
    bad("walk_smoothing must lie in [0,1)");
  if (!(q_max_scale > 0.0) || !(r_scale > 0.0))
    bad("parameter scales must be positive");
  if (!(initial_soc > 0.0 && initial_soc <= 1.0))
    bad("initial_soc must lie in (0,1]");
  if (flight_id.empty())
    bad("flight_id must be non-empty");
}

kv::Table ScenarioSpec::to_kv() const {
  std::string levels;
  for (std::size_t i = 0; i < step_levels.size(); ++i)
    levels += (i ? ", " : "") + kv::format_double(step_levels[i]);
  return {{"flight_id", flight_id},
          {"duration", kv::format_double(duration)},
          {"dt", kv::format_double(dt)},
          {"load", load_name(load)},
          {"load_mean", kv::format_double(load_mean)},
          {"load_min", kv::format_double(load_min)},
          {"load_max", kv::format_double(load_max)},
          {"walk_sigma", kv::format_double(walk_sigma)},
          {"walk_reversion", kv::format_double(walk_reversion)},
          {"walk_smoothing", kv::format_double(walk_smoothing)},
          {"step_levels", levels},
          {"step_period", kv::format_double(step_period)},
          {"sigma_v", kv::format_double(sigma_v)},
          {"sigma_i", kv::format_double(sigma_i)},
          {"late_noise_factor", kv::format_double(late_noise_factor)},
          {"bias", bias_name(bias)},
          {"bias_value", kv::format_double(bias_value)},
          {"chemistry", chemistry},
          {"q_max_scale", kv::format_double(q_max_scale)},
          {"r_scale", kv::format_double(r_scale)},
          {"initial_soc", kv::format_double(initial_soc)},
          {"seed", std::to_string(seed)}};
}

ScenarioSpec ScenarioSpec::from_kv(const kv::Table &t, ScenarioSpec s) {
  s.flight_id = kv::get_string(t, "flight_id", s.flight_id);
  s.duration = kv::get_double(t, "duration", s.duration);
  s.dt = kv::get_double(t, "dt", s.dt);
  const std::string load = kv::get_string(t, "load", load_name(s.load));
  if (load == "constant")
    s.load = LoadKind::Constant;
  else if (load == "steps")
    s.load = LoadKind::Steps;
  else if (load == "random_walk")
    s.load = LoadKind::RandomWalk;
  else
    throw Error(Errc::InvalidConfig, "unknown load kind '" + load + "'");
  s.load_mean = kv::get_double(t, "load_mean", s.load_mean);
  s.load_min = kv::get_double(t, "load_min", s.load_min);
  s.load_max = kv::get_double(t, "load_max", s.load_max);
  s.walk_sigma = kv::get_double(t, "walk_sigma", s.walk_sigma);
  s.walk_reversion = kv::get_double(t, "walk_reversion", s.walk_reversion);
  s.walk_smoothing = kv::get_double(t, "walk_smoothing", s.walk_smoothing);
  s.step_levels = kv::get_doubles(t, "step_levels", s.step_levels);
  s.step_period = kv::get_double(t, "step_period", s.step_period);
  s.sigma_v = kv::get_double(t, "sigma_v", s.sigma_v);
  s.sigma_i = kv::get_double(t, "sigma_i", s.sigma_i);
  s.late_noise_factor = kv::get_double(t, "late_noise_factor", s.late_noise_factor);
  const std::string bias = kv::get_string(t, "bias", bias_name(s.bias));
  if (bias == "none")
    s.bias = BiasKind::None;
  else if (bias == "constant")
    s.bias = BiasKind::Constant;
  else if (bias == "soc_ramp")
    s.bias = BiasKind::SocRamp;
  else
    throw Error(Errc::InvalidConfig, "unknown bias kind '" + bias + "'");
  s.bias_value = kv::get_double(t, "bias_value", s.bias_value);
  s.chemistry = kv::get_string(t, "chemistry", s.chemistry);
  s.q_max_scale = kv::get_double(t, "q_max_scale", s.q_max_scale);
  s.r_scale = kv::get_double(t, "r_scale", s.r_scale);
  s.initial_soc = kv::get_double(t, "initial_soc", s.initial_soc);
  const long seed = kv::get_int(t, "seed", static_cast<long>(s.seed));
  if (seed < 0)
    throw Error(Errc::InvalidConfig, "seed must be non-negative");
  s.seed = static_cast<std::uint64_t>(seed);
  return s;
}

physics::BatteryParams scenario_params(const ScenarioSpec &spec) {
  auto p = physics::default_params(spec.chemistry);
  p.q_max *= spec.q_max_scale;
  p.r_ohmic *= spec.r_scale;
  return p;
}

std::vector<double> load_profile(const ScenarioSpec &spec, std::uint64_t load_stream) {
  const auto n = static_cast<std::size_t>(std::floor(spec.duration / spec.dt + 1e-9));
  std::vector<double> load(n, spec.load_mean);
  if (spec.load == LoadKind::Steps) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto idx = static_cast<std::size_t>(static_cast<double>(k) * spec.dt / spec.step_period);
      load[k] = spec.step_levels[idx % spec.step_levels.size()];
    }
  } else if (spec.load == LoadKind::RandomWalk) {
    Rng rng = stream(spec.seed, 0, load_stream);
    std::normal_distribution<double> normal(0.0, 1.0);
    double walk = spec.load_mean, smooth = spec.load_mean;
    for (std::size_t k = 0; k < n; ++k) {
      walk += spec.walk_reversion * (spec.load_mean - walk) + spec.walk_sigma * normal(rng);
      walk = std::clamp(walk, spec.load_min, spec.load_max);
      smooth = spec.walk_smoothing * smooth + (1.0 - spec.walk_smoothing) * walk;
      load[k] = smooth;
    }
  }
  return load;
}

GeneratedFlight generate(const ScenarioSpec &spec) { return generate_with(spec, 0, 0); }

std::vector<GeneratedFlight> generate_fleet(std::size_t n, const ScenarioSpec &base,
                                            std::span<const double> scales, bool vary_load) {
  require(scales.size() == n, "generate_fleet: need one q_max scale per flight");
  std::vector<GeneratedFlight> out;
  for (std::size_t k = 0; k < n; ++k) {
    ScenarioSpec s = base;
    s.q_max_scale = base.q_max_scale * scales[k];
    char id[32];
    std::snprintf(id, sizeof(id), "_%03zu", k);
    s.flight_id = base.flight_id + id;
    out.push_back(generate_with(s, vary_load ? k : 0, k));
  }
  return out;
}

} // namespace vphm::synthgen
