#pragma once

// Seeded synthetic flight logs with a known noise-free truth.

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vphm/ingest.hpp"
#include "vphm/kv.hpp"
#include "vphm/physics.hpp"

namespace vphm::synthgen {

enum class LoadKind { Constant, Steps, RandomWalk };
enum class BiasKind { None, Constant, SocRamp };

struct ScenarioSpec {
  std::string flight_id = "flight";
  double duration = 2000.0; ///< s
  double dt = 1.0;          ///< s

  LoadKind load = LoadKind::RandomWalk;
  double load_mean = 40.0; ///< A; the constant level for Constant
  double load_min = 20.0;
  double load_max = 60.0;
  double walk_sigma = 3.0;      ///< A per step, random-walk innovation
  double walk_reversion = 0.02; ///< pull toward load_mean per step
  double walk_smoothing = 0.9;  ///< exponential smoothing of the walk
  std::vector<double> step_levels = {30.0, 50.0, 40.0};
  double step_period = 300.0; ///< s per step level

  double sigma_v = 0.02; ///< V
  double sigma_i = 0.1;  ///< A
  /// Noise multiplier applied from the second half of the flight on.
  double late_noise_factor = 1.0;

  BiasKind bias = BiasKind::None;
  /// Constant: offset in V. SocRamp: offset reached at zero charge, scaled by (1 - soc).
  double bias_value = 0.0;

  std::string chemistry = "lipo-30ah";
  double q_max_scale = 1.0;
  double r_scale = 1.0;
  double initial_soc = 1.0;

  std::uint64_t seed = 0;

  /// Throws InvalidConfig.
  void validate() const;
  kv::Table to_kv() const;
  static ScenarioSpec from_kv(const kv::Table &table, ScenarioSpec base);
  static ScenarioSpec from_kv(const kv::Table &table) { return from_kv(table, ScenarioSpec{}); }
  static const std::set<std::string> &keys();
};

struct GeneratedFlight {
  ingest::FlightLog log;      ///< measured channels
  std::vector<double> truth;  ///< noise-free voltage including bias
  std::vector<double> load;   ///< noise-free current
  physics::BatteryParams params; ///< battery the truth was simulated with
};

/// Battery parameters after the scenario's overrides.
physics::BatteryParams scenario_params(const ScenarioSpec &spec);

/// Noise-free load profile.
std::vector<double> load_profile(const ScenarioSpec &spec, std::uint64_t load_stream = 0);

/// Deterministic under spec.seed.
GeneratedFlight generate(const ScenarioSpec &spec);

/// Flight k uses q_max scale `scales[k]`, its own noise stream and, when
/// `vary_load` is set, its own load stream. Ids are `<base id>_<k>`.
std::vector<GeneratedFlight> generate_fleet(std::size_t n_flights, const ScenarioSpec &base,
                                            std::span<const double> scales, bool vary_load = false);

} // namespace vphm::synthgen
