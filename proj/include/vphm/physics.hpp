#pragma once

// Reduced-order electrochemical discharge model.
//
// The state keeps the seven-component layout of the lumped electrochemistry
// model: surface and bulk charge for each electrode plus three voltage
// differentials. The right-hand sides are a stand-in, not the full model:
//
//   J_e    = D * (q_b_e / (1 - f) - q_s_e / f)          bulk -> surface flux
//   dq_s_n = -i + J_n,   dq_b_n = -J_n                   negative electrode depletes
//   dq_s_p = +i + J_p,   dq_b_p = -J_p                   positive electrode fills
//   dv_o   = (i * r_ohmic - v_o) / ohmic_tau
//   dv_e   = (eta_scale * asinh(i / (2 * i0_e)) - v_e) / eta_tau
//
// Terminal voltage (per cell) is OCV_p(1 - x_p) - OCV_n(x_n) - v_p - v_n - v_o
// where x_e = q_s_e / (f * q_max) is the surface mole fraction. The current
// input is held constant over each integration step.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vphm/ingest.hpp"
#include "vphm/kv.hpp"

namespace vphm::physics {

struct BatteryState {
  double q_s_p = 0.0; ///< C, positive-electrode surface charge
  double q_b_p = 0.0; ///< C, positive-electrode bulk charge
  double q_s_n = 0.0; ///< C, negative-electrode surface charge
  double q_b_n = 0.0; ///< C, negative-electrode bulk charge
  double v_o = 0.0;   ///< V, ohmic drop
  double v_eta_p = 0.0; ///< V, positive overpotential
  double v_eta_n = 0.0; ///< V, negative overpotential

  static constexpr std::size_t kSize = 7;
  std::array<double, kSize> to_array() const;
  static BatteryState from_array(const std::array<double, kSize> &a);

  /// Charge held by the depleting (negative) electrode.
  double negative_charge() const { return q_s_n + q_b_n; }
  bool operator==(const BatteryState &) const = default;
};

struct BatteryParams {
  double q_max = 108000.0;         ///< C
  double surface_fraction = 0.1;   ///< (0, 1)
  double diffusion_rate = 0.01;    ///< 1/s
  double r_ohmic = 0.003;          ///< ohm
  double ohmic_tau = 1.0;          ///< s
  double eta_tau = 20.0;           ///< s
  double eta_scale = 0.05;         ///< V, Butler-Volmer prefactor
  double i0_p = 20.0;              ///< A, exchange current
  double i0_n = 30.0;              ///< A
  std::array<double, 6> ocv_p{};   ///< polynomial coefficients, ascending powers
  std::array<double, 6> ocv_n{};
  double v_min = 3.0;              ///< V per cell, end-of-discharge cutoff
  int n_cells = 1;

  /// Throws InvalidConfig when an invariant does not hold.
  void validate() const;

  /// Cell open-circuit voltage at equilibrium state of charge.
  double ocv(double soc) const;
};

struct SimResult {
  std::vector<double> times;
  std::vector<double> voltage;
  std::vector<double> soc;
  /// First index whose voltage is below n_cells * v_min.
  std::optional<std::size_t> eod_index;
  BatteryState final_state;
};

/// Known tags: "lipo-30ah". Throws UnknownChemistry otherwise.
BatteryParams default_params(const std::string &chemistry);

kv::Table params_to_kv(const BatteryParams &p);
/// Starts from `base` and overrides any listed key; unknown keys rejected.
BatteryParams params_from_kv(const kv::Table &table, BatteryParams base);

BatteryState equilibrium_state(const BatteryParams &params, double soc);
double state_of_charge(const BatteryState &state, const BatteryParams &params);
double terminal_voltage(const BatteryState &state, const BatteryParams &params);

/// One classical RK4 step with constant applied current (positive = discharge).
BatteryState step(const BatteryState &state, double i_app, double dt, const BatteryParams &params);

SimResult simulate(std::span<const double> current, double dt, const BatteryParams &params,
                   double initial_soc = 1.0);

struct CalibrationResult {
  BatteryParams params;
  double q_max_scale = 1.0;
  std::vector<double> objective_trace; ///< mean squared error after each sweep
};

/// Coordinate-descent least squares over {r_ohmic, q_max scale}; other
/// parameters are left untouched. Throws Degenerate for logs under 50 samples.
CalibrationResult calibrate(const BatteryParams &params, const ingest::FlightLog &log,
                            double initial_soc = 1.0);

} // namespace vphm::physics
