#include "vphm/physics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "vphm/error.hpp"

namespace vphm::physics {

namespace {

// Cell OCV fitted to a generic Li-Po discharge table; the negative electrode
// is linear and the positive polynomial is the cell curve plus it.
constexpr std::array<double, 6> kLipoOcvP = {3.399212, 7.947628, -36.514203,
                                             75.786804, -71.493848, 25.185028};
constexpr std::array<double, 6> kLipoOcvN = {0.35, -0.25, 0.0, 0.0, 0.0, 0.0};

double poly(const std::array<double, 6> &c, double x) {
  double acc = 0.0;
  for (std::size_t k = c.size(); k-- > 0;)
    acc = acc * x + c[k];
  return acc;
}

using Deriv = std::array<double, BatteryState::kSize>;

Deriv rhs(const Deriv &x, double i, const BatteryParams &p) {
  const double f = p.surface_fraction;
  const double jp = p.diffusion_rate * (x[1] / (1.0 - f) - x[0] / f);
  const double jn = p.diffusion_rate * (x[3] / (1.0 - f) - x[2] / f);
  const double eta_p = p.eta_scale * std::asinh(i / (2.0 * p.i0_p));
  const double eta_n = p.eta_scale * std::asinh(i / (2.0 * p.i0_n));
  return {i + jp,
          -jp,
          -i + jn,
          -jn,
          (i * p.r_ohmic - x[4]) / p.ohmic_tau,
          (eta_p - x[5]) / p.eta_tau,
          (eta_n - x[6]) / p.eta_tau};
}

Deriv axpy(const Deriv &x, double a, const Deriv &k) {
  Deriv out;
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = x[j] + a * k[j];
  return out;
}

double mse(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

} // namespace

std::array<double, BatteryState::kSize> BatteryState::to_array() const {
  return {q_s_p, q_b_p, q_s_n, q_b_n, v_o, v_eta_p, v_eta_n};
}

BatteryState BatteryState::from_array(const std::array<double, kSize> &a) {
  return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
}

void BatteryParams::validate() const {
  auto check = [](bool ok, const char *what) {
    if (!ok)
      throw Error(Errc::InvalidConfig, what);
  };
  check(q_max > 0.0, "q_max must be positive");
  check(surface_fraction > 0.0 && surface_fraction < 1.0, "surface_fraction must lie in (0,1)");
  check(diffusion_rate > 0.0, "diffusion_rate must be positive");
  check(r_ohmic >= 0.0, "r_ohmic must be non-negative");
  check(ohmic_tau > 0.0 && eta_tau > 0.0, "time constants must be positive");
  check(i0_p > 0.0 && i0_n > 0.0, "exchange currents must be positive");
  check(v_min > 0.0, "v_min must be positive");
  check(n_cells >= 1, "n_cells must be >= 1");
}

double BatteryParams::ocv(double soc) const {
  const double x = std::clamp(soc, 0.0, 1.0);
  return poly(ocv_p, x) - poly(ocv_n, x);
}

BatteryParams default_params(const std::string &chemistry) {
  if (chemistry == "lipo-30ah") {
    BatteryParams p;
    p.q_max = 30.0 * 3600.0;
    p.ocv_p = kLipoOcvP;
    p.ocv_n = kLipoOcvN;
    return p;
  }
  throw Error(Errc::UnknownChemistry, "unknown chemistry '" + chemistry + "'");
}

kv::Table params_to_kv(const BatteryParams &p) {
  kv::Table t;
  auto put = [&](const std::string &k, double v) { t[k] = kv::format_double(v); };
  put("q_max", p.q_max);
  put("surface_fraction", p.surface_fraction);
  put("diffusion_rate", p.diffusion_rate);
  put("r_ohmic", p.r_ohmic);
  put("ohmic_tau", p.ohmic_tau);
  put("eta_tau", p.eta_tau);
  put("eta_scale", p.eta_scale);
  put("i0_p", p.i0_p);
  put("i0_n", p.i0_n);
  put("v_min", p.v_min);
  t["n_cells"] = std::to_string(p.n_cells);
  std::string sp, sn;
  for (std::size_t k = 0; k < 6; ++k) {
    sp += (k ? ", " : "") + kv::format_double(p.ocv_p[k]);
    sn += (k ? ", " : "") + kv::format_double(p.ocv_n[k]);
  }
  t["ocv_p"] = sp;
  t["ocv_n"] = sn;
  return t;
}

BatteryParams params_from_kv(const kv::Table &t, BatteryParams p) {
  kv::reject_unknown(t, {"chemistry", "q_max", "surface_fraction", "diffusion_rate", "r_ohmic",
                         "ohmic_tau", "eta_tau", "eta_scale", "i0_p", "i0_n", "v_min",
                         "n_cells", "ocv_p", "ocv_n"});
  if (t.count("chemistry"))
    p = default_params(t.at("chemistry"));
  p.q_max = kv::get_double(t, "q_max", p.q_max);
  p.surface_fraction = kv::get_double(t, "surface_fraction", p.surface_fraction);
  p.diffusion_rate = kv::get_double(t, "diffusion_rate", p.diffusion_rate);
  p.r_ohmic = kv::get_double(t, "r_ohmic", p.r_ohmic);
  p.ohmic_tau = kv::get_double(t, "ohmic_tau", p.ohmic_tau);
  p.eta_tau = kv::get_double(t, "eta_tau", p.eta_tau);
  p.eta_scale = kv::get_double(t, "eta_scale", p.eta_scale);
  p.i0_p = kv::get_double(t, "i0_p", p.i0_p);
  p.i0_n = kv::get_double(t, "i0_n", p.i0_n);
  p.v_min = kv::get_double(t, "v_min", p.v_min);
  p.n_cells = static_cast<int>(kv::get_int(t, "n_cells", p.n_cells));
  for (auto [key, dst] : {std::pair{"ocv_p", &p.ocv_p}, std::pair{"ocv_n", &p.ocv_n}}) {
    if (!t.count(key))
      continue;
    auto v = kv::get_doubles(t, key, {});
    if (v.size() != 6)
      throw Error(Errc::InvalidConfig, std::string(key) + " needs 6 coefficients");
    std::copy(v.begin(), v.end(), dst->begin());
  }
  p.validate();
  return p;
}

BatteryState equilibrium_state(const BatteryParams &p, double soc) {
  const double f = p.surface_fraction;
  const double qn = soc * p.q_max;
  const double qp = (1.0 - soc) * p.q_max;
  return {f * qp, (1.0 - f) * qp, f * qn, (1.0 - f) * qn, 0.0, 0.0, 0.0};
}

double state_of_charge(const BatteryState &s, const BatteryParams &p) {
  return s.negative_charge() / p.q_max;
}

double terminal_voltage(const BatteryState &s, const BatteryParams &p) {
  const double fq = p.surface_fraction * p.q_max;
  const double x_p = std::clamp(1.0 - s.q_s_p / fq, 0.0, 1.0);
  const double x_n = std::clamp(s.q_s_n / fq, 0.0, 1.0);
  const double cell = poly(p.ocv_p, x_p) - poly(p.ocv_n, x_n) - s.v_eta_p - s.v_eta_n - s.v_o;
  return static_cast<double>(p.n_cells) * cell;
}

BatteryState step(const BatteryState &state, double i_app, double dt, const BatteryParams &p) {
  require(dt > 0.0 && std::isfinite(dt), "step: dt must be positive");
  const Deriv x = state.to_array();
  const Deriv k1 = rhs(x, i_app, p);
  const Deriv k2 = rhs(axpy(x, 0.5 * dt, k1), i_app, p);
  const Deriv k3 = rhs(axpy(x, 0.5 * dt, k2), i_app, p);
  const Deriv k4 = rhs(axpy(x, dt, k3), i_app, p);
  Deriv out;
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = x[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    if (!std::isfinite(out[j]))
      throw Error(Errc::NonFiniteState, "state component " + std::to_string(j) + " not finite");
  }
  return BatteryState::from_array(out);
}

SimResult simulate(std::span<const double> current, double dt, const BatteryParams &params,
                   double initial_soc) {
  require(!current.empty(), "simulate: current profile must be non-empty");
  require(initial_soc > 0.0 && initial_soc <= 1.0, "simulate: initial_soc must lie in (0,1]");
  SimResult r;
  r.times.reserve(current.size());
  r.voltage.reserve(current.size());
  r.soc.reserve(current.size());
  const double cutoff = params.v_min * static_cast<double>(params.n_cells);
  BatteryState s = equilibrium_state(params, initial_soc);
  for (std::size_t k = 0; k < current.size(); ++k) {
    const double v = terminal_voltage(s, params);
    if (!std::isfinite(v))
      throw Error(Errc::NonFiniteState, "terminal voltage not finite at index " + std::to_string(k));
    r.times.push_back(static_cast<double>(k) * dt);
    r.voltage.push_back(v);
    r.soc.push_back(state_of_charge(s, params));
    if (!r.eod_index && v < cutoff)
      r.eod_index = k;
    s = step(s, current[k], dt, params);
  }
  r.final_state = s;
  return r;
}

CalibrationResult calibrate(const BatteryParams &params, const ingest::FlightLog &log,
                            double initial_soc) {
  if (log.size() < 50)
    throw Error(Errc::Degenerate, "calibration needs at least 50 samples");
  const auto current = log.currents();
  const auto measured = log.voltages();
  const double q0 = params.q_max;

  CalibrationResult out;
  out.params = params;

  auto objective = [&](double r_ohmic, double scale) {
    BatteryParams p = params;
    p.r_ohmic = r_ohmic;
    p.q_max = q0 * scale;
    try {
      return mse(simulate(current, log.sample_period, p, initial_soc).voltage, measured);
    } catch (const Error &) {
      return std::numeric_limits<double>::infinity();
    }
  };

  // Golden-section search on log(value) within a factor-2 bracket.
  auto line_search = [](double x0, const std::function<double(double)> &f) {
    constexpr double g = 0.6180339887498949;
    double a = std::log(x0) - std::log(2.0), b = std::log(x0) + std::log(2.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(std::exp(c)), fd = f(std::exp(d));
    for (int it = 0; it < 60 && b - a > 1e-9; ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = f(std::exp(c));
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = f(std::exp(d));
      }
    }
    return std::exp(0.5 * (a + b));
  };

  double r = params.r_ohmic > 0.0 ? params.r_ohmic : 1e-3;
  double scale = 1.0;
  double best = objective(r, scale);
  out.objective_trace.push_back(best);
  for (int sweep = 0; sweep < 40; ++sweep) {
    const double before = best;
    double r_try = line_search(r, [&](double v) { return objective(v, scale); });
    if (double f = objective(r_try, scale); f < best) {
      r = r_try;
      best = f;
    }
    double s_try = line_search(scale, [&](double v) { return objective(r, v); });
    if (double f = objective(r, s_try); f < best) {
      scale = s_try;
      best = f;
    }
    out.objective_trace.push_back(best);
    if (before - best <= 1e-12 * std::max(before, 1e-300))
      break;
  }
  out.params.r_ohmic = r;
  out.params.q_max = q0 * scale;
  out.q_max_scale = scale;
  return out;
}

} // namespace vphm::physics
