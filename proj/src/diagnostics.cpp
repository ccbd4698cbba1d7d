#include "vphm/diagnostics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <tuple>

#include "vphm/error.hpp"

namespace vphm::diagnostics {

std::string to_string(Verdict v) { return v == Verdict::Ok ? "OK" : "NOK"; }

Verdict verdict_for(double picp, double threshold) {
  return picp >= threshold ? Verdict::Ok : Verdict::Nok;
}

HealthReport diagnose(const cnn::HybridForecast &f, std::span<const double> measured, double z,
                      double threshold) {
  if (measured.size() != f.times.size())
    throw Error(Errc::LengthMismatch, "flight '" + f.flight_id + "': " +
                                          std::to_string(measured.size()) + " measurements for " +
                                          std::to_string(f.times.size()) + " forecast steps");
  require(z >= 0.0, "diagnose: z must be non-negative");
  std::vector<double> lo, hi, ys;
  for (std::size_t k = f.warmup; k < f.times.size(); ++k) {
    const double half = z * f.decomposition[k].sigma_tu;
    lo.push_back(f.corrected_voltage[k] - half);
    hi.push_back(f.corrected_voltage[k] + half);
    ys.push_back(measured[k]);
  }
  HealthReport r;
  r.flight_id = f.flight_id;
  r.picp_score = metrics::picp(lo, hi, ys);
  r.verdict = verdict_for(r.picp_score, threshold);
  r.interval_z = z;
  r.threshold = threshold;
  r.n_points = ys.size();
  return r;
}

HealthReport diagnose(const std::string &flight_id, const std::string &model,
                      std::span<const metrics::PredictiveDistribution> dists,
                      std::span<const double> measured, double z, double threshold) {
  if (measured.size() != dists.size())
    throw Error(Errc::LengthMismatch, "flight '" + flight_id + "': measurements and forecasts differ in length");
  require(z >= 0.0, "diagnose: z must be non-negative");
  const double p_lo = metrics::normal_cdf(-z), p_hi = metrics::normal_cdf(z);
  std::vector<double> lo(dists.size()), hi(dists.size());
  for (std::size_t k = 0; k < dists.size(); ++k) {
    lo[k] = metrics::quantile(dists[k], p_lo);
    hi[k] = metrics::quantile(dists[k], p_hi);
  }
  HealthReport r;
  r.flight_id = flight_id;
  r.model = model;
  r.picp_score = metrics::picp(lo, hi, measured);
  r.verdict = verdict_for(r.picp_score, threshold);
  r.interval_z = z;
  r.threshold = threshold;
  r.n_points = measured.size();
  return r;
}

FleetReport fleet_report(std::span<const HealthReport> reports) {
  require(!reports.empty(), "fleet_report: no reports");
  std::map<std::pair<std::string, std::string>, int> seen;
  for (const auto &r : reports)
    ++seen[{r.flight_id, r.model}];
  FleetReport out;
  for (const auto &r : reports) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", r.picp_score);
    out.rows.push_back({r.flight_id, r.model, buf, r.verdict, seen[{r.flight_id, r.model}] > 1});
  }
  std::stable_sort(out.rows.begin(), out.rows.end(), [](const FleetRow &a, const FleetRow &b) {
    return std::tie(a.flight_id, a.model) < std::tie(b.flight_id, b.model);
  });
  return out;
}

std::string FleetReport::to_table() const {
  std::size_t wf = 9, wm = 5;
  for (const auto &r : rows) {
    wf = std::max(wf, r.flight_id.size());
    wm = std::max(wm, r.model.size());
  }
  auto line = [&](const std::string &f, const std::string &m, const std::string &p, const std::string &v,
                  const std::string &d) {
    std::string s = f + std::string(wf - f.size() + 2, ' ') + m + std::string(wm - m.size() + 2, ' ');
    s += p + std::string(p.size() < 7 ? 7 - p.size() : 1, ' ') + v;
    if (!d.empty())
      s += std::string(v.size() < 5 ? 5 - v.size() : 1, ' ') + d;
    return s + "\n";
  };
  std::string out = line("flight_id", "model", "picp", "verdict", "");
  for (const auto &r : rows)
    out += line(r.flight_id, r.model, r.picp, to_string(r.verdict), r.duplicate ? "duplicate" : "");
  return out;
}

std::string FleetReport::to_csv() const {
  std::string out = "flight_id,model,picp,verdict,duplicate\n";
  for (const auto &r : rows)
    out += r.flight_id + "," + r.model + "," + r.picp + "," + to_string(r.verdict) + "," +
           (r.duplicate ? "1" : "0") + "\n";
  return out;
}

} // namespace vphm::diagnostics
