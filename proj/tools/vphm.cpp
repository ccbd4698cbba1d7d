// vphm: end-to-end command-line front end.
//
//   vphm simulate    --config scenario.kv --out data/
//   vphm train       --data data/ --kind cnn --out cnn.vphm
//   vphm predict     --model cnn.vphm --data data/ --out predictions/
//   vphm evaluate    --model cnn.vphm --model qrf.vphm --data data/ --out report/
//   vphm diagnose    --model cnn.vphm --data data/ --out health.txt
//   vphm sensitivity --data data/ --rates 0.01,0.05,0.1 --out sensitivity.txt
//
// Exit status: 0 success, 2 usage or configuration error, 1 runtime failure.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "vphm/baselines.hpp"
#include "vphm/diagnostics.hpp"
#include "vphm/error.hpp"
#include "vphm/evaluation.hpp"
#include "vphm/ingest.hpp"
#include "vphm/physics.hpp"
#include "vphm/prob_cnn.hpp"
#include "vphm/synthgen.hpp"

namespace fs = std::filesystem;
using namespace vphm;

namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 1;

struct Common {
  std::optional<std::uint64_t> seed_flag;
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
};

Error usage(const std::string &what) { return Error(Errc::InvalidConfig, what); }

kv::Table read_config(const std::string &path, const std::set<std::string> &allowed) {
  if (path.empty())
    return {};
  kv::Table t;
  try {
    t = kv::read_file(path);
  } catch (const Error &e) {
    if (e.code() == Errc::Format)
      throw usage(path + ": " + e.what());
    throw;
  }
  kv::reject_unknown(t, allowed);
  return t;
}

std::set<std::string> with(std::set<std::string> a, const std::vector<std::string> &b) {
  a.insert(b.begin(), b.end());
  return a;
}

void write_text(const fs::path &path, const std::string &text) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw Error(Errc::Io, "cannot write " + path.string());
  f << text;
}

// Flights of a data directory restricted to one side of split.txt when present.
std::vector<ingest::FlightLog> load_split(const fs::path &dir, const std::string &side) {
  if (!fs::is_directory(dir))
    throw Error(Errc::Io, "not a directory: " + dir.string());
  auto logs = ingest::load_flight_dir(dir);
  const fs::path split = dir / "split.txt";
  if (!fs::exists(split) || side.empty())
    return logs;
  std::set<std::string> train;
  std::ifstream f(split);
  std::string kind, id;
  while (f >> kind >> id)
    if (kind == "train")
      train.insert(id);
  auto [tr, te] = ingest::split_by_flight(logs, train);
  return side == "train" ? tr : te;
}

std::vector<ingest::FlightLog> load_inputs(const std::vector<std::string> &paths, const std::string &side) {
  std::vector<ingest::FlightLog> logs;
  for (const auto &p : paths) {
    if (fs::is_directory(p)) {
      auto more = load_split(p, side);
      logs.insert(logs.end(), more.begin(), more.end());
    } else {
      logs.push_back(ingest::load_flight(p));
    }
  }
  return logs;
}

std::vector<std::string> ids_of(const std::vector<ingest::FlightLog> &logs) {
  std::vector<std::string> ids;
  for (const auto &l : logs)
    ids.push_back(l.flight_id);
  return ids;
}

// ---------------------------------------------------------------------------
// Artifacts carry the physics context they were trained against.

struct PhysicsContext {
  std::string chemistry = "lipo-30ah";
  double initial_soc = 1.0;
  std::size_t window_size = 10;

  physics::BatteryParams params() const { return physics::default_params(chemistry); }
  void write(kv::Table &h) const {
    h["physics.chemistry"] = chemistry;
    h["physics.initial_soc"] = kv::format_double(initial_soc);
    h["physics.window_size"] = std::to_string(window_size);
  }
  static PhysicsContext read(const kv::Table &h) {
    PhysicsContext c;
    c.chemistry = kv::get_string(h, "physics.chemistry", c.chemistry);
    c.initial_soc = kv::get_double(h, "physics.initial_soc", c.initial_soc);
    c.window_size = static_cast<std::size_t>(kv::get_int(h, "physics.window_size", 10));
    return c;
  }
};

struct LoadedModel {
  std::string kind;
  PhysicsContext context;
  std::optional<cnn::Model> cnn;
  std::optional<baselines::BaselineModel> baseline;
};

LoadedModel load_model(const std::string &path) {
  const Container c = Container::load(path);
  LoadedModel m;
  m.kind = c.kind;
  m.context = PhysicsContext::read(c.header);
  if (c.kind == "cnn")
    m.cnn = cnn::Model::from_container(c);
  else
    m.baseline = baselines::from_container(c);
  return m;
}

// ---------------------------------------------------------------------------
// simulate

const std::vector<std::string> kFleetKeys = {"n_flights", "n_train", "q_max_scales", "vary_load"};

void cmd_simulate(const Common &common, std::optional<std::size_t> flights) {
  if (common.out.empty())
    throw usage("simulate needs --out");
  const auto cfg = read_config(common.config, with(synthgen::ScenarioSpec::keys(), kFleetKeys));
  auto spec = synthgen::ScenarioSpec::from_kv(cfg);
  if (common.seed_flag)
    spec.seed = *common.seed_flag;
  const long n = flights ? static_cast<long>(*flights) : kv::get_int(cfg, "n_flights", 16);
  if (n < 1)
    throw usage("n_flights must be >= 1");
  const long n_train = kv::get_int(cfg, "n_train", n / 2);
  if (n_train < 0 || n_train > n)
    throw usage("n_train must lie in [0, n_flights]");
  auto scales = kv::get_doubles(cfg, "q_max_scales", {});
  if (scales.empty())
    scales.assign(static_cast<std::size_t>(n), 1.0);
  if (scales.size() != static_cast<std::size_t>(n))
    throw usage("q_max_scales needs one entry per flight");
  const bool vary = kv::get_int(cfg, "vary_load", 1) != 0;

  const auto fleet = synthgen::generate_fleet(static_cast<std::size_t>(n), spec, scales, vary);
  fs::create_directories(common.out);
  std::string split;
  for (std::size_t k = 0; k < fleet.size(); ++k) {
    const auto &g = fleet[k];
    ingest::write_flight_csv(fs::path(common.out) / (g.log.flight_id + ".csv"), g.log);
    split += (static_cast<long>(k) < n_train ? "train " : "test ") + g.log.flight_id + "\n";
    std::cerr << "simulated " << g.log.flight_id << " (" << g.log.size() << " samples)\n";
  }
  write_text(fs::path(common.out) / "split.txt", split);
  auto meta = spec.to_kv();
  meta["n_flights"] = std::to_string(n);
  meta["n_train"] = std::to_string(n_train);
  kv::write_file(fs::path(common.out) / "scenario.kv", meta);
}

// ---------------------------------------------------------------------------
// train

struct TrainFlags {
  std::vector<std::string> data;
  std::string kind;
  std::optional<std::size_t> epochs;
};

const std::vector<std::string> kContextKeys = {"chemistry", "initial_soc"};
const std::vector<std::string> kForestKeys = {"n_estimators", "max_depth", "min_samples_split",
                                              "min_samples_leaf", "max_features", "bootstrap"};

void cmd_train(const Common &common, const TrainFlags &flags) {
  static const std::set<std::string> kinds = {"cnn", "qlr", "qrf", "qgb"};
  if (!kinds.count(flags.kind))
    throw usage("unknown model kind '" + flags.kind + "' (expected cnn, qlr, qrf or qgb)");
  if (common.out.empty() || flags.data.empty())
    throw usage("train needs --data and --out");

  std::set<std::string> allowed(kContextKeys.begin(), kContextKeys.end());
  allowed.insert("window_size");
  if (flags.kind == "cnn")
    allowed = with(allowed, cnn::CnnConfig::keys());
  else if (flags.kind == "qlr")
    allowed = with(allowed, {"max_iterations"});
  else if (flags.kind == "qrf")
    allowed = with(allowed, kForestKeys);
  else
    allowed = with(with(allowed, kForestKeys), {"learning_rate"});
  const auto cfg = read_config(common.config, allowed);

  PhysicsContext ctx;
  ctx.chemistry = kv::get_string(cfg, "chemistry", ctx.chemistry);
  ctx.initial_soc = kv::get_double(cfg, "initial_soc", ctx.initial_soc);
  const long ws = kv::get_int(cfg, "window_size", 10);
  if (ws < 1)
    throw usage("window_size must be >= 1");
  ctx.window_size = static_cast<std::size_t>(ws);
  const auto params = ctx.params();

  const auto logs = load_inputs(flags.data, "train");
  if (logs.empty())
    throw usage("no training flights found");
  std::vector<ingest::WindowedSample> windows;
  for (const auto &log : logs) {
    auto w = cnn::flight_windows(log, params, ctx.window_size, ctx.initial_soc);
    windows.insert(windows.end(), w.begin(), w.end());
  }
  const auto fingerprint = cnn::training_fingerprint(ids_of(logs));
  std::ostringstream log;
  log << "kind " << flags.kind << "\nflights " << logs.size() << "\nwindows " << windows.size()
      << "\nfingerprint " << fingerprint << "\n";

  Container c;
  if (flags.kind == "cnn") {
    auto cc = cnn::CnnConfig::from_kv(cfg);
    cc.window_size = ctx.window_size;
    if (flags.epochs)
      cc.epochs = *flags.epochs;
    auto model = cnn::build(cc, common.seed);
    cnn::train(model, windows, cc, [&](const cnn::TrainProgress &p) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "epoch %zu loss %.6f\n", p.epoch, p.loss);
      log << buf;
      std::cerr << buf;
    });
    model.fingerprint = fingerprint;
    c = model.to_container();
  } else {
    const auto x = baselines::window_features(windows);
    const auto y = baselines::window_targets(windows);
    const auto levels = baselines::default_levels();
    baselines::BaselineModel m;
    if (flags.kind == "qlr") {
      baselines::QlrConfig q;
      q.max_iterations = static_cast<std::size_t>(kv::get_int(cfg, "max_iterations", static_cast<long>(q.max_iterations)));
      m = baselines::qlr_fit(x, y, levels, q);
    } else {
      auto size = [&](const char *key, std::size_t fallback) {
        const long v = kv::get_int(cfg, key, static_cast<long>(fallback));
        if (v < 0)
          throw usage(std::string(key) + " must be non-negative");
        return static_cast<std::size_t>(v);
      };
      if (flags.kind == "qrf") {
        baselines::ForestConfig f;
        f.n_estimators = size("n_estimators", f.n_estimators);
        f.max_depth = size("max_depth", f.max_depth);
        f.min_samples_split = size("min_samples_split", f.min_samples_split);
        f.min_samples_leaf = size("min_samples_leaf", f.min_samples_leaf);
        f.max_features = kv::get_double(cfg, "max_features", f.max_features);
        f.bootstrap = kv::get_int(cfg, "bootstrap", 1) != 0;
        f.seed = common.seed;
        m = baselines::qrf_fit(x, y, f, levels);
      } else {
        baselines::BoostConfig b;
        b.learning_rate = kv::get_double(cfg, "learning_rate", b.learning_rate);
        b.n_estimators = size("n_estimators", b.n_estimators);
        b.max_depth = size("max_depth", b.max_depth);
        b.min_samples_split = size("min_samples_split", b.min_samples_split);
        b.min_samples_leaf = size("min_samples_leaf", b.min_samples_leaf);
        b.max_features = kv::get_double(cfg, "max_features", b.max_features);
        b.seed = common.seed;
        m = baselines::qgb_fit_levels(x, y, b, levels);
      }
    }
    c = baselines::to_container(m);
    c.header["fingerprint"] = fingerprint;
  }
  ctx.write(c.header);
  if (fs::path(common.out).has_parent_path())
    fs::create_directories(fs::path(common.out).parent_path());
  c.save(common.out);
  write_text(common.out + ".log", log.str());
  std::cerr << "wrote " << common.out << "\n";
}

// ---------------------------------------------------------------------------
// predict / evaluate / diagnose

struct InferFlags {
  std::vector<std::string> models;
  std::vector<std::string> data;
  std::size_t mc_samples = 100;
  double z = diagnostics::kDefaultZ;
  double threshold = diagnostics::kDefaultThreshold;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

/// Runs fn(0..n-1) on up to hardware_concurrency workers and returns the
/// results in index order. `done(i)` is called under a lock as each finishes.
template <class Fn, class Done>
auto parallel_map(std::size_t n, Fn fn, Done done) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<std::optional<R>> slots(n);
  std::mutex lock;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      slots[i].emplace(fn(i));
      std::lock_guard g(lock);
      done(i);
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(n, 1));
  std::vector<std::future<void>> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.push_back(std::async(std::launch::async, worker));
  for (auto &f : pool)
    f.get();
  std::vector<R> out;
  for (auto &r : slots)
    out.push_back(std::move(*r));
  return out;
}

evaluation::FlightForecast forecast(const LoadedModel &m, const ingest::FlightLog &log,
                                    const InferFlags &flags, std::uint64_t seed) {
  const auto params = m.context.params();
  if (m.cnn)
    return evaluation::cnn_forecast(*m.cnn, log, params, {m.context.initial_soc, flags.mc_samples, seed});
  return evaluation::baseline_forecast(*m.baseline, log, params, m.context.window_size,
                                       m.context.initial_soc);
}

void cmd_predict(const Common &common, const InferFlags &flags) {
  if (flags.models.size() != 1 || flags.data.empty() || common.out.empty())
    throw usage("predict needs one --model, --data and --out");
  const auto model = load_model(flags.models.front());
  const auto logs = load_inputs(flags.data, "");
  if (logs.empty())
    throw usage("no flights found");
  const auto params = model.context.params();
  for (const auto &log : logs) {
    std::string out;
    if (model.cnn) {
      const auto f = cnn::forecast_flight(*model.cnn, log, params,
                                          {model.context.initial_soc, flags.mc_samples, common.seed});
      out = "time_s,physics_v,corrected_v,sigma_a,sigma_e,sigma_tu,uncorrected\n";
      for (std::size_t k = 0; k < f.times.size(); ++k) {
        const auto &d = f.decomposition[k];
        out += fmt(f.times[k]) + "," + fmt(f.physics_voltage[k]) + "," + fmt(f.corrected_voltage[k]) + "," +
               fmt(d.sigma_a) + "," + fmt(d.sigma_e) + "," + fmt(d.sigma_tu) + "," +
               (f.uncorrected[k] ? "1" : "0") + "\n";
      }
    } else {
      const auto f = forecast(model, log, flags, common.seed);
      out = "time_s,q_0.025,q_0.5,q_0.975\n";
      const std::size_t warm = model.context.window_size - 1;
      for (std::size_t k = 0; k < f.dists.size(); ++k)
        out += fmt(log.samples[k + warm].time) + "," + fmt(metrics::quantile(f.dists[k], 0.025)) + "," +
               fmt(metrics::quantile(f.dists[k], 0.5)) + "," + fmt(metrics::quantile(f.dists[k], 0.975)) + "\n";
    }
    write_text(fs::path(common.out) / (log.flight_id + ".csv"), out);
    std::cerr << "predicted " << log.flight_id << "\n";
  }
}

void cmd_evaluate(const Common &common, const InferFlags &flags) {
  if (flags.models.empty() || flags.data.empty() || common.out.empty())
    throw usage("evaluate needs --model, --data and --out");
  std::vector<LoadedModel> models;
  for (const auto &p : flags.models)
    models.push_back(load_model(p));
  const auto logs = load_inputs(flags.data, "test");
  if (logs.empty())
    throw usage("no test flights found");

  std::vector<evaluation::ScoreRow> rows;
  std::vector<evaluation::CalibrationSeries> curves;
  {
    const auto &ctx = models.front().context;
    std::vector<evaluation::FlightForecast> fs_;
    for (const auto &log : logs)
      fs_.push_back(evaluation::physics_forecast(log, ctx.params(), ctx.window_size, ctx.initial_soc));
    auto r = evaluation::score_model(fs_);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto fcs = parallel_map(
        logs.size(), [&](std::size_t k) { return forecast(models[i], logs[k], flags, common.seed); },
        [&](std::size_t k) { std::cerr << "evaluated " << models[i].kind << " on " << logs[k].flight_id << "\n"; });
    auto r = evaluation::score_model(fcs);
    rows.insert(rows.end(), r.begin(), r.end());
    curves.push_back(evaluation::calibration_series(fcs));
  }
  const auto table = evaluation::format_scores(rows);
  write_text(fs::path(common.out) / "scores.txt", table);
  write_text(fs::path(common.out) / "calibration.txt", evaluation::format_calibration(curves));
  std::cout << table;
}

void cmd_diagnose(const Common &common, const InferFlags &flags) {
  if (flags.models.empty() || flags.data.empty())
    throw usage("diagnose needs --model and --data");
  const auto logs = load_inputs(flags.data, "");
  if (logs.empty())
    throw usage("no flights found");
  std::vector<diagnostics::HealthReport> reports;
  for (const auto &path : flags.models) {
    const auto m = load_model(path);
    auto one = [&](std::size_t k) {
      const auto &log = logs[k];
      if (m.cnn) {
        const auto f = cnn::forecast_flight(*m.cnn, log, m.context.params(),
                                            {m.context.initial_soc, flags.mc_samples, common.seed});
        return diagnostics::diagnose(f, log.voltages(), flags.z, flags.threshold);
      }
      const auto f = forecast(m, log, flags, common.seed);
      return diagnostics::diagnose(log.flight_id, m.kind, f.dists, f.measured, flags.z, flags.threshold);
    };
    for (auto &r : parallel_map(logs.size(), one, [&](std::size_t k) {
           std::cerr << "diagnosed " << logs[k].flight_id << " with " << m.kind << "\n";
         }))
      reports.push_back(std::move(r));
  }
  const auto report = diagnostics::fleet_report(reports);
  std::cout << report.to_table();
  if (!common.out.empty()) {
    write_text(common.out, report.to_table());
    write_text(common.out + ".csv", report.to_csv());
  }
}

// ---------------------------------------------------------------------------
// sensitivity

void cmd_sensitivity(const Common &common, const std::vector<std::string> &data, const std::string &rates_text,
                     std::optional<std::size_t> epochs) {
  if (data.empty() || common.out.empty())
    throw usage("sensitivity needs --data and --out");
  std::set<std::string> allowed = with({"chemistry", "initial_soc"}, cnn::CnnConfig::keys());
  const auto cfg = read_config(common.config, allowed);
  auto base = cnn::CnnConfig::from_kv(cfg);
  if (epochs)
    base.epochs = *epochs;
  std::vector<double> rates;
  for (const auto &r : kv::split_list(rates_text)) {
    try {
      rates.push_back(std::stod(r));
    } catch (const std::exception &) {
      throw usage("bad rate '" + r + "'");
    }
    if (!(rates.back() >= 0.0 && rates.back() < 1.0))
      throw usage("rates must lie in [0,1)");
  }
  if (rates.empty())
    throw usage("need at least one rate");

  cnn::SensitivityData sd;
  sd.params = physics::default_params(kv::get_string(cfg, "chemistry", "lipo-30ah"));
  sd.initial_soc = kv::get_double(cfg, "initial_soc", 1.0);
  for (const auto &log : load_inputs(data, "train")) {
    auto w = cnn::flight_windows(log, sd.params, base.window_size, sd.initial_soc);
    sd.train.insert(sd.train.end(), w.begin(), w.end());
  }
  sd.eval = load_inputs(data, "test");
  if (sd.train.empty() || sd.eval.empty())
    throw usage("need training and test flights");
  const auto rows = cnn::dropout_sensitivity(base, rates, sd, common.seed);
  std::string out = "rate      mean_sigma_e  calib_area  sharpness   crps\n";
  for (const auto &r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-9.3f %-13.6f %-11.4f %-11.6f %.6f\n", r.rate, r.mean_sigma_e,
                  r.calibration, r.sharpness, r.crps);
    out += buf;
  }
  write_text(common.out, out);
  std::cout << out;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Battery end-of-discharge voltage prediction with hybrid physics and probabilistic CNN"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App *sub) {
    sub->add_option("--seed", common.seed_flag, "Random seed");
    sub->add_option("--config", common.config, "Key-value config file");
    sub->add_option("--out", common.out, "Output path");
  };

  std::optional<std::size_t> flights, epochs;
  TrainFlags train;
  InferFlags infer;
  std::string rates = "0.01,0.05,0.1,0.15,0.2";

  auto *sim = app.add_subcommand("simulate", "Generate a synthetic flight fleet");
  add_common(sim);
  sim->add_option("--flights", flights, "Number of flights (overrides n_flights)");

  auto *tr = app.add_subcommand("train", "Train a model on the training split");
  add_common(tr);
  tr->add_option("--data", train.data, "Flight directory or CSV files")->required();
  tr->add_option("--kind", train.kind, "cnn, qlr, qrf or qgb")->required();
  tr->add_option("--epochs", epochs, "CNN epochs (overrides config)");

  auto *pr = app.add_subcommand("predict", "Write per-step forecasts");
  add_common(pr);
  pr->add_option("--model", infer.models, "Model artifact")->required();
  pr->add_option("--data", infer.data, "Flight directory or CSV files")->required();
  pr->add_option("--mc-samples", infer.mc_samples, "Monte Carlo passes");

  auto *ev = app.add_subcommand("evaluate", "Score models on the test split");
  add_common(ev);
  ev->add_option("--model", infer.models, "Model artifacts")->required();
  ev->add_option("--data", infer.data, "Flight directory or CSV files")->required();
  ev->add_option("--mc-samples", infer.mc_samples, "Monte Carlo passes");

  auto *dg = app.add_subcommand("diagnose", "Health verdicts from interval coverage");
  add_common(dg);
  dg->add_option("--model", infer.models, "Model artifacts")->required();
  dg->add_option("--data", infer.data, "Flight directory or CSV files")->required();
  dg->add_option("--mc-samples", infer.mc_samples, "Monte Carlo passes");
  dg->add_option("--z", infer.z, "Interval half-width in standard deviations");
  dg->add_option("--threshold", infer.threshold, "Minimum coverage for an OK verdict");

  auto *se = app.add_subcommand("sensitivity", "Dropout-rate sensitivity table");
  add_common(se);
  se->add_option("--data", train.data, "Flight directory")->required();
  se->add_option("--rates", rates, "Comma-separated dropout rates");
  se->add_option("--epochs", epochs, "CNN epochs (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    common.seed = common.seed_flag.value_or(0);
    train.epochs = epochs;
    if (sim->parsed())
      cmd_simulate(common, flights);
    else if (tr->parsed())
      cmd_train(common, train);
    else if (pr->parsed())
      cmd_predict(common, infer);
    else if (ev->parsed())
      cmd_evaluate(common, infer);
    else if (dg->parsed())
      cmd_diagnose(common, infer);
    else if (se->parsed())
      cmd_sensitivity(common, train.data, rates, epochs);
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
    case Errc::InvalidConfig:
    case Errc::Io:
    case Errc::UnknownChemistry:
    case Errc::UnknownFlight:
      return kUsage;
    default:
      return kRuntime;
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return 0;
}
