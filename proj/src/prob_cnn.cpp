#include "vphm/prob_cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "vphm/error.hpp"

namespace vphm::cnn {

namespace {

constexpr std::size_t kInferenceChunk = 4096;

std::string join_sizes(const std::vector<std::size_t> &v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? ", " : "") + std::to_string(v[i]);
  return s;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// [B, 2, L] normalized input batch from row-major (current, voltage) windows.
nn::Tensor input_batch(const Model &m, std::span<const ingest::WindowedSample> ws) {
  const std::size_t L = m.config.window_size;
  nn::Tensor x({ws.size(), 2, L});
  for (std::size_t b = 0; b < ws.size(); ++b) {
    if (ws[b].inputs.size() != 2 * L)
      throw Error(Errc::ShapeMismatch, "window has " + std::to_string(ws[b].inputs.size()) +
                                           " values, model expects " + std::to_string(2 * L));
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t l = 0; l < L; ++l)
        x[(b * 2 + c) * L + l] =
            (ws[b].inputs[l * 2 + c] - m.norm.input_mean[c]) / m.norm.input_std[c];
  }
  return x;
}

Normalization fit_normalization(std::span<const ingest::WindowedSample> ws) {
  Normalization n;
  double s[2] = {0, 0}, ss[2] = {0, 0}, t = 0, tt = 0;
  std::size_t rows = 0;
  for (const auto &w : ws) {
    for (std::size_t l = 0; l < w.window_size; ++l)
      for (std::size_t c = 0; c < 2; ++c) {
        const double v = w.inputs[l * 2 + c];
        s[c] += v;
        ss[c] += v * v;
      }
    rows += w.window_size;
    t += w.target;
    tt += w.target * w.target;
  }
  auto stdev = [](double sum, double sq, double count) {
    const double mean = sum / count;
    const double var = std::max(sq / count - mean * mean, 0.0);
    const double sd = std::sqrt(var);
    return sd > 1e-12 ? sd : 1.0;
  };
  for (std::size_t c = 0; c < 2; ++c) {
    n.input_mean[c] = s[c] / static_cast<double>(rows);
    n.input_std[c] = stdev(s[c], ss[c], static_cast<double>(rows));
  }
  const double count = static_cast<double>(ws.size());
  n.target_mean = t / count;
  n.target_std = stdev(t, tt, count);
  return n;
}

} // namespace

// ---------------------------------------------------------------------------
// Config

const std::vector<std::string> &CnnConfig::keys() {
  static const std::vector<std::string> k = {"window_size", "conv_layers", "filters",
                                             "kernel", "fc_nodes", "dropout_rate",
                                             "epochs", "learning_rate", "mc_samples",
                                             "batch_size"};
  return k;
}

void CnnConfig::validate() const {
  auto bad = [](const std::string &what) { throw Error(Errc::InvalidConfig, what); };
  if (window_size == 0)
    bad("window_size must be >= 1");
  if (conv_layers == 0 || filters == 0)
    bad("need at least one conv layer with at least one filter");
  if (kernel == 0 || kernel % 2 == 0)
    bad("same padding needs an odd kernel, got " + std::to_string(kernel));
  if (fc_nodes.empty() || std::find(fc_nodes.begin(), fc_nodes.end(), 0u) != fc_nodes.end())
    bad("fc_nodes must be a non-empty list of positive sizes");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    bad("dropout_rate must lie in [0,1)");
  if (!(learning_rate > 0.0))
    bad("learning_rate must be positive");
  if (mc_samples == 0 || batch_size == 0)
    bad("mc_samples and batch_size must be >= 1");
}

kv::Table CnnConfig::to_kv() const {
  return {{"window_size", std::to_string(window_size)},
          {"conv_layers", std::to_string(conv_layers)},
          {"filters", std::to_string(filters)},
          {"kernel", std::to_string(kernel)},
          {"fc_nodes", join_sizes(fc_nodes)},
          {"dropout_rate", kv::format_double(dropout_rate)},
          {"epochs", std::to_string(epochs)},
          {"learning_rate", kv::format_double(learning_rate)},
          {"mc_samples", std::to_string(mc_samples)},
          {"batch_size", std::to_string(batch_size)}};
}

CnnConfig CnnConfig::from_kv(const kv::Table &t, CnnConfig c) {
  auto size = [&](const char *key, std::size_t fallback) {
    long v = kv::get_int(t, key, static_cast<long>(fallback));
    if (v < 0)
      throw Error(Errc::InvalidConfig, std::string(key) + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  c.window_size = size("window_size", c.window_size);
  c.conv_layers = size("conv_layers", c.conv_layers);
  c.filters = size("filters", c.filters);
  c.kernel = size("kernel", c.kernel);
  c.epochs = size("epochs", c.epochs);
  c.mc_samples = size("mc_samples", c.mc_samples);
  c.batch_size = size("batch_size", c.batch_size);
  c.dropout_rate = kv::get_double(t, "dropout_rate", c.dropout_rate);
  c.learning_rate = kv::get_double(t, "learning_rate", c.learning_rate);
  if (t.count("fc_nodes")) {
    c.fc_nodes.clear();
    for (double v : kv::get_doubles(t, "fc_nodes", {})) {
      if (v < 1.0 || v != std::floor(v))
        throw Error(Errc::InvalidConfig, "fc_nodes entries must be positive integers");
      c.fc_nodes.push_back(static_cast<std::size_t>(v));
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Model

Model build(const CnnConfig &config, std::uint64_t seed) {
  config.validate();
  using nn::LayerKind;
  std::vector<nn::LayerSpec> specs;
  std::size_t channels = 2;
  for (std::size_t i = 0; i < config.conv_layers; ++i) {
    nn::LayerSpec conv;
    conv.kind = LayerKind::Conv1d;
    conv.in_channels = channels;
    conv.filters = config.filters;
    conv.kernel = config.kernel;
    specs.push_back(conv);
    specs.push_back({.kind = LayerKind::Relu});
    specs.push_back({.kind = LayerKind::Dropout, .rate = config.dropout_rate});
    channels = config.filters;
  }
  specs.push_back({.kind = LayerKind::AdaptiveAvgPool});
  std::size_t features = channels;
  for (std::size_t nodes : config.fc_nodes) {
    specs.push_back({.kind = LayerKind::Dense, .in_features = features, .out_features = nodes});
    specs.push_back({.kind = LayerKind::Relu});
    specs.push_back({.kind = LayerKind::Dropout, .rate = config.dropout_rate});
    features = nodes;
  }
  specs.push_back({.kind = LayerKind::GaussianHead, .in_features = features, .out_features = 2});

  Model m;
  m.config = config;
  m.seed = seed;
  nn::Rng rng(mix_seed(seed, 0));
  m.net = nn::Sequential(std::move(specs), rng);
  return m;
}

Container Model::to_container() const {
  Container c;
  c.kind = "cnn";
  for (const auto &[k, v] : config.to_kv())
    c.header["config." + k] = v;
  c.header["seed"] = std::to_string(seed);
  c.header["fingerprint"] = fingerprint.empty() ? "-" : fingerprint;
  c.header["trained"] = trained ? "1" : "0";
  net.save(c);
  c.add("norm.input_mean", {2}, {norm.input_mean[0], norm.input_mean[1]});
  c.add("norm.input_std", {2}, {norm.input_std[0], norm.input_std[1]});
  c.add("norm.target", {2}, {norm.target_mean, norm.target_std});
  return c;
}

void Model::save(const std::filesystem::path &path) const { to_container().save(path); }

Model Model::from_container(const Container &c) {
  if (c.kind != "cnn")
    throw Error(Errc::Format, "artifact kind '" + c.kind + "' is not a cnn model");
  kv::Table cfg;
  for (const auto &[k, v] : c.header)
    if (k.rfind("config.", 0) == 0)
      cfg[k.substr(7)] = v;
  Model m;
  m.config = CnnConfig::from_kv(cfg);
  m.config.validate();
  m.seed = std::stoull(kv::get_string(c.header, "seed", "0"));
  m.fingerprint = kv::get_string(c.header, "fingerprint", "-");
  if (m.fingerprint == "-")
    m.fingerprint.clear();
  m.trained = kv::get_string(c.header, "trained", "0") == "1";
  m.net = nn::Sequential::load(c);
  const auto &im = c.get("norm.input_mean").data;
  const auto &is = c.get("norm.input_std").data;
  const auto &tg = c.get("norm.target").data;
  if (im.size() != 2 || is.size() != 2 || tg.size() != 2)
    throw Error(Errc::Format, "malformed normalization block");
  m.norm.input_mean[0] = im[0];
  m.norm.input_mean[1] = im[1];
  m.norm.input_std[0] = is[0];
  m.norm.input_std[1] = is[1];
  m.norm.target_mean = tg[0];
  m.norm.target_std = tg[1];
  return m;
}

Model Model::load(const std::filesystem::path &path) { return from_container(Container::load(path)); }

// ---------------------------------------------------------------------------
// Training

TrainResult train(Model &model, std::span<const ingest::WindowedSample> windows,
                  const CnnConfig &config, const std::function<void(const TrainProgress &)> &on_epoch) {
  require(!windows.empty(), "train: training set must be non-empty");
  config.validate();
  model.net.set_dropout_rate(config.dropout_rate);
  model.config.dropout_rate = config.dropout_rate;
  model.config.epochs = config.epochs;
  model.config.learning_rate = config.learning_rate;
  model.config.batch_size = config.batch_size;
  model.config.mc_samples = config.mc_samples;
  model.norm = fit_normalization(windows);

  nn::Rng rng(mix_seed(model.seed, 1));
  nn::AdamState adam;
  adam.learning_rate = config.learning_rate;
  const auto params = model.net.parameters();

  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<ingest::WindowedSample> batch;
  std::vector<double> targets;

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0, bi = 0; start < order.size(); start += config.batch_size, ++bi) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      targets.clear();
      for (std::size_t k = start; k < end; ++k) {
        const auto &w = windows[order[k]];
        batch.push_back(w);
        targets.push_back((w.target - model.norm.target_mean) / model.norm.target_std);
      }
      nn::Var x = nn::constant(input_batch(model, batch));
      nn::Var loss = nn::nll(model.net.forward(x, rng, true), targets);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "loss %g at epoch %zu, batch %zu", lv, epoch, bi);
        throw Error(Errc::NonFiniteLoss, buf);
      }
      total += lv * static_cast<double>(end - start);
      nn::backward(loss);
      nn::adam_step(params, adam);
      for (auto p : params)
        p.zero_grad();
    }
    result.epoch_loss.push_back(total / static_cast<double>(windows.size()));
    if (on_epoch)
      on_epoch({epoch, result.epoch_loss.back()});
  }
  model.trained = true;
  return result;
}

// ---------------------------------------------------------------------------
// Inference

std::vector<GaussianPrediction> predict_once(const Model &model,
                                             std::span<const ingest::WindowedSample> windows,
                                             nn::Rng &rng, bool dropout_active) {
  std::vector<GaussianPrediction> out;
  out.reserve(windows.size());
  const double ts = model.norm.target_std, tm = model.norm.target_mean;
  for (std::size_t start = 0; start < windows.size(); start += kInferenceChunk) {
    const std::size_t end = std::min(windows.size(), start + kInferenceChunk);
    nn::Var x = nn::constant(input_batch(model, windows.subspan(start, end - start)));
    const auto raw = model.net.forward(x, rng, dropout_active);
    for (const auto &g : nn::gaussian_head_forward(raw.value()))
      out.push_back({g.mu * ts + tm, g.sigma2 * ts * ts});
  }
  return out;
}

UncertaintyDecomposition decompose(std::span<const double> mu, std::span<const double> var) {
  require(!mu.empty() && mu.size() == var.size(), "decompose: need matching non-empty samples");
  const double n = static_cast<double>(mu.size());
  // Deviations from the first pass keep identical passes at exactly zero spread.
  double shift = 0.0, a2 = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    shift += mu[i] - mu[0];
    a2 += var[i];
  }
  shift /= n;
  a2 /= n;
  double e2 = 0.0;
  for (double m : mu)
    e2 += (m - mu[0] - shift) * (m - mu[0] - shift);
  e2 /= n;
  return {mu[0] + shift, std::sqrt(a2), std::sqrt(e2), std::sqrt(e2 + a2)};
}

std::vector<UncertaintyDecomposition> mc_infer(const Model &model,
                                               std::span<const ingest::WindowedSample> windows,
                                               std::size_t n, std::uint64_t seed) {
  require(n >= 1, "mc_infer: need at least one pass");
  const std::size_t W = windows.size();
  std::vector<double> mu(W * n), var(W * n); // [window][pass]
  nn::Rng rng(mix_seed(seed, 2));
  for (std::size_t pass = 0; pass < n; ++pass) {
    const auto preds = predict_once(model, windows, rng, true);
    for (std::size_t w = 0; w < W; ++w) {
      mu[w * n + pass] = preds[w].mu;
      var[w * n + pass] = preds[w].sigma2;
    }
  }
  std::vector<UncertaintyDecomposition> out(W);
  for (std::size_t w = 0; w < W; ++w)
    out[w] = decompose(std::span(mu).subspan(w * n, n), std::span(var).subspan(w * n, n));
  return out;
}

UncertaintyDecomposition mc_infer(const Model &model, std::span<const double> window_inputs,
                                  std::size_t n, std::uint64_t seed) {
  ingest::WindowedSample w;
  w.window_size = model.config.window_size;
  w.inputs.assign(window_inputs.begin(), window_inputs.end());
  return mc_infer(model, std::span(&w, 1), n, seed).front();
}

// ---------------------------------------------------------------------------
// Hybrid forecast

std::vector<ingest::WindowedSample> flight_windows(const ingest::FlightLog &log,
                                                   const physics::BatteryParams &params,
                                                   std::size_t window_size, double initial_soc) {
  const auto sim = physics::simulate(log.currents(), log.sample_period, params, initial_soc);
  return ingest::make_windows(log, sim.voltage, window_size, 1);
}

std::vector<metrics::PredictiveDistribution> HybridForecast::distributions() const {
  std::vector<metrics::PredictiveDistribution> out;
  out.reserve(times.size() - warmup);
  for (std::size_t k = warmup; k < times.size(); ++k)
    out.emplace_back(metrics::Gaussian{corrected_voltage[k], decomposition[k].sigma_tu});
  return out;
}

std::vector<double> HybridForecast::corrected_slice(std::span<const double> all) const {
  if (all.size() != times.size())
    throw Error(Errc::LengthMismatch, "series not aligned with forecast");
  return {all.begin() + static_cast<std::ptrdiff_t>(warmup), all.end()};
}

HybridForecast forecast_flight(const Model &model, const ingest::FlightLog &log,
                               const physics::BatteryParams &params, const ForecastOptions &opt) {
  for (std::size_t k = 0; k < log.samples.size(); ++k) {
    const auto &s = log.samples[k];
    const bool finite = std::isfinite(s.time) && std::isfinite(s.current) && std::isfinite(s.voltage);
    const bool ordered = k == 0 || s.time > log.samples[k - 1].time;
    require(finite && ordered, "forecast_flight: log '" + log.flight_id +
                                   "' is not clean (missing or unordered sample at " +
                                   std::to_string(k) + ")");
  }
  const std::size_t L = model.config.window_size;
  const auto sim = physics::simulate(log.currents(), log.sample_period, params, opt.initial_soc);
  const auto windows = ingest::make_windows(log, sim.voltage, L, 1);
  const auto dec = mc_infer(model, windows, opt.mc_samples, opt.seed);

  HybridForecast f;
  f.flight_id = log.flight_id;
  f.times = log.times();
  f.physics_voltage = sim.voltage;
  f.corrected_voltage = sim.voltage;
  f.decomposition.assign(log.size(), {});
  f.uncorrected.assign(log.size(), true);
  f.warmup = L - 1;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const std::size_t k = windows[w].end_index;
    f.corrected_voltage[k] = sim.voltage[k] + dec[w].y_hat;
    f.decomposition[k] = dec[w];
    f.uncorrected[k] = false;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Dropout sensitivity

std::vector<SensitivityRow> dropout_sensitivity(const CnnConfig &base, std::span<const double> rates,
                                                const SensitivityData &data, std::uint64_t seed) {
  require(!rates.empty(), "dropout_sensitivity: need at least one rate");
  require(!data.eval.empty(), "dropout_sensitivity: need evaluation flights");
  for (double r : rates)
    require(r >= 0.0 && r < 1.0, "dropout_sensitivity: rates must lie in [0,1)");

  std::vector<SensitivityRow> rows;
  for (double rate : rates) {
    CnnConfig cfg = base;
    cfg.dropout_rate = rate;
    Model m = build(cfg, seed);
    train(m, data.train, cfg);

    std::vector<metrics::PredictiveDistribution> dists;
    std::vector<double> ys;
    double sum_e = 0.0;
    std::size_t count = 0;
    for (const auto &log : data.eval) {
      auto f = forecast_flight(m, log, data.params, {data.initial_soc, cfg.mc_samples, seed});
      auto d = f.distributions();
      auto y = f.corrected_slice(log.voltages());
      dists.insert(dists.end(), d.begin(), d.end());
      ys.insert(ys.end(), y.begin(), y.end());
      for (std::size_t k = f.warmup; k < f.times.size(); ++k) {
        sum_e += f.decomposition[k].sigma_e;
        ++count;
      }
    }
    const auto s = metrics::score(dists, ys);
    rows.push_back({rate, sum_e / static_cast<double>(count), s.miscalibration_area, s.sharpness,
                    s.crps_mean});
  }
  return rows;
}

std::string training_fingerprint(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto &id : ids) {
    for (unsigned char c : id + "\n") {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace vphm::cnn
