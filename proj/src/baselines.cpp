#include "vphm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "vphm/error.hpp"

namespace vphm::baselines {

namespace {

// Independent RNG stream per (seed, tree or level).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

void check_levels(std::span<const double> levels) {
  require(!levels.empty(), "need at least one quantile level");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    require(levels[i] > 0.0 && levels[i] < 1.0, "quantile levels must lie in (0,1)");
    require(i == 0 || levels[i] > levels[i - 1], "quantile levels must be strictly ascending");
  }
}

void check_xy(const FeatureMatrix &x, std::span<const double> y) {
  require(x.rows == y.size(), "feature rows and targets differ in length");
  require(x.data.size() == x.rows * x.cols, "feature matrix storage does not match its shape");
}

std::string index_name(const std::string &prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03zu", i);
  return prefix + buf;
}

// Node table as [n, 6]: feature, threshold, left, right, value, leaf.
NamedArray tree_nodes(const std::string &name, const RegressionTree &t) {
  NamedArray a{name, {t.nodes.size(), 6}, {}};
  a.data.reserve(t.nodes.size() * 6);
  for (const auto &n : t.nodes)
    a.data.insert(a.data.end(), {static_cast<double>(n.feature), n.threshold, static_cast<double>(n.left),
                                 static_cast<double>(n.right), n.value, static_cast<double>(n.leaf)});
  return a;
}

RegressionTree read_tree(const NamedArray &a) {
  if (a.shape.size() != 2 || a.shape[1] != 6)
    throw Error(Errc::Format, "tree array '" + a.name + "' has the wrong shape");
  RegressionTree t;
  t.nodes.resize(a.shape[0]);
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const double *r = a.data.data() + i * 6;
    t.nodes[i] = {static_cast<std::int32_t>(r[0]), r[1], static_cast<std::int32_t>(r[2]),
                  static_cast<std::int32_t>(r[3]), r[4], static_cast<std::int32_t>(r[5])};
  }
  return t;
}

template <class T> std::vector<double> as_doubles(const std::vector<T> &v) { return {v.begin(), v.end()}; }

template <class T> std::vector<T> from_doubles(const std::vector<double> &v) {
  std::vector<T> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double d) { return static_cast<T>(d); });
  return out;
}

std::size_t header_size(const Container &c, const std::string &key) {
  const long v = kv::get_int(c.header, key, -1);
  if (v < 0)
    throw Error(Errc::Format, "artifact header lacks '" + key + "'");
  return static_cast<std::size_t>(v);
}

} // namespace

std::vector<double> default_levels() {
  std::vector<double> l;
  for (int k = 1; k <= 39; ++k)
    l.push_back(0.025 * k);
  return l;
}

void QuantileSet::enforce_monotone() { std::sort(values.begin(), values.end()); }

double pinball_loss(double y, double q, double tau) {
  require(tau > 0.0 && tau < 1.0, "pinball_loss: tau must lie in (0,1)");
  const double d = y - q;
  return d >= 0.0 ? tau * d : (tau - 1.0) * d;
}

double mean_pinball_loss(std::span<const double> y, std::span<const double> q, double tau) {
  if (y.size() != q.size() || y.empty())
    throw Error(Errc::LengthMismatch, "mean_pinball_loss: unequal or empty inputs");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    s += pinball_loss(y[i], q[i], tau);
  return s / static_cast<double>(y.size());
}

FeatureMatrix window_features(std::span<const ingest::WindowedSample> windows) {
  require(!windows.empty(), "window_features: no windows");
  FeatureMatrix x;
  x.rows = windows.size();
  x.cols = windows.front().inputs.size();
  x.data.reserve(x.rows * x.cols);
  for (const auto &w : windows) {
    if (w.inputs.size() != x.cols)
      throw Error(Errc::ShapeMismatch, "windows differ in size");
    x.data.insert(x.data.end(), w.inputs.begin(), w.inputs.end());
  }
  return x;
}

std::vector<double> window_targets(std::span<const ingest::WindowedSample> windows) {
  std::vector<double> y;
  y.reserve(windows.size());
  for (const auto &w : windows)
    y.push_back(w.target);
  return y;
}

metrics::PiecewiseCdf quantiles_to_distribution(const QuantileSet &qs) {
  return metrics::PiecewiseCdf(qs.values, qs.levels);
}

double empirical_quantile(std::vector<double> y, double tau) {
  require(!y.empty(), "empirical_quantile: empty sample");
  const double n = static_cast<double>(y.size());
  auto k = static_cast<std::size_t>(std::max(std::ceil(tau * n - 1e-9), 1.0)) - 1;
  k = std::min(k, y.size() - 1);
  std::nth_element(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(k), y.end());
  return y[k];
}

double weighted_quantile(std::vector<std::pair<double, double>> pairs, double tau) {
  require(!pairs.empty(), "weighted_quantile: empty sample");
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto &a, const auto &b) { return a.first < b.first; });
  double cum = 0.0;
  for (const auto &[y, w] : pairs) {
    cum += w;
    if (cum >= tau - 1e-12)
      return y;
  }
  return pairs.back().first;
}

// ---------------------------------------------------------------------------
// QLR

double QlrModel::predict(std::span<const double> x, std::size_t li) const {
  const auto &c = coefficients.at(li);
  require(x.size() + 1 == c.size(), "qlr predict: feature count mismatch");
  double s = c[0];
  for (std::size_t j = 0; j < x.size(); ++j)
    s += c[j + 1] * (x[j] - feature_mean[j]) / feature_scale[j];
  return s;
}

QuantileSet QlrModel::predict(std::span<const double> x) const {
  QuantileSet q{levels, {}};
  for (std::size_t l = 0; l < levels.size(); ++l)
    q.values.push_back(predict(x, l));
  q.enforce_monotone();
  return q;
}

double QlrModel::raw_slope(std::size_t li, std::size_t feature) const {
  return coefficients.at(li).at(feature + 1) / feature_scale.at(feature);
}

QlrModel qlr_fit(const FeatureMatrix &x, std::span<const double> y, std::span<const double> levels,
                 const QlrConfig &config) {
  check_xy(x, y);
  check_levels(levels);
  const std::size_t n = x.rows, d = x.cols;
  if (n < 2)
    throw Error(Errc::Degenerate, "qlr_fit: need at least two samples");

  QlrModel m;
  m.levels.assign(levels.begin(), levels.end());
  m.feature_mean.assign(d, 0.0);
  m.feature_scale.assign(d, 1.0);
  bool any_varying = false;
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += x.data[i * d + j];
    const double mean = s / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      ss += (x.data[i * d + j] - mean) * (x.data[i * d + j] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    m.feature_mean[j] = mean;
    if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
      m.feature_scale[j] = sd;
      any_varying = true;
    }
  }
  if (!any_varying)
    throw Error(Errc::Degenerate, "qlr_fit: every feature is constant");

  // Design with a leading intercept column; constant features become zeros.
  const std::size_t p = d + 1;
  Eigen::MatrixXd z(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    z(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t j = 0; j < d; ++j)
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) =
          (x.data[i * d + j] - m.feature_mean[j]) / m.feature_scale[j];
  }
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));

  // Least-squares start (lightly ridged for collinear windows).
  Eigen::MatrixXd gram = z.transpose() * z;
  gram.diagonal().array() += 1e-8 * static_cast<double>(n);
  const Eigen::VectorXd ols = gram.ldlt().solve(z.transpose() * yv);

  auto loss_of = [&](const Eigen::VectorXd &pred, double tau) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = yv[static_cast<Eigen::Index>(i)] - pred[static_cast<Eigen::Index>(i)];
      s += r >= 0.0 ? tau * r : (tau - 1.0) * r;
    }
    return s / static_cast<double>(n);
  };

  Eigen::VectorXd beta = ols;
  for (double tau : levels) {
    // Warm start from the previous level with the intercept shifted to the
    // tau-quantile of its residuals.
    const Eigen::VectorXd r = yv - z * beta;
    beta[0] += empirical_quantile({r.data(), r.data() + n}, tau);
    Eigen::VectorXd pred = z * beta;
    double loss = loss_of(pred, tau);
    std::vector<double> trace{loss};
    double step = config.initial_step;
    Eigen::VectorXd psi(n);
    for (std::size_t it = 0; it < config.max_iterations && step > 1e-12; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        const double r = yv[static_cast<Eigen::Index>(i)] - pred[static_cast<Eigen::Index>(i)];
        psi[static_cast<Eigen::Index>(i)] = r > 0.0 ? tau : (r < 0.0 ? tau - 1.0 : 0.0);
      }
      const Eigen::VectorXd g = -(z.transpose() * psi) / static_cast<double>(n);
      const double gn = g.norm();
      if (gn == 0.0)
        break;
      const Eigen::VectorXd cand = beta - (step / gn) * g;
      const Eigen::VectorXd cand_pred = z * cand;
      const double cand_loss = loss_of(cand_pred, tau);
      if (cand_loss < loss) {
        beta = cand;
        pred = cand_pred;
        loss = cand_loss;
        step *= 1.2;
      } else {
        step *= 0.5;
      }
      trace.push_back(loss);
    }
    m.coefficients.emplace_back(beta.data(), beta.data() + p);
    m.loss_trace.push_back(std::move(trace));
  }
  return m;
}

// ---------------------------------------------------------------------------
// QRF

std::vector<std::pair<std::uint32_t, double>> QrfModel::weights(std::span<const double> x) const {
  std::vector<std::pair<std::uint32_t, double>> raw;
  const double per_tree = 1.0 / static_cast<double>(trees.size());
  for (const auto &t : trees) {
    const auto rows = t.rows_in_leaf(t.nodes[t.find_leaf(x)].leaf);
    const double w = per_tree / static_cast<double>(rows.size());
    for (auto r : rows)
      raw.emplace_back(r, w);
  }
  std::sort(raw.begin(), raw.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
  std::vector<std::pair<std::uint32_t, double>> merged;
  for (const auto &[r, w] : raw) {
    if (!merged.empty() && merged.back().first == r)
      merged.back().second += w;
    else
      merged.emplace_back(r, w);
  }
  return merged;
}

QuantileSet QrfModel::predict(std::span<const double> x) const {
  std::vector<std::pair<double, double>> pairs;
  for (const auto &[r, w] : weights(x))
    pairs.emplace_back(y[r], w);
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto &a, const auto &b) { return a.first < b.first; });
  QuantileSet q{levels, {}};
  std::size_t k = 0;
  double cum = pairs.front().second;
  for (double tau : levels) {
    while (cum < tau - 1e-12 && k + 1 < pairs.size())
      cum += pairs[++k].second;
    q.values.push_back(pairs[k].first);
  }
  q.enforce_monotone();
  return q;
}

QrfModel qrf_fit(const FeatureMatrix &x, std::span<const double> y, const ForestConfig &config,
                 std::span<const double> levels) {
  check_xy(x, y);
  check_levels(levels);
  require(config.n_estimators >= 1, "qrf_fit: need at least one tree");
  require(x.rows >= config.min_samples_split && x.rows >= 1,
          "qrf_fit: training set smaller than min_samples_split");
  QrfModel m;
  m.config = config;
  m.levels.assign(levels.begin(), levels.end());
  m.y.assign(y.begin(), y.end());
  const BinnedFeatures binned(x);
  const auto n = static_cast<std::uint32_t>(x.rows);
  for (std::size_t t = 0; t < config.n_estimators; ++t) {
    std::mt19937_64 rng(stream_seed(config.seed, t));
    std::vector<std::uint32_t> rows(n);
    if (config.bootstrap) {
      std::uniform_int_distribution<std::uint32_t> pick(0, n - 1);
      for (auto &r : rows)
        r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0u);
    }
    m.trees.push_back(fit_tree(binned, y, std::move(rows), config.tree(), rng));
  }
  return m;
}

// ---------------------------------------------------------------------------
// QGB

double QgbModel::predict(std::span<const double> x) const {
  double f = init;
  for (const auto &t : trees)
    f += t.predict(x);
  return f;
}

QgbModel qgb_fit(const FeatureMatrix &x, std::span<const double> y, const BoostConfig &config,
                 double level) {
  check_xy(x, y);
  require(level > 0.0 && level < 1.0, "qgb_fit: level must lie in (0,1)");
  require(config.learning_rate >= 0.0, "qgb_fit: learning_rate must be non-negative");
  require(!y.empty(), "qgb_fit: empty training set");
  const BinnedFeatures binned(x);
  QgbModel m;
  m.level = level;
  m.learning_rate = config.learning_rate;
  m.init = empirical_quantile({y.begin(), y.end()}, level);
  const std::size_t n = y.size();
  std::vector<double> f(n, m.init), grad(n), resid;
  auto loss = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += pinball_loss(y[i], f[i], level);
    return s / static_cast<double>(n);
  };
  m.loss_trace.push_back(loss());
  std::mt19937_64 rng(stream_seed(config.seed, static_cast<std::uint64_t>(level * 1e6)));
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), 0u);
  for (std::size_t s = 0; s < config.n_estimators; ++s) {
    for (std::size_t i = 0; i < n; ++i)
      grad[i] = y[i] - f[i] > 0.0 ? level : level - 1.0;
    RegressionTree t = fit_tree(binned, grad, all, config.tree(), rng);
    for (auto &node : t.nodes) {
      if (node.feature >= 0)
        continue;
      const auto rows = t.rows_in_leaf(node.leaf);
      resid.clear();
      for (auto r : rows)
        resid.push_back(y[r] - f[r]);
      node.value = config.learning_rate * empirical_quantile(resid, level);
      for (auto r : rows)
        f[r] += node.value;
    }
    t.leaf_rows.clear();
    t.leaf_rows.shrink_to_fit();
    t.leaf_offsets.clear();
    t.leaf_offsets.shrink_to_fit();
    m.trees.push_back(std::move(t));
    m.loss_trace.push_back(loss());
  }
  return m;
}

QuantileSet QgbEnsemble::predict(std::span<const double> x) const {
  QuantileSet q;
  for (const auto &m : members) {
    q.levels.push_back(m.level);
    q.values.push_back(m.predict(x));
  }
  q.enforce_monotone();
  return q;
}

QgbEnsemble qgb_fit_levels(const FeatureMatrix &x, std::span<const double> y,
                           const BoostConfig &config, std::span<const double> levels) {
  check_levels(levels);
  QgbEnsemble e;
  e.config = config;
  for (double tau : levels)
    e.members.push_back(qgb_fit(x, y, config, tau));
  return e;
}

// ---------------------------------------------------------------------------
// Artifacts

std::string kind_of(const BaselineModel &model) {
  switch (model.index()) {
  case 0:
    return "qlr";
  case 1:
    return "qrf";
  default:
    return "qgb";
  }
}

QuantileSet predict(const BaselineModel &model, std::span<const double> x) {
  return std::visit([&](const auto &m) { return m.predict(x); }, model);
}

Container to_container(const BaselineModel &model) {
  Container c;
  c.kind = kind_of(model);
  if (const auto *m = std::get_if<QlrModel>(&model)) {
    const std::size_t p = m->feature_mean.size() + 1;
    c.header["features"] = std::to_string(p - 1);
    c.add("levels", {m->levels.size()}, m->levels);
    c.add("feature_mean", {p - 1}, m->feature_mean);
    c.add("feature_scale", {p - 1}, m->feature_scale);
    std::vector<double> coef;
    for (const auto &row : m->coefficients)
      coef.insert(coef.end(), row.begin(), row.end());
    c.add("coefficients", {m->levels.size(), p}, std::move(coef));
  } else if (const auto *m = std::get_if<QrfModel>(&model)) {
    const auto &cfg = m->config;
    c.header = {{"n_estimators", std::to_string(cfg.n_estimators)},
                {"max_depth", std::to_string(cfg.max_depth)},
                {"min_samples_split", std::to_string(cfg.min_samples_split)},
                {"min_samples_leaf", std::to_string(cfg.min_samples_leaf)},
                {"max_features", kv::format_double(cfg.max_features)},
                {"bootstrap", cfg.bootstrap ? "1" : "0"},
                {"seed", std::to_string(cfg.seed)},
                {"trees", std::to_string(m->trees.size())}};
    c.add("levels", {m->levels.size()}, m->levels);
    c.add("y", {m->y.size()}, m->y);
    for (std::size_t t = 0; t < m->trees.size(); ++t) {
      const auto &tree = m->trees[t];
      const std::string base = index_name("tree.", t);
      c.arrays.push_back(tree_nodes(base + ".nodes", tree));
      c.add(base + ".leaf_offsets", {tree.leaf_offsets.size()}, as_doubles(tree.leaf_offsets));
      c.add(base + ".leaf_rows", {tree.leaf_rows.size()}, as_doubles(tree.leaf_rows));
    }
  } else {
    const auto &e = std::get<QgbEnsemble>(model);
    const auto &cfg = e.config;
    c.header = {{"learning_rate", kv::format_double(cfg.learning_rate)},
                {"n_estimators", std::to_string(cfg.n_estimators)},
                {"max_depth", std::to_string(cfg.max_depth)},
                {"min_samples_split", std::to_string(cfg.min_samples_split)},
                {"min_samples_leaf", std::to_string(cfg.min_samples_leaf)},
                {"max_features", kv::format_double(cfg.max_features)},
                {"seed", std::to_string(cfg.seed)},
                {"members", std::to_string(e.members.size())}};
    for (std::size_t k = 0; k < e.members.size(); ++k) {
      const auto &m = e.members[k];
      const std::string base = index_name("member.", k);
      c.add(base + ".meta", {4},
            {m.level, m.learning_rate, m.init, static_cast<double>(m.trees.size())});
      for (std::size_t t = 0; t < m.trees.size(); ++t)
        c.arrays.push_back(tree_nodes(base + index_name(".tree.", t), m.trees[t]));
    }
  }
  return c;
}

BaselineModel from_container(const Container &c) {
  if (c.kind == "qlr") {
    QlrModel m;
    m.levels = c.get("levels").data;
    m.feature_mean = c.get("feature_mean").data;
    m.feature_scale = c.get("feature_scale").data;
    const auto &coef = c.get("coefficients");
    const std::size_t p = m.feature_mean.size() + 1;
    if (coef.data.size() != m.levels.size() * p)
      throw Error(Errc::Format, "qlr coefficient block has the wrong size");
    for (std::size_t l = 0; l < m.levels.size(); ++l)
      m.coefficients.emplace_back(coef.data.begin() + static_cast<std::ptrdiff_t>(l * p),
                                  coef.data.begin() + static_cast<std::ptrdiff_t>((l + 1) * p));
    return m;
  }
  if (c.kind == "qrf") {
    QrfModel m;
    m.config.n_estimators = header_size(c, "n_estimators");
    m.config.max_depth = header_size(c, "max_depth");
    m.config.min_samples_split = header_size(c, "min_samples_split");
    m.config.min_samples_leaf = header_size(c, "min_samples_leaf");
    m.config.max_features = kv::get_double(c.header, "max_features", 1.0);
    m.config.bootstrap = kv::get_string(c.header, "bootstrap", "1") == "1";
    m.config.seed = std::stoull(kv::get_string(c.header, "seed", "0"));
    m.levels = c.get("levels").data;
    m.y = c.get("y").data;
    const std::size_t n_trees = header_size(c, "trees");
    for (std::size_t t = 0; t < n_trees; ++t) {
      const std::string base = index_name("tree.", t);
      RegressionTree tree = read_tree(c.get(base + ".nodes"));
      tree.leaf_offsets = from_doubles<std::uint32_t>(c.get(base + ".leaf_offsets").data);
      tree.leaf_rows = from_doubles<std::uint32_t>(c.get(base + ".leaf_rows").data);
      m.trees.push_back(std::move(tree));
    }
    return m;
  }
  if (c.kind == "qgb") {
    QgbEnsemble e;
    e.config.learning_rate = kv::get_double(c.header, "learning_rate", 0.05);
    e.config.n_estimators = header_size(c, "n_estimators");
    e.config.max_depth = header_size(c, "max_depth");
    e.config.min_samples_split = header_size(c, "min_samples_split");
    e.config.min_samples_leaf = header_size(c, "min_samples_leaf");
    e.config.max_features = kv::get_double(c.header, "max_features", 1.0);
    e.config.seed = std::stoull(kv::get_string(c.header, "seed", "0"));
    const std::size_t members = header_size(c, "members");
    for (std::size_t k = 0; k < members; ++k) {
      const std::string base = index_name("member.", k);
      const auto &meta = c.get(base + ".meta").data;
      if (meta.size() != 4)
        throw Error(Errc::Format, "qgb member metadata has the wrong size");
      QgbModel m;
      m.level = meta[0];
      m.learning_rate = meta[1];
      m.init = meta[2];
      for (std::size_t t = 0; t < static_cast<std::size_t>(meta[3]); ++t)
        m.trees.push_back(read_tree(c.get(base + index_name(".tree.", t))));
      e.members.push_back(std::move(m));
    }
    return e;
  }
  throw Error(Errc::Format, "artifact kind '" + c.kind + "' is not a baseline model");
}

void save(const std::filesystem::path &path, const BaselineModel &model) {
  to_container(model).save(path);
}

BaselineModel load(const std::filesystem::path &path) { return from_container(Container::load(path)); }

} // namespace vphm::baselines
