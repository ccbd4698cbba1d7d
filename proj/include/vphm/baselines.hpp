#pragma once

// Quantile regression baselines: linear (QLR), forest (QRF) and gradient
// boosting (QGB). All three predict the physics residual from the flattened
// window features and produce a quantile set per query.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vphm/container.hpp"
#include "vphm/ingest.hpp"
#include "vphm/metrics.hpp"
#include "vphm/regression_tree.hpp"

namespace vphm::baselines {

/// 0.025, 0.05, ..., 0.975.
std::vector<double> default_levels();

struct QuantileSet {
  std::vector<double> levels;
  std::vector<double> values;

  /// Sorts values so they are non-decreasing in level.
  void enforce_monotone();
};

/// tau*(y-q) if y >= q, else (tau-1)*(y-q).
double pinball_loss(double y, double q, double tau);
double mean_pinball_loss(std::span<const double> y, std::span<const double> q, double tau);

/// Flattened windows, ordered [i0, v0, i1, v1, ...].
FeatureMatrix window_features(std::span<const ingest::WindowedSample> windows);
std::vector<double> window_targets(std::span<const ingest::WindowedSample> windows);

/// Piecewise-linear CDF through the (value, level) pairs.
metrics::PiecewiseCdf quantiles_to_distribution(const QuantileSet &qs);

// ---------------------------------------------------------------------------
// QLR

struct QlrConfig {
  std::size_t max_iterations = 400;
  double initial_step = 0.1;
};

struct QlrModel {
  std::vector<double> levels;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  /// Per level: intercept followed by one weight per standardized feature.
  std::vector<std::vector<double>> coefficients;
  /// Per level: mean pinball loss after every accepted or rejected iteration.
  std::vector<std::vector<double>> loss_trace;

  double predict(std::span<const double> x, std::size_t level_index) const;
  QuantileSet predict(std::span<const double> x) const;
  /// Slope of level `level_index` on raw feature `feature`.
  double raw_slope(std::size_t level_index, std::size_t feature) const;
};

/// Throws Degenerate when every feature is constant or fewer than two
/// distinct samples exist.
QlrModel qlr_fit(const FeatureMatrix &x, std::span<const double> y, std::span<const double> levels,
                 const QlrConfig &config = {});

// ---------------------------------------------------------------------------
// QRF

struct ForestConfig {
  std::size_t n_estimators = 100;
  std::size_t max_depth = 40;
  std::size_t min_samples_split = 50;
  std::size_t min_samples_leaf = 13;
  double max_features = 1.0;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  TreeConfig tree() const { return {max_depth, min_samples_split, min_samples_leaf, max_features}; }
};

struct QrfModel {
  ForestConfig config;
  std::vector<double> levels;
  std::vector<double> y;
  std::vector<RegressionTree> trees;

  /// Sparse training-row weights for x; they sum to 1.
  std::vector<std::pair<std::uint32_t, double>> weights(std::span<const double> x) const;
  QuantileSet predict(std::span<const double> x) const;
};

/// Throws Precondition when the training set is smaller than min_samples_split.
QrfModel qrf_fit(const FeatureMatrix &x, std::span<const double> y, const ForestConfig &config,
                 std::span<const double> levels);

/// Smallest y whose cumulative weight reaches tau. `pairs` are (y, weight).
double weighted_quantile(std::vector<std::pair<double, double>> pairs, double tau);

// ---------------------------------------------------------------------------
// QGB

struct BoostConfig {
  double learning_rate = 0.05;
  std::size_t n_estimators = 100;
  std::size_t max_depth = 40;
  std::size_t min_samples_split = 50;
  std::size_t min_samples_leaf = 13;
  double max_features = 1.0;
  std::uint64_t seed = 0;

  TreeConfig tree() const { return {max_depth, min_samples_split, min_samples_leaf, max_features}; }
};

/// One boosted ensemble for a single quantile level.
struct QgbModel {
  double level = 0.5;
  double learning_rate = 0.05;
  double init = 0.0;
  std::vector<RegressionTree> trees;
  /// Training pinball loss after initialization and after each stage.
  std::vector<double> loss_trace;

  double predict(std::span<const double> x) const;
};

QgbModel qgb_fit(const FeatureMatrix &x, std::span<const double> y, const BoostConfig &config,
                 double level);

struct QgbEnsemble {
  BoostConfig config;
  std::vector<QgbModel> members; ///< one per level, ascending

  QuantileSet predict(std::span<const double> x) const;
};

QgbEnsemble qgb_fit_levels(const FeatureMatrix &x, std::span<const double> y,
                           const BoostConfig &config, std::span<const double> levels);

/// Empirical tau-quantile: smallest y with at least tau of the mass at or below it.
double empirical_quantile(std::vector<double> y, double tau);

// ---------------------------------------------------------------------------
// Artifacts

using BaselineModel = std::variant<QlrModel, QrfModel, QgbEnsemble>;

/// "qlr", "qrf" or "qgb".
std::string kind_of(const BaselineModel &model);
QuantileSet predict(const BaselineModel &model, std::span<const double> x);

Container to_container(const BaselineModel &model);
BaselineModel from_container(const Container &c);
void save(const std::filesystem::path &path, const BaselineModel &model);
BaselineModel load(const std::filesystem::path &path);

} // namespace vphm::baselines
