#pragma once

// Uncertainty-aware CNN error-correction model: assembly, NLL training,
// Monte Carlo dropout inference and the aleatoric/epistemic/total split.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vphm/ingest.hpp"
#include "vphm/metrics.hpp"
#include "vphm/physics.hpp"
#include "vphm/tensor.hpp"

namespace vphm::cnn {

struct CnnConfig {
  std::size_t window_size = 10;
  std::size_t conv_layers = 3;
  std::size_t filters = 16;
  std::size_t kernel = 3;
  std::vector<std::size_t> fc_nodes = {64, 32};
  double dropout_rate = 0.1;
  std::size_t epochs = 130;
  double learning_rate = 0.001;
  std::size_t mc_samples = 100;
  std::size_t batch_size = 32;

  /// Throws InvalidConfig.
  void validate() const;
  /// Keys: window_size, conv_layers, filters, kernel, fc_nodes, dropout_rate,
  /// epochs, learning_rate, mc_samples, batch_size.
  kv::Table to_kv() const;
  static CnnConfig from_kv(const kv::Table &table, CnnConfig base);
  static CnnConfig from_kv(const kv::Table &table) { return from_kv(table, CnnConfig{}); }
  static const std::vector<std::string> &keys();
};

using GaussianPrediction = nn::GaussianPrediction;

struct UncertaintyDecomposition {
  double y_hat = 0.0;
  double sigma_a = 0.0;
  double sigma_e = 0.0;
  double sigma_tu = 0.0;
};

/// Per-feature affine scaling learned from the training windows.
struct Normalization {
  double input_mean[2] = {0.0, 0.0};
  double input_std[2] = {1.0, 1.0};
  double target_mean = 0.0;
  double target_std = 1.0;
};

struct Model {
  CnnConfig config;
  std::uint64_t seed = 0;
  nn::Sequential net;
  Normalization norm;
  std::string fingerprint;
  bool trained = false;

  void save(const std::filesystem::path &path) const;
  Container to_container() const;
  static Model load(const std::filesystem::path &path);
  static Model from_container(const Container &c);
};

/// Layer stack: conv_layers x (conv1d, ReLU, dropout) -> pool -> per fc layer
/// (dense, ReLU, dropout) -> Gaussian head. Throws InvalidConfig.
Model build(const CnnConfig &config, std::uint64_t seed);

struct TrainProgress {
  std::size_t epoch = 0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<double> epoch_loss; ///< mean NLL per epoch, normalized target units
};

/// Adam on the Gaussian NLL with dropout active. Throws NonFiniteLoss naming
/// the epoch and batch.
TrainResult train(Model &model, std::span<const ingest::WindowedSample> windows,
                  const CnnConfig &config,
                  const std::function<void(const TrainProgress &)> &on_epoch = {});

/// One forward pass (dropout active) over a batch of windows, in volts.
std::vector<GaussianPrediction> predict_once(const Model &model,
                                             std::span<const ingest::WindowedSample> windows,
                                             nn::Rng &rng, bool dropout_active = true);

/// n stochastic passes over a single window.
UncertaintyDecomposition mc_infer(const Model &model, std::span<const double> window_inputs,
                                  std::size_t n, std::uint64_t seed);
/// n stochastic passes over every window, one shared RNG stream.
std::vector<UncertaintyDecomposition> mc_infer(const Model &model,
                                               std::span<const ingest::WindowedSample> windows,
                                               std::size_t n, std::uint64_t seed);

/// Population mean/variance aggregation of per-pass (mu, sigma^2) samples.
UncertaintyDecomposition decompose(std::span<const double> mu_samples,
                                   std::span<const double> var_samples);

struct HybridForecast {
  std::string flight_id;
  std::vector<double> times;
  std::vector<double> physics_voltage;
  std::vector<double> corrected_voltage;
  std::vector<UncertaintyDecomposition> decomposition;
  std::vector<bool> uncorrected; ///< warm-up prefix without a full window
  std::size_t warmup = 0;

  /// Total-uncertainty Gaussians for the corrected steps only.
  std::vector<metrics::PredictiveDistribution> distributions() const;
  /// Measured voltage restricted to corrected steps.
  std::vector<double> corrected_slice(std::span<const double> all) const;
};

struct ForecastOptions {
  double initial_soc = 1.0;
  std::size_t mc_samples = 100;
  std::uint64_t seed = 0;
};

/// Physics simulation + windowing + MC inference per window.
HybridForecast forecast_flight(const Model &model, const ingest::FlightLog &log,
                               const physics::BatteryParams &params,
                               const ForecastOptions &options);

/// Residual windows of a cleaned flight against the physics model.
std::vector<ingest::WindowedSample> flight_windows(const ingest::FlightLog &log,
                                                   const physics::BatteryParams &params,
                                                   std::size_t window_size,
                                                   double initial_soc = 1.0);

struct SensitivityRow {
  double rate = 0.0;
  double mean_sigma_e = 0.0;
  double calibration = 0.0; ///< miscalibration area
  double sharpness = 0.0;
  double crps = 0.0;
};

struct SensitivityData {
  std::vector<ingest::WindowedSample> train;
  std::vector<ingest::FlightLog> eval;
  physics::BatteryParams params;
  double initial_soc = 1.0;
};

/// One model per rate, identical seeds and data.
std::vector<SensitivityRow> dropout_sensitivity(const CnnConfig &base, std::span<const double> rates,
                                                const SensitivityData &data, std::uint64_t seed);

/// FNV-1a over the sorted ids, hex encoded.
std::string training_fingerprint(std::vector<std::string> flight_ids);

} // namespace vphm::cnn
