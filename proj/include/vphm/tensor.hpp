#pragma once

// Minimal reverse-mode differentiable engine covering the layer set of the
// uncertainty-aware CNN: conv1d (same padding), ReLU, adaptive average
// pooling, dense, inverted dropout and a Gaussian mean/variance head, plus
// the Gaussian NLL loss and Adam.
//
// Batched layouts: conv activations are [batch, channels, length], dense
// activations are [batch, features]. Rank-2 conv inputs are treated as a
// batch of one.

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vphm/container.hpp"

namespace vphm::nn {

using Rng = std::mt19937_64;

class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t> &shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double *data() { return data_.data(); }
  const double *data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double> &storage() { return data_; }
  const std::vector<double> &storage() const { return data_; }

  double &operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Tensor &o) const { return shape_ == o.shape_; }
  std::string shape_string() const;

private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Kernels on plain tensors.

enum class Padding { Same };

/// input [B,C,L] (or [C,L]), weights [F,C,K], bias [F] -> [B,F,L].
Tensor conv1d_forward(const Tensor &input, const Tensor &weights, const Tensor &bias,
                      Padding padding = Padding::Same);

/// [B,F,L] (or [F,L]) -> [B,F] (or [F]).
Tensor adaptive_avg_pool(const Tensor &input);

struct DropoutResult {
  Tensor output;
  Tensor mask; ///< 0 or 1/(1-rate) per element
};

/// Inverted dropout. Inactive or rate 0 is the identity with an all-ones mask.
DropoutResult dropout_forward(const Tensor &input, double rate, Rng &rng, bool active);

struct GaussianPrediction {
  double mu = 0.0;
  double sigma2 = 1.0;
};

/// Raw head output pair (mean, log-variance) -> (mu, exp(log-variance)).
GaussianPrediction gaussian_head(double raw_mean, double raw_log_var);
/// [B,2] raw head outputs -> B predictions.
std::vector<GaussianPrediction> gaussian_head_forward(const Tensor &raw);

/// Variance floor applied inside the NLL.
inline constexpr double kVarianceFloor = 1e-8;

/// Mean over the batch of (y-mu)^2/(2 s2) + log(s2)/2 with s2 floored.
double nll_loss(std::span<const GaussianPrediction> pred, std::span<const double> target);

// ---------------------------------------------------------------------------
// Reverse-mode graph.

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool freed = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node &)> backward;
};

/// Handle to a graph node. Copies share the node.
class Var {
public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor &value() const { return node_->value; }
  Tensor &mutable_value() { return node_->value; }
  const Tensor &grad() const { return node_->grad; }
  Tensor &mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad();
  const std::shared_ptr<Node> &node() const { return node_; }

private:
  std::shared_ptr<Node> node_;
};

Var parameter(Tensor value);
Var constant(Tensor value);

Var conv1d(const Var &x, const Var &w, const Var &b);
Var relu(const Var &x);
Var adaptive_avg_pool(const Var &x);
Var dense(const Var &x, const Var &w, const Var &b);
/// `mask_out`, when given, receives the sampled mask.
Var dropout(const Var &x, double rate, Rng &rng, bool active, Tensor *mask_out = nullptr);
Var sum(const Var &x);
Var mul(const Var &a, const Var &b);
/// Scalar NLL over a [B,2] raw head output.
Var nll(const Var &raw_head, std::span<const double> target);

/// Accumulates d(loss)/d(leaf) into every requires_grad leaf, then releases
/// the graph. A second call on the same loss throws GraphFreed.
void backward(const Var &loss);

// ---------------------------------------------------------------------------
// Layers.

enum class LayerKind { Conv1d, Relu, AdaptiveAvgPool, Dense, Dropout, GaussianHead };

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::size_t in_channels = 0; ///< conv1d input channels
  std::size_t filters = 0;     ///< conv1d output channels
  std::size_t kernel = 0;
  Padding padding = Padding::Same;
  std::size_t in_features = 0; ///< dense / gaussian head
  std::size_t out_features = 0;
  double rate = 0.0;           ///< dropout

  /// Throws InvalidConfig.
  void validate() const;
  std::string manifest() const;
};

/// Xavier/Glorot uniform: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
/// Conv fans are channels*kernel and filters*kernel.
void xavier_uniform(Tensor &t, std::size_t fan_in, std::size_t fan_out, Rng &rng);

class Sequential {
public:
  Sequential() = default;
  /// Weights Xavier-uniform from `rng`, biases zero.
  Sequential(std::vector<LayerSpec> specs, Rng &rng);

  /// Output is the raw [B,2] head when the stack ends in a GaussianHead.
  Var forward(const Var &input, Rng &rng, bool dropout_active) const;

  const std::vector<LayerSpec> &specs() const { return specs_; }
  std::vector<Var> parameters() const;
  std::size_t parameter_count() const;
  void set_dropout_rate(double rate);

  /// Layer manifest under `layer.NN` header keys and tensors as `pNN.w` / `pNN.b`.
  void save(Container &c) const;
  static Sequential load(const Container &c);

private:
  struct Params {
    Var w, b;
  };
  std::vector<LayerSpec> specs_;
  std::vector<Params> params_; ///< parallel to specs_; empty Vars for parameter-free layers
};

// ---------------------------------------------------------------------------
// Adam.

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;
};

/// Bias-corrected Adam. Moments are created on the first call. Throws
/// ShapeMismatch when a gradient or stored moment disagrees with its parameter.
void adam_step(std::span<Tensor *const> params, std::span<const Tensor *const> grads,
               AdamState &state);
/// Convenience over graph leaves: uses each Var's accumulated gradient.
void adam_step(std::span<const Var> params, AdamState &state);

} // namespace vphm::nn
