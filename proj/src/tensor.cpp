#include "vphm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_set>

#include "vphm/error.hpp"

namespace vphm::nn {

namespace {

std::size_t product(const std::vector<std::size_t> &shape) {
  std::size_t n = 1;
  for (auto d : shape)
    n *= d;
  return n;
}

[[noreturn]] void shape_error(const std::string &what) { throw Error(Errc::ShapeMismatch, what); }

Tensor &grad_of(Node &n) {
  if (n.grad.empty() && n.value.size() > 0)
    n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

// Views a conv activation as [B,C,L].
struct ConvDims {
  std::size_t batch, channels, length;
};

ConvDims conv_dims(const Tensor &t) {
  if (t.rank() == 3)
    return {t.dim(0), t.dim(1), t.dim(2)};
  if (t.rank() == 2)
    return {1, t.dim(0), t.dim(1)};
  shape_error("conv activation must be rank 2 or 3, got " + t.shape_string());
}

std::shared_ptr<Node> make_node(Tensor value, std::vector<std::shared_ptr<Node>> parents,
                                std::function<void(Node &)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = std::any_of(parents.begin(), parents.end(),
                                 [](const auto &p) { return p->requires_grad; });
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward = std::move(fn);
  }
  return n;
}

} // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != data_.size())
    shape_error("data length " + std::to_string(data_.size()) + " does not match shape " +
                shape_string());
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i)
    s += (i ? "x" : "") + std::to_string(shape_[i]);
  return s + "]";
}

// ---------------------------------------------------------------------------
// Kernels

Tensor conv1d_forward(const Tensor &input, const Tensor &w, const Tensor &bias, Padding) {
  const auto [B, C, L] = conv_dims(input);
  if (w.rank() != 3 || w.dim(1) != C || bias.rank() != 1 || bias.dim(0) != w.dim(0))
    shape_error("conv1d: weights " + w.shape_string() + " / bias " + bias.shape_string() +
                " incompatible with input " + input.shape_string());
  const std::size_t F = w.dim(0), K = w.dim(2);
  if (K % 2 == 0)
    shape_error("conv1d: same padding needs an odd kernel");
  if (K > L + 2 * (K / 2))
    shape_error("conv1d: kernel does not fit padded input");
  const auto pad = static_cast<std::ptrdiff_t>(K / 2);

  Tensor out = input.rank() == 3 ? Tensor({B, F, L}) : Tensor({F, L});
  const double *in = input.data();
  const double *wd = w.data();
  double *o = out.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f = 0; f < F; ++f) {
      double *orow = o + (b * F + f) * L;
      std::fill(orow, orow + L, bias[f]);
      for (std::size_t c = 0; c < C; ++c) {
        const double *irow = in + (b * C + c) * L;
        const double *wk = wd + (f * C + c) * K;
        for (std::size_t k = 0; k < K; ++k) {
          const auto shift = static_cast<std::ptrdiff_t>(k) - pad;
          const std::size_t lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
          const std::size_t hi = shift > 0 ? L - static_cast<std::size_t>(shift) : L;
          const double wv = wk[k];
          for (std::size_t l = lo; l < hi; ++l)
            orow[l] += wv * irow[static_cast<std::ptrdiff_t>(l) + shift];
        }
      }
    }
  return out;
}

Tensor adaptive_avg_pool(const Tensor &input) {
  const auto [B, C, L] = conv_dims(input);
  if (L == 0)
    throw Error(Errc::EmptyInput, "adaptive_avg_pool: zero-length feature map");
  Tensor out = input.rank() == 3 ? Tensor({B, C}) : Tensor({C});
  for (std::size_t r = 0; r < B * C; ++r) {
    double s = 0.0;
    for (std::size_t l = 0; l < L; ++l)
      s += input[r * L + l];
    out[r] = s / static_cast<double>(L);
  }
  return out;
}

DropoutResult dropout_forward(const Tensor &input, double rate, Rng &rng, bool active) {
  require(rate >= 0.0 && rate < 1.0, "dropout rate must lie in [0,1)");
  DropoutResult r{input, Tensor(input.shape(), 1.0)};
  if (!active || rate == 0.0)
    return r;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double m = u(rng) < rate ? 0.0 : keep_scale;
    r.mask[i] = m;
    r.output[i] = input[i] * m;
  }
  return r;
}

GaussianPrediction gaussian_head(double raw_mean, double raw_log_var) {
  return {raw_mean, std::exp(raw_log_var)};
}

std::vector<GaussianPrediction> gaussian_head_forward(const Tensor &raw) {
  if (raw.rank() != 2 || raw.dim(1) != 2)
    shape_error("gaussian head expects [B,2], got " + raw.shape_string());
  std::vector<GaussianPrediction> out(raw.dim(0));
  for (std::size_t b = 0; b < out.size(); ++b)
    out[b] = gaussian_head(raw[2 * b], raw[2 * b + 1]);
  return out;
}

double nll_loss(std::span<const GaussianPrediction> pred, std::span<const double> target) {
  require(!pred.empty(), "nll_loss: batch must be non-empty");
  if (pred.size() != target.size())
    throw Error(Errc::LengthMismatch, "nll_loss: prediction/target length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double var = std::max(pred[i].sigma2, kVarianceFloor);
    const double d = target[i] - pred[i].mu;
    s += d * d / (2.0 * var) + 0.5 * std::log(var);
  }
  return s / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Graph ops

void Var::zero_grad() {
  if (!node_->grad.empty())
    node_->grad.fill(0.0);
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(n);
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(n);
}

Var conv1d(const Var &x, const Var &w, const Var &b) {
  Tensor out = conv1d_forward(x.value(), w.value(), b.value());
  return Var(make_node(std::move(out), {x.node(), w.node(), b.node()}, [](Node &self) {
    Node &xn = *self.parents[0], &wn = *self.parents[1], &bn = *self.parents[2];
    const auto [B, C, L] = conv_dims(xn.value);
    const std::size_t F = wn.value.dim(0), K = wn.value.dim(2);
    const auto pad = static_cast<std::ptrdiff_t>(K / 2);
    const double *g = self.grad.data();
    const double *in = xn.value.data();
    const double *wd = wn.value.data();
    double *gx = xn.requires_grad ? grad_of(xn).data() : nullptr;
    double *gw = wn.requires_grad ? grad_of(wn).data() : nullptr;
    double *gb = bn.requires_grad ? grad_of(bn).data() : nullptr;
    for (std::size_t bi = 0; bi < B; ++bi)
      for (std::size_t f = 0; f < F; ++f) {
        const double *grow = g + (bi * F + f) * L;
        if (gb)
          for (std::size_t l = 0; l < L; ++l)
            gb[f] += grow[l];
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t irow = (bi * C + c) * L;
          const std::size_t wrow = (f * C + c) * K;
          for (std::size_t k = 0; k < K; ++k) {
            const auto shift = static_cast<std::ptrdiff_t>(k) - pad;
            const std::size_t lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
            const std::size_t hi = shift > 0 ? L - static_cast<std::size_t>(shift) : L;
            double acc = 0.0;
            const double wv = wd[wrow + k];
            for (std::size_t l = lo; l < hi; ++l) {
              const std::size_t src = irow + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(l) + shift);
              acc += grow[l] * in[src];
              if (gx)
                gx[src] += grow[l] * wv;
            }
            if (gw)
              gw[wrow + k] += acc;
          }
        }
      }
  }));
}

Var relu(const Var &x) {
  Tensor out = x.value();
  for (auto &v : out.values())
    v = v > 0.0 ? v : 0.0;
  return Var(make_node(std::move(out), {x.node()}, [](Node &self) {
    Node &xn = *self.parents[0];
    Tensor &gx = grad_of(xn);
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xn.value[i] > 0.0)
        gx[i] += self.grad[i];
  }));
}

Var adaptive_avg_pool(const Var &x) {
  Tensor out = adaptive_avg_pool(x.value());
  return Var(make_node(std::move(out), {x.node()}, [](Node &self) {
    Node &xn = *self.parents[0];
    const auto [B, C, L] = conv_dims(xn.value);
    Tensor &gx = grad_of(xn);
    const double inv = 1.0 / static_cast<double>(L);
    for (std::size_t r = 0; r < B * C; ++r)
      for (std::size_t l = 0; l < L; ++l)
        gx[r * L + l] += self.grad[r] * inv;
  }));
}

Var dense(const Var &x, const Var &w, const Var &b) {
  const Tensor &xv = x.value(), &wv = w.value(), &bv = b.value();
  if (xv.rank() != 2 || wv.rank() != 2 || wv.dim(1) != xv.dim(1) || bv.rank() != 1 ||
      bv.dim(0) != wv.dim(0))
    shape_error("dense: input " + xv.shape_string() + ", weights " + wv.shape_string() +
                ", bias " + bv.shape_string());
  const std::size_t B = xv.dim(0), I = xv.dim(1), O = wv.dim(0);
  Tensor out({B, O});
  for (std::size_t bi = 0; bi < B; ++bi)
    for (std::size_t o = 0; o < O; ++o) {
      double s = bv[o];
      const double *wr = wv.data() + o * I;
      const double *xr = xv.data() + bi * I;
      for (std::size_t i = 0; i < I; ++i)
        s += wr[i] * xr[i];
      out[bi * O + o] = s;
    }
  return Var(make_node(std::move(out), {x.node(), w.node(), b.node()}, [](Node &self) {
    Node &xn = *self.parents[0], &wn = *self.parents[1], &bn = *self.parents[2];
    const std::size_t B = xn.value.dim(0), I = xn.value.dim(1), O = wn.value.dim(0);
    double *gx = xn.requires_grad ? grad_of(xn).data() : nullptr;
    double *gw = wn.requires_grad ? grad_of(wn).data() : nullptr;
    double *gb = bn.requires_grad ? grad_of(bn).data() : nullptr;
    for (std::size_t bi = 0; bi < B; ++bi) {
      const double *xr = xn.value.data() + bi * I;
      for (std::size_t o = 0; o < O; ++o) {
        const double g = self.grad[bi * O + o];
        if (g == 0.0)
          continue;
        if (gb)
          gb[o] += g;
        const double *wr = wn.value.data() + o * I;
        if (gw)
          for (std::size_t i = 0; i < I; ++i)
            gw[o * I + i] += g * xr[i];
        if (gx)
          for (std::size_t i = 0; i < I; ++i)
            gx[bi * I + i] += g * wr[i];
      }
    }
  }));
}

Var dropout(const Var &x, double rate, Rng &rng, bool active, Tensor *mask_out) {
  auto r = dropout_forward(x.value(), rate, rng, active);
  if (mask_out)
    *mask_out = r.mask;
  return Var(make_node(std::move(r.output), {x.node()}, [mask = std::move(r.mask)](Node &self) {
    Tensor &gx = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += self.grad[i] * mask[i];
  }));
}

Var sum(const Var &x) {
  double s = 0.0;
  for (double v : x.value().values())
    s += v;
  return Var(make_node(Tensor({1}, s), {x.node()}, [](Node &self) {
    Tensor &gx = grad_of(*self.parents[0]);
    for (auto &g : gx.values())
      g += self.grad[0];
  }));
}

Var mul(const Var &a, const Var &b) {
  if (!a.value().same_shape(b.value()))
    shape_error("mul: " + a.value().shape_string() + " vs " + b.value().shape_string());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] *= b.value()[i];
  return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node &self) {
    Node &an = *self.parents[0], &bn = *self.parents[1];
    // Read both values before accumulating: a and b may be the same node.
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double av = an.value[i], bv = bn.value[i];
      if (an.requires_grad)
        grad_of(an)[i] += self.grad[i] * bv;
      if (bn.requires_grad)
        grad_of(bn)[i] += self.grad[i] * av;
    }
  }));
}

Var nll(const Var &raw_head, std::span<const double> target) {
  const Tensor &raw = raw_head.value();
  auto pred = gaussian_head_forward(raw);
  if (pred.size() != target.size())
    throw Error(Errc::LengthMismatch, "nll: batch/target length mismatch");
  const double loss = nll_loss(pred, target);
  std::vector<double> y(target.begin(), target.end());
  return Var(make_node(Tensor({1}, loss), {raw_head.node()}, [y = std::move(y)](Node &self) {
    Node &hn = *self.parents[0];
    Tensor &gh = grad_of(hn);
    const double scale = self.grad[0] / static_cast<double>(y.size());
    for (std::size_t b = 0; b < y.size(); ++b) {
      const double mu = hn.value[2 * b];
      const double var = std::exp(hn.value[2 * b + 1]);
      const double eff = std::max(var, kVarianceFloor);
      const double d = y[b] - mu;
      gh[2 * b] += -d / eff * scale;
      if (var > kVarianceFloor)
        gh[2 * b + 1] += (0.5 - d * d / (2.0 * var)) * scale;
    }
  }));
}

void backward(const Var &loss) {
  const auto &root = loss.node();
  if (!root)
    throw Error(Errc::Precondition, "backward: empty variable");
  if (root->freed)
    throw Error(Errc::GraphFreed, "graph already consumed by a previous backward()");
  if (root->value.size() != 1)
    throw Error(Errc::ShapeMismatch, "backward: loss must be a scalar");
  if (!root->requires_grad)
    return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node *> order;
  std::unordered_set<Node *> seen;
  std::vector<std::pair<Node *, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto &[n, next] = stack.back();
    if (next < n->parents.size()) {
      Node *p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second)
        stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  grad_of(*root).fill(0.0);
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward)
      (*it)->backward(**it);

  for (Node *n : order) {
    if (n->parents.empty())
      continue;
    n->backward = nullptr;
    n->parents.clear();
    n->grad = Tensor();
    n->freed = true;
  }
}

// ---------------------------------------------------------------------------
// Layers

std::string to_string(LayerKind kind) {
  switch (kind) {
  case LayerKind::Conv1d: return "conv1d";
  case LayerKind::Relu: return "relu";
  case LayerKind::AdaptiveAvgPool: return "adaptive_avg_pool";
  case LayerKind::Dense: return "dense";
  case LayerKind::Dropout: return "dropout";
  case LayerKind::GaussianHead: return "gaussian_head";
  }
  return "unknown";
}

void LayerSpec::validate() const {
  auto bad = [](const std::string &what) { throw Error(Errc::InvalidConfig, what); };
  switch (kind) {
  case LayerKind::Conv1d:
    if (in_channels == 0 || filters == 0 || kernel == 0)
      bad("conv1d needs positive channels, filters and kernel");
    if (padding == Padding::Same && kernel % 2 == 0)
      bad("conv1d with same padding needs an odd kernel, got " + std::to_string(kernel));
    break;
  case LayerKind::Dense:
    if (in_features == 0 || out_features == 0)
      bad("dense needs positive in/out features");
    break;
  case LayerKind::GaussianHead:
    if (in_features == 0 || out_features != 2)
      bad("gaussian head needs positive in_features and exactly 2 outputs");
    break;
  case LayerKind::Dropout:
    if (!(rate >= 0.0 && rate < 1.0))
      bad("dropout rate must lie in [0,1)");
    break;
  case LayerKind::Relu:
  case LayerKind::AdaptiveAvgPool:
    break;
  }
}

std::string LayerSpec::manifest() const {
  std::string s = to_string(kind);
  switch (kind) {
  case LayerKind::Conv1d:
    s += " in_channels=" + std::to_string(in_channels) + " filters=" + std::to_string(filters) +
         " kernel=" + std::to_string(kernel) + " padding=same";
    break;
  case LayerKind::Dense:
  case LayerKind::GaussianHead:
    s += " in_features=" + std::to_string(in_features) +
         " out_features=" + std::to_string(out_features);
    break;
  case LayerKind::Dropout:
    s += " rate=" + kv::format_double(rate);
    break;
  default:
    break;
  }
  return s;
}

namespace {

LayerSpec parse_manifest(const std::string &line) {
  std::istringstream in(line);
  std::string kind;
  in >> kind;
  LayerSpec spec;
  bool known = false;
  for (auto k : {LayerKind::Conv1d, LayerKind::Relu, LayerKind::AdaptiveAvgPool,
                 LayerKind::Dense, LayerKind::Dropout, LayerKind::GaussianHead})
    if (to_string(k) == kind) {
      spec.kind = k;
      known = true;
    }
  if (!known)
    throw Error(Errc::Format, "unknown layer kind '" + kind + "'");
  kv::Table fields;
  std::string tok;
  while (in >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::Format, "bad manifest token '" + tok + "'");
    fields[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  spec.in_channels = static_cast<std::size_t>(kv::get_int(fields, "in_channels", 0));
  spec.filters = static_cast<std::size_t>(kv::get_int(fields, "filters", 0));
  spec.kernel = static_cast<std::size_t>(kv::get_int(fields, "kernel", 0));
  spec.in_features = static_cast<std::size_t>(kv::get_int(fields, "in_features", 0));
  spec.out_features = static_cast<std::size_t>(kv::get_int(fields, "out_features", 0));
  spec.rate = kv::get_double(fields, "rate", 0.0);
  if (kv::get_string(fields, "padding", "same") != "same")
    throw Error(Errc::Format, "only same padding is supported");
  spec.validate();
  return spec;
}

std::string layer_key(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "layer.%02zu", i);
  return buf;
}

std::string param_key(std::size_t i, char which) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "p%02zu.%c", i, which);
  return buf;
}

Tensor from_array(const NamedArray &a) {
  return Tensor(std::vector<std::size_t>(a.shape.begin(), a.shape.end()), a.data);
}

} // namespace

void xavier_uniform(Tensor &t, std::size_t fan_in, std::size_t fan_out, Rng &rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  for (auto &v : t.values())
    v = u(rng);
}

Sequential::Sequential(std::vector<LayerSpec> specs, Rng &rng) : specs_(std::move(specs)) {
  params_.resize(specs_.size());
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto &s = specs_[i];
    s.validate();
    if (s.kind == LayerKind::Conv1d) {
      Tensor w({s.filters, s.in_channels, s.kernel});
      xavier_uniform(w, s.in_channels * s.kernel, s.filters * s.kernel, rng);
      params_[i] = {parameter(std::move(w)), parameter(Tensor({s.filters}, 0.0))};
    } else if (s.kind == LayerKind::Dense || s.kind == LayerKind::GaussianHead) {
      Tensor w({s.out_features, s.in_features});
      xavier_uniform(w, s.in_features, s.out_features, rng);
      params_[i] = {parameter(std::move(w)), parameter(Tensor({s.out_features}, 0.0))};
    }
  }
}

Var Sequential::forward(const Var &input, Rng &rng, bool dropout_active) const {
  Var x = input;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto &s = specs_[i];
    switch (s.kind) {
    case LayerKind::Conv1d: x = conv1d(x, params_[i].w, params_[i].b); break;
    case LayerKind::Relu: x = relu(x); break;
    case LayerKind::AdaptiveAvgPool: x = adaptive_avg_pool(x); break;
    case LayerKind::Dense:
    case LayerKind::GaussianHead: x = dense(x, params_[i].w, params_[i].b); break;
    case LayerKind::Dropout: x = dropout(x, s.rate, rng, dropout_active); break;
    }
  }
  return x;
}

std::vector<Var> Sequential::parameters() const {
  std::vector<Var> out;
  for (const auto &p : params_)
    if (p.w.node()) {
      out.push_back(p.w);
      out.push_back(p.b);
    }
  return out;
}

std::size_t Sequential::parameter_count() const {
  std::size_t n = 0;
  for (const auto &v : parameters())
    n += v.value().size();
  return n;
}

void Sequential::set_dropout_rate(double rate) {
  require(rate >= 0.0 && rate < 1.0, "dropout rate must lie in [0,1)");
  for (auto &s : specs_)
    if (s.kind == LayerKind::Dropout)
      s.rate = rate;
}

void Sequential::save(Container &c) const {
  c.header["layers"] = std::to_string(specs_.size());
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    c.header[layer_key(i)] = specs_[i].manifest();
    if (!params_[i].w.node())
      continue;
    for (auto [which, var] : {std::pair{'w', &params_[i].w}, std::pair{'b', &params_[i].b}}) {
      const Tensor &t = var->value();
      c.add(param_key(i, which), std::vector<std::uint64_t>(t.shape().begin(), t.shape().end()),
            t.storage());
    }
  }
}

Sequential Sequential::load(const Container &c) {
  Sequential s;
  const auto n = static_cast<std::size_t>(kv::get_int(c.header, "layers", 0));
  for (std::size_t i = 0; i < n; ++i) {
    auto it = c.header.find(layer_key(i));
    if (it == c.header.end())
      throw Error(Errc::Format, "manifest lacks " + layer_key(i));
    s.specs_.push_back(parse_manifest(it->second));
  }
  s.params_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto &spec = s.specs_[i];
    if (spec.kind != LayerKind::Conv1d && spec.kind != LayerKind::Dense &&
        spec.kind != LayerKind::GaussianHead)
      continue;
    Tensor w = from_array(c.get(param_key(i, 'w')));
    Tensor b = from_array(c.get(param_key(i, 'b')));
    const bool conv = spec.kind == LayerKind::Conv1d;
    const std::vector<std::size_t> ws =
        conv ? std::vector<std::size_t>{spec.filters, spec.in_channels, spec.kernel}
             : std::vector<std::size_t>{spec.out_features, spec.in_features};
    const std::size_t bs = conv ? spec.filters : spec.out_features;
    if (w.shape() != ws || b.shape() != std::vector<std::size_t>{bs})
      throw Error(Errc::ShapeMismatch, "stored tensor shape disagrees with " + layer_key(i));
    s.params_[i] = {parameter(std::move(w)), parameter(std::move(b))};
  }
  return s;
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(std::span<Tensor *const> params, std::span<const Tensor *const> grads,
               AdamState &st) {
  if (params.size() != grads.size())
    shape_error("adam: parameter/gradient count mismatch");
  if (st.m.empty()) {
    for (const Tensor *p : params) {
      st.m.emplace_back(p->shape(), 0.0);
      st.v.emplace_back(p->shape(), 0.0);
    }
  }
  if (st.m.size() != params.size())
    shape_error("adam: state was created for a different parameter set");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(st.m[i]))
      shape_error("adam: shape mismatch for parameter " + std::to_string(i));

  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor &p = *params[i];
    const Tensor &g = *grads[i];
    Tensor &m = st.m[i], &v = st.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = st.beta1 * m[j] + (1.0 - st.beta1) * g[j];
      v[j] = st.beta2 * v[j] + (1.0 - st.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= st.learning_rate * mhat / (std::sqrt(vhat) + st.epsilon);
    }
  }
}

void adam_step(std::span<const Var> params, AdamState &st) {
  std::vector<Tensor *> ps;
  std::vector<const Tensor *> gs;
  std::vector<Tensor> zeros; // leaves that never received a gradient
  zeros.reserve(params.size());
  for (const auto &v : params) {
    ps.push_back(&v.node()->value);
    if (v.grad().empty()) {
      zeros.emplace_back(v.value().shape(), 0.0);
      gs.push_back(&zeros.back());
    } else {
      gs.push_back(&v.grad());
    }
  }
  adam_step(ps, gs, st);
}

} // namespace vphm::nn
