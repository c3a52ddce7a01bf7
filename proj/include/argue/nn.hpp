#pragma once

// Dense feed-forward networks that expose every layer output, with hand-written
// reverse-mode gradients. Gradients may be injected at any layer output, which
// is how losses spanning several chained networks are assembled.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "argue/error.hpp"
#include "argue/random.hpp"

namespace argue {

enum class Activation : std::uint8_t { leaky_relu = 0, sigmoid = 1, softmax = 2, identity = 3 };

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kProbEps = 1e-7;

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
    case Activation::identity: return "identity";
  }
  return "?";
}

struct LayerSpec {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Activation activation = Activation::identity;

  bool operator==(const LayerSpec&) const = default;
};

/// Result of a forward pass: one vector per non-final layer plus the network output.
struct ForwardTrace {
  std::vector<double> output;
  std::vector<std::vector<double>> hidden_activations;

  /// Output of layer `l` (the last layer's output is `output`).
  const std::vector<double>& layer_output(std::size_t l) const {
    return l < hidden_activations.size() ? hidden_activations[l] : output;
  }
  std::size_t layer_count() const { return hidden_activations.size() + 1; }

  bool operator==(const ForwardTrace&) const = default;
};

/// Gradients injected at layer outputs during backward; empty vectors mean zero.
struct OutputGrads {
  std::vector<double> output;
  std::vector<std::vector<double>> hidden;
};

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline void activate(Activation a, std::span<double> z) {
  switch (a) {
    case Activation::leaky_relu:
      for (double& v : z) v = v > 0 ? v : kLeakySlope * v;
      break;
    case Activation::sigmoid:
      for (double& v : z) v = sigmoid(v);
      break;
    case Activation::softmax: {
      const double peak = *std::max_element(z.begin(), z.end());
      double sum = 0;
      for (double& v : z) sum += (v = std::exp(v - peak));
      for (double& v : z) v /= sum;
      break;
    }
    case Activation::identity:
      break;
  }
}

// Turns dL/dh into dL/dz in place, given the post-activation values h.
inline void activation_backward(Activation a, std::span<const double> h, std::span<double> g) {
  switch (a) {
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= h[i] > 0 ? 1.0 : kLeakySlope;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= h[i] * (1.0 - h[i]);
      break;
    case Activation::softmax: {
      double dot = 0;
      for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * h[i];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = h[i] * (g[i] - dot);
      break;
    }
    case Activation::identity:
      break;
  }
}

}  // namespace detail

class Network {
 public:
  Network() = default;

  /// Validates the layer chain and allocates zeroed parameters.
  explicit Network(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ConfigError("network needs at least one layer");
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& s = layers_[l];
      if (s.input_dim == 0 || s.output_dim == 0)
        throw ConfigError("layer " + std::to_string(l) + " has a zero dimension");
      if (s.activation == Activation::softmax && l + 1 != layers_.size())
        throw ConfigError("softmax is only allowed on the final layer");
      if (l > 0 && layers_[l - 1].output_dim != s.input_dim)
        throw ConfigError("layer " + std::to_string(l) + " input does not chain with previous output");
      offsets_.push_back(offset);
      offset += s.input_dim * s.output_dim + s.output_dim;
    }
    offsets_.push_back(offset);
    params_.assign(offset, 0.0);
  }

  /// Chain of dense layers with `hidden` activation everywhere but the last.
  static Network mlp(std::size_t input_dim, std::span<const std::size_t> widths, Activation hidden,
                     Activation final) {
    std::vector<LayerSpec> specs;
    std::size_t in = input_dim;
    for (std::size_t l = 0; l < widths.size(); ++l) {
      specs.push_back({in, widths[l], l + 1 == widths.size() ? final : hidden});
      in = widths[l];
    }
    return Network(std::move(specs));
  }

  /// Glorot-uniform weights, zero biases.
  void init_glorot(std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& s = layers_[l];
      const double limit = std::sqrt(6.0 / static_cast<double>(s.input_dim + s.output_dim));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& w : weights(l)) w = dist(rng);
      for (double& b : bias(l)) b = 0.0;
    }
  }

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t input_dim() const { return layers_.front().input_dim; }
  std::size_t output_dim() const { return layers_.back().output_dim; }
  std::size_t param_count() const noexcept { return params_.size(); }

  /// Sum of widths of all non-final layers.
  std::size_t hidden_width() const {
    std::size_t w = 0;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) w += layers_[l].output_dim;
    return w;
  }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  /// Row-major (output_dim x input_dim) weights of layer l.
  std::span<double> weights(std::size_t l) {
    return {params_.data() + offsets_[l], layers_[l].input_dim * layers_[l].output_dim};
  }
  std::span<const double> weights(std::size_t l) const {
    return {params_.data() + offsets_[l], layers_[l].input_dim * layers_[l].output_dim};
  }
  std::span<double> bias(std::size_t l) {
    return {params_.data() + offsets_[l] + layers_[l].input_dim * layers_[l].output_dim,
            layers_[l].output_dim};
  }
  std::span<const double> bias(std::size_t l) const {
    return {params_.data() + offsets_[l] + layers_[l].input_dim * layers_[l].output_dim,
            layers_[l].output_dim};
  }

  ForwardTrace forward(std::span<const double> x) const {
    detail::require_shape(x.size() == input_dim(),
                          "forward: expected input of width " + std::to_string(input_dim()) +
                              ", got " + std::to_string(x.size()));
    ForwardTrace trace;
    trace.hidden_activations.reserve(layers_.size() - 1);
    std::vector<double> current(x.begin(), x.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& s = layers_[l];
      const auto w = weights(l);
      const auto b = bias(l);
      std::vector<double> next(b.begin(), b.end());
      for (std::size_t o = 0; o < s.output_dim; ++o) {
        const double* wr = w.data() + o * s.input_dim;
        double acc = 0;
        for (std::size_t i = 0; i < s.input_dim; ++i) acc += wr[i] * current[i];
        next[o] += acc;
      }
      detail::activate(s.activation, next);
      if (l + 1 < layers_.size()) trace.hidden_activations.push_back(next);
      current = std::move(next);
    }
    trace.output = std::move(current);
    return trace;
  }

  /// Accumulates dL/dθ into `grad` (same layout as params()) and returns dL/dx.
  /// `injected` holds dL/d(layer output) contributions; empty vectors are zero.
  std::vector<double> backward(std::span<const double> x, const ForwardTrace& trace,
                               const OutputGrads& injected, std::span<double> grad) const {
    detail::require_shape(grad.size() == params_.size(), "backward: gradient buffer size mismatch");
    detail::require_shape(trace.layer_count() == layers_.size(), "backward: trace does not match network");
    std::vector<double> g(output_dim(), 0.0);
    if (!injected.output.empty()) {
      detail::require_shape(injected.output.size() == output_dim(), "backward: output gradient width");
      g = injected.output;
    }
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& s = layers_[l];
      if (l + 1 < layers_.size() && l < injected.hidden.size() && !injected.hidden[l].empty()) {
        detail::require_shape(injected.hidden[l].size() == s.output_dim, "backward: hidden gradient width");
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += injected.hidden[l][i];
      }
      detail::activation_backward(s.activation, trace.layer_output(l), g);
      std::span<const double> in = l == 0 ? x : std::span<const double>(trace.hidden_activations[l - 1]);
      double* gw = grad.data() + offsets_[l];
      double* gb = gw + s.input_dim * s.output_dim;
      const auto w = weights(l);
      std::vector<double> g_in(s.input_dim, 0.0);
      for (std::size_t o = 0; o < s.output_dim; ++o) {
        const double d = g[o];
        gb[o] += d;
        if (d == 0.0) continue;
        double* gwr = gw + o * s.input_dim;
        const double* wr = w.data() + o * s.input_dim;
        for (std::size_t i = 0; i < s.input_dim; ++i) {
          gwr[i] += d * in[i];
          g_in[i] += d * wr[i];
        }
      }
      g = std::move(g_in);
    }
    return g;
  }

  bool operator==(const Network&) const = default;

 private:
  std::vector<LayerSpec> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// ---------------------------------------------------------------------------
// Losses. Probabilities are clamped by kProbEps; derivatives are those of the
// clamped expressions (zero where the clamp is active).

inline double loss_bce(double y, double y_hat) {
  const double p = std::clamp(y_hat, kProbEps, 1.0 - kProbEps);
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

inline double loss_bce_grad(double y, double y_hat) {
  if (y_hat < kProbEps || y_hat > 1.0 - kProbEps) return 0.0;
  return -y / y_hat + (1.0 - y) / (1.0 - y_hat);
}

inline double loss_cce(std::span<const double> p, std::span<const double> p_hat) {
  detail::require_shape(p.size() == p_hat.size(), "loss_cce: length mismatch");
  double loss = 0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] != 0.0) loss -= p[k] * std::log(std::clamp(p_hat[k], kProbEps, 1.0));
  return loss;
}

inline std::vector<double> loss_cce_grad(std::span<const double> p, std::span<const double> p_hat) {
  detail::require_shape(p.size() == p_hat.size(), "loss_cce: length mismatch");
  std::vector<double> g(p.size(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] != 0.0 && p_hat[k] >= kProbEps) g[k] = -p[k] / p_hat[k];
  return g;
}

inline double loss_mse(std::span<const double> x, std::span<const double> x_hat) {
  detail::require_shape(x.size() == x_hat.size(), "loss_mse: length mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x_hat[i] - x[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

/// dMSE/dx_hat
inline std::vector<double> loss_mse_grad(std::span<const double> x, std::span<const double> x_hat) {
  detail::require_shape(x.size() == x_hat.size(), "loss_mse: length mismatch");
  std::vector<double> g(x.size());
  const double scale = 2.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = scale * (x_hat[i] - x[i]);
  return g;
}

}  // namespace argue
