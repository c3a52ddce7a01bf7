#pragma once

// Shared encoder, J expert decoders, a shared alarm network reading each
// expert path's hidden activations, and a softmax gate over the encoder
// activations whose last entry is the short-cut to a constant score of 1.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "argue/error.hpp"
#include "argue/nn.hpp"
#include "argue/random.hpp"

namespace argue {

struct ArgueConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> encoder_dims;
  std::size_t expert_count = 1;
  std::vector<std::size_t> alarm_dims{64, 32};  // hidden widths; a 1-wide sigmoid head is appended
  std::vector<std::size_t> gate_dims{64, 32};   // hidden widths; a (J+1)-wide softmax head is appended

  bool operator==(const ArgueConfig&) const = default;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const {
    if (input_dim == 0) throw ConfigError("input_dim must be positive");
    if (encoder_dims.empty()) throw ConfigError("encoder_dims must not be empty");
    for (auto d : encoder_dims)
      if (d == 0) throw ConfigError("encoder_dims entries must be positive");
    if (encoder_dims.back() >= input_dim)
      throw ConfigError("last encoder dim must be smaller than input_dim");
    if (expert_count == 0) throw ConfigError("expert_count must be at least 1");
    for (auto d : alarm_dims)
      if (d == 0) throw ConfigError("alarm_dims entries must be positive");
    for (auto d : gate_dims)
      if (d == 0) throw ConfigError("gate_dims entries must be positive");
  }

  /// Widths of the expert layers: mirrored encoder dims, then the reconstruction.
  std::vector<std::size_t> expert_widths() const {
    std::vector<std::size_t> w(encoder_dims.rbegin(), encoder_dims.rend());
    w.push_back(input_dim);
    return w;
  }

  std::size_t encoder_activation_width() const {
    std::size_t w = 0;
    for (auto d : encoder_dims) w += d;
    return w;
  }
  std::size_t bundle_width() const { return 2 * encoder_activation_width(); }
};

/// Probability vector of length J+1; the last entry is the short-cut weight.
struct GatingDistribution {
  std::vector<double> p;

  std::size_t expert_count() const { return p.size() - 1; }
  double shortcut() const { return p.back(); }
  std::span<const double> expert_weights() const { return {p.data(), p.size() - 1}; }
  /// Index of the largest expert entry (short-cut ignored), lowest index on ties.
  std::size_t argmax_expert() const {
    auto w = expert_weights();
    return static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
  }
};

struct ScoredSample {
  std::vector<double> expert_scores;
  GatingDistribution gating;
  double anomaly_score = 0.0;
};

/// Weighted sum of expert scores plus the short-cut mass.
inline double fuse_scores(std::span<const double> expert_scores, const GatingDistribution& gating) {
  detail::require_shape(gating.p.size() == expert_scores.size() + 1, "fuse_scores: gate width must be J+1");
  double y = gating.shortcut();
  for (std::size_t j = 0; j < expert_scores.size(); ++j) y += gating.p[j] * expert_scores[j];
  return std::clamp(y, 0.0, 1.0);
}

struct ArgueModel {
  ArgueConfig config;
  std::uint64_t seed = 0;
  Network encoder;
  std::vector<Network> experts;
  Network alarm;
  Network gate;

  std::size_t expert_count() const { return experts.size(); }
  bool operator==(const ArgueModel&) const = default;
};

inline Network make_encoder(const ArgueConfig& c) {
  // The final encoder layer is the latent code, itself a hidden layer of every expert path.
  return Network::mlp(c.input_dim, c.encoder_dims, Activation::leaky_relu, Activation::leaky_relu);
}

inline Network make_expert(const ArgueConfig& c) {
  return Network::mlp(c.encoder_dims.back(), c.expert_widths(), Activation::leaky_relu, Activation::sigmoid);
}

inline ArgueModel build(const ArgueConfig& config, std::uint64_t seed) {
  config.validate();
  ArgueModel m;
  m.config = config;
  m.seed = seed;
  m.encoder = make_encoder(config);
  m.encoder.init_glorot(mix_seed(seed, stream::encoder));
  for (std::size_t j = 0; j < config.expert_count; ++j) {
    m.experts.push_back(make_expert(config));
    m.experts.back().init_glorot(mix_seed(seed, stream::expert_base + j));
  }
  std::vector<std::size_t> alarm_widths = config.alarm_dims;
  alarm_widths.push_back(1);
  m.alarm = Network::mlp(config.bundle_width(), alarm_widths, Activation::leaky_relu, Activation::sigmoid);
  m.alarm.init_glorot(mix_seed(seed, stream::alarm));
  std::vector<std::size_t> gate_widths = config.gate_dims;
  gate_widths.push_back(config.expert_count + 1);
  m.gate = Network::mlp(config.encoder_activation_width(), gate_widths, Activation::leaky_relu,
                        Activation::softmax);
  m.gate.init_glorot(mix_seed(seed, stream::gate));
  return m;
}

// ---------------------------------------------------------------------------
// Forward pieces

/// All encoder layer outputs concatenated in layer order.
inline std::vector<double> concat_all(const ForwardTrace& t) {
  std::vector<double> out;
  for (const auto& h : t.hidden_activations) out.insert(out.end(), h.begin(), h.end());
  out.insert(out.end(), t.output.begin(), t.output.end());
  return out;
}

inline ForwardTrace encode(const ArgueModel& m, std::span<const double> x) {
  detail::require_shape(x.size() == m.config.input_dim,
                        "encode: expected " + std::to_string(m.config.input_dim) + " features, got " +
                            std::to_string(x.size()));
  return m.encoder.forward(x);
}

struct ExpertPass {
  std::vector<double> reconstruction;
  std::vector<double> bundle;  // [encoder activations ; expert hidden activations]
  ForwardTrace trace;
};

inline ExpertPass expert_forward(const ArgueModel& m, std::size_t j, const ForwardTrace& enc) {
  if (j >= m.experts.size())
    throw IndexError("expert index " + std::to_string(j) + " out of range [0, " +
                     std::to_string(m.experts.size()) + ")");
  ExpertPass pass;
  pass.trace = m.experts[j].forward(enc.output);
  pass.bundle = concat_all(enc);
  for (const auto& h : pass.trace.hidden_activations) pass.bundle.insert(pass.bundle.end(), h.begin(), h.end());
  pass.reconstruction = pass.trace.output;
  return pass;
}

inline ExpertPass expert_forward(const ArgueModel& m, std::size_t j, std::span<const double> x) {
  if (j >= m.experts.size())
    throw IndexError("expert index " + std::to_string(j) + " out of range [0, " +
                     std::to_string(m.experts.size()) + ")");
  return expert_forward(m, j, encode(m, x));
}

inline double alarm_score(const ArgueModel& m, std::span<const double> bundle) {
  detail::require_shape(bundle.size() == m.alarm.input_dim(),
                        "alarm_score: bundle width " + std::to_string(bundle.size()) + " != " +
                            std::to_string(m.alarm.input_dim()));
  return m.alarm.forward(bundle).output[0];
}

inline GatingDistribution gate_forward(const ArgueModel& m, const ForwardTrace& enc) {
  auto in = concat_all(enc);
  detail::require_shape(in.size() == m.gate.input_dim(), "gate_forward: encoder trace width mismatch");
  return {m.gate.forward(in).output};
}

/// Cached inputs of the alarm and gate for one sample; constant while the
/// encoder and experts are frozen.
struct HeadInputs {
  std::vector<double> encoder_activations;
  std::vector<std::vector<double>> bundles;
};

inline HeadInputs head_inputs(const ArgueModel& m, std::span<const double> x) {
  auto enc = encode(m, x);
  HeadInputs in;
  in.encoder_activations = concat_all(enc);
  for (std::size_t j = 0; j < m.experts.size(); ++j) in.bundles.push_back(expert_forward(m, j, enc).bundle);
  return in;
}

struct HeadPass {
  std::vector<ForwardTrace> alarm;
  ForwardTrace gate;
  ScoredSample scored;
};

inline HeadPass run_heads(const ArgueModel& m, const HeadInputs& in) {
  HeadPass pass;
  pass.scored.expert_scores.reserve(in.bundles.size());
  for (const auto& b : in.bundles) {
    detail::require_shape(b.size() == m.alarm.input_dim(), "alarm: bundle width mismatch");
    pass.alarm.push_back(m.alarm.forward(b));
    pass.scored.expert_scores.push_back(pass.alarm.back().output[0]);
  }
  pass.gate = m.gate.forward(in.encoder_activations);
  pass.scored.gating.p = pass.gate.output;
  pass.scored.anomaly_score = fuse_scores(pass.scored.expert_scores, pass.scored.gating);
  return pass;
}

inline ScoredSample score(const ArgueModel& m, std::span<const double> x) {
  return run_heads(m, head_inputs(m, x)).scored;
}

// ---------------------------------------------------------------------------
// Gradients

/// Gradient buffers laid out like each network's params().
struct ArgueGradients {
  std::vector<double> encoder;
  std::vector<std::vector<double>> experts;
  std::vector<double> alarm;
  std::vector<double> gate;

  explicit ArgueGradients(const ArgueModel& m)
      : encoder(m.encoder.param_count(), 0.0),
        alarm(m.alarm.param_count(), 0.0),
        gate(m.gate.param_count(), 0.0) {
    for (const auto& e : m.experts) experts.emplace_back(e.param_count(), 0.0);
  }
};

enum class GradientRouting {
  /// Exact gradient of BCE(y, ŷ) + CCE(p, p̂) w.r.t. every parameter.
  full,
  /// Detector training: the alarm sees only the BCE term, the gate only the CCE term.
  split_objectives,
};

struct DetectorLoss {
  double bce = 0.0;
  double cce = 0.0;
};

namespace detail {

// Backprop of the head losses. Returns dL/dbundle_j per expert and dL/d(encoder
// activations) when routing is full; empty vectors otherwise.
struct HeadInputGrads {
  std::vector<std::vector<double>> bundles;
  std::vector<double> encoder_activations;
};

inline HeadInputGrads heads_backward(const ArgueModel& m, const HeadInputs& in, const HeadPass& pass, double y,
                                     std::span<const double> p_target, double weight, GradientRouting routing,
                                     ArgueGradients& grads) {
  const std::size_t J = m.experts.size();
  const auto& p_hat = pass.scored.gating.p;
  const double dy = weight * loss_bce_grad(y, pass.scored.anomaly_score);
  const bool full = routing == GradientRouting::full;

  HeadInputGrads out;
  for (std::size_t j = 0; j < J; ++j) {
    OutputGrads og;
    og.output = {dy * p_hat[j]};
    auto g_bundle = m.alarm.backward(in.bundles[j], pass.alarm[j], og, grads.alarm);
    if (full) out.bundles.push_back(std::move(g_bundle));
  }

  auto g_gate = loss_cce_grad(p_target, p_hat);
  for (double& g : g_gate) g *= weight;
  if (full) {
    for (std::size_t j = 0; j < J; ++j) g_gate[j] += dy * pass.scored.expert_scores[j];
    g_gate[J] += dy;
  }
  OutputGrads og;
  og.output = std::move(g_gate);
  auto g_enc = m.gate.backward(in.encoder_activations, pass.gate, og, grads.gate);
  if (full) out.encoder_activations = std::move(g_enc);
  return out;
}

// Scatters a gradient over concatenated encoder activations onto per-layer slots.
inline void add_encoder_slices(std::span<const double> g, OutputGrads& og, const Network& encoder) {
  std::size_t pos = 0;
  const std::size_t L = encoder.layer_count();
  if (og.hidden.size() < L - 1) og.hidden.resize(L - 1);
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t w = encoder.layers()[l].output_dim;
    auto& slot = l + 1 < L ? og.hidden[l] : og.output;
    if (slot.empty()) slot.assign(w, 0.0);
    for (std::size_t i = 0; i < w; ++i) slot[i] += g[pos + i];
    pos += w;
  }
}

}  // namespace detail

/// Accumulates weight·∇[BCE(y, ŷ(x)) + CCE(p_target, p̂(x))] into `grads`
/// and returns the unweighted loss terms.
inline DetectorLoss accumulate_gradients(const ArgueModel& m, std::span<const double> x, double y,
                                         std::span<const double> p_target, GradientRouting routing,
                                         ArgueGradients& grads, double weight = 1.0) {
  detail::require_shape(p_target.size() == m.experts.size() + 1, "gate target must have J+1 entries");
  const auto enc = encode(m, x);
  HeadInputs in;
  in.encoder_activations = concat_all(enc);
  std::vector<ExpertPass> paths;
  for (std::size_t j = 0; j < m.experts.size(); ++j) {
    paths.push_back(expert_forward(m, j, enc));
    in.bundles.push_back(paths.back().bundle);
  }
  const auto pass = run_heads(m, in);
  const DetectorLoss loss{loss_bce(y, pass.scored.anomaly_score), loss_cce(p_target, pass.scored.gating.p)};
  auto g_in = detail::heads_backward(m, in, pass, y, p_target, weight, routing, grads);
  if (routing != GradientRouting::full) return loss;

  OutputGrads enc_og;
  detail::add_encoder_slices(g_in.encoder_activations, enc_og, m.encoder);
  const std::size_t enc_width = m.config.encoder_activation_width();
  for (std::size_t j = 0; j < m.experts.size(); ++j) {
    const auto& gb = g_in.bundles[j];
    detail::add_encoder_slices(std::span<const double>(gb).first(enc_width), enc_og, m.encoder);
    OutputGrads ex_og;
    std::size_t pos = enc_width;
    for (const auto& h : paths[j].trace.hidden_activations) {
      ex_og.hidden.emplace_back(gb.begin() + pos, gb.begin() + pos + h.size());
      pos += h.size();
    }
    auto g_latent = m.experts[j].backward(enc.output, paths[j].trace, ex_og, grads.experts[j]);
    for (std::size_t i = 0; i < g_latent.size(); ++i) enc_og.output[i] += g_latent[i];
  }
  m.encoder.backward(x, enc, enc_og, grads.encoder);
  return loss;
}

}  // namespace argue
