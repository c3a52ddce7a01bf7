#pragma once

// Two-phase training. Phase one fits the encoder and experts as a multi-headed
// autoencoder on clustered normal data. Phase two freezes them and fits the
// alarm and gate against the real samples plus Gaussian noise counterexamples.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "argue/adam.hpp"
#include "argue/clustering.hpp"
#include "argue/error.hpp"
#include "argue/matrix.hpp"
#include "argue/model.hpp"
#include "argue/random.hpp"

namespace argue {

enum class TrainMode : std::uint8_t { unsupervised, semi_supervised };

inline const char* to_string(TrainMode m) {
  return m == TrainMode::unsupervised ? "unsupervised" : "semi_supervised";
}

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "unsupervised") return TrainMode::unsupervised;
  if (s == "semi" || s == "semi_supervised") return TrainMode::semi_supervised;
  throw ConfigError("unknown mode '" + s + "' (expected unsupervised or semi)");
}

struct TrainConfig {
  std::size_t epochs_pretrain = 30;
  std::size_t epochs_detector = 30;
  std::size_t batch_size = 256;
  double noise_ratio = 1.0;  // noise samples per real sample in each detector batch
  TrainMode mode = TrainMode::unsupervised;
  std::size_t known_anomaly_budget = 0;
  std::uint64_t seed = 0;
  AdamOptions optimizer{};

  void validate() const {
    if (epochs_pretrain == 0 || epochs_detector == 0) throw ConfigError("epoch counts must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(noise_ratio > 0)) throw ConfigError("noise_ratio must be positive");
    if (mode == TrainMode::unsupervised && known_anomaly_budget != 0)
      throw ConfigError("unsupervised mode requires known_anomaly_budget = 0");
  }
};

/// What the detector phase trains on: clustered normal rows plus, in
/// semi-supervised mode, the labeled anomalies.
struct TrainingSet {
  Matrix normals;
  ClusterAssignment assignment;
  Matrix known_anomalies;
};

// ---------------------------------------------------------------------------
// Targets

struct SampleKind {
  enum class Kind : std::uint8_t { normal, known_anomaly, noise };
  Kind kind = Kind::normal;
  std::size_t expert = 0;

  static SampleKind normal(std::size_t j) { return {Kind::normal, j}; }
  static SampleKind known_anomaly() { return {Kind::known_anomaly, 0}; }
  static SampleKind noise() { return {Kind::noise, 0}; }
};

struct TargetPair {
  double y = 0.0;
  std::vector<double> p_target;
};

/// [0, …, 0, 1]: all gate mass on the short-cut.
inline std::vector<double> anomaly_gate_target(std::size_t expert_count) {
  std::vector<double> p(expert_count + 1, 0.0);
  p.back() = 1.0;
  return p;
}

inline TargetPair make_targets(SampleKind kind, std::size_t expert_count,
                               TrainMode mode = TrainMode::semi_supervised) {
  switch (kind.kind) {
    case SampleKind::Kind::normal: {
      if (kind.expert >= expert_count)
        throw IndexError("normal sample expert " + std::to_string(kind.expert) + " >= J=" +
                         std::to_string(expert_count));
      TargetPair t{0.0, std::vector<double>(expert_count + 1, 0.0)};
      t.p_target[kind.expert] = 1.0;
      return t;
    }
    case SampleKind::Kind::known_anomaly:
      if (mode == TrainMode::unsupervised) throw ModeError("known anomalies are not allowed in unsupervised mode");
      return {1.0, anomaly_gate_target(expert_count)};
    case SampleKind::Kind::noise:
      return {1.0, anomaly_gate_target(expert_count)};
  }
  return {};
}

/// i.i.d. N(0.5, 1) entries, unclipped.
inline Matrix sample_noise(std::size_t dim, std::size_t count, Rng& rng) {
  if (dim == 0 || count == 0) throw ConfigError("sample_noise needs dim, count >= 1");
  Matrix m(count, dim);
  std::normal_distribution<double> dist(0.5, 1.0);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

// ---------------------------------------------------------------------------
// Logging

struct EpochRecord {
  std::string phase;  // "pretrain" or "detector"
  std::size_t epoch = 0;
  double loss = 0.0;  // pretrain: mean reconstruction MSE; detector: alarm + gate loss
  double alarm_loss = 0.0;
  double gate_loss = 0.0;
};

inline std::string to_json_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["phase"] = r.phase;
  j["epoch"] = r.epoch;
  if (r.phase == "pretrain") {
    j["pretrain_loss"] = r.loss;
  } else {
    j["detector_loss"] = r.loss;
    j["alarm_loss"] = r.alarm_loss;
    j["gate_loss"] = r.gate_loss;
  }
  return j.dump();
}

using EpochLogger = std::function<void(const EpochRecord&)>;

// ---------------------------------------------------------------------------
// Phase one

namespace detail {

inline std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

// Shared by ARGUE pretraining and the plain autoencoder baseline so that a
// single expert reproduces the baseline exactly.
inline std::vector<double> train_reconstruction(Network& encoder, std::vector<Network>& decoders, const Matrix& x,
                                                std::span<const std::size_t> decoder_of, const TrainConfig& cfg,
                                                const EpochLogger& log) {
  detail::require_shape(x.rows() == decoder_of.size(), "pretrain: assignment size does not match data");
  detail::require_shape(x.cols() == encoder.input_dim(), "pretrain: feature width does not match encoder");
  AdamState enc_state(encoder.param_count(), cfg.optimizer);
  std::vector<AdamState> dec_state;
  for (const auto& d : decoders) dec_state.emplace_back(d.param_count(), cfg.optimizer);

  Rng rng(mix_seed(cfg.seed, stream::pretrain_shuffle));
  auto order = iota_indices(x.rows());
  std::vector<double> epoch_losses;
  std::vector<double> g_enc(encoder.param_count());
  std::vector<std::vector<double>> g_dec;
  for (const auto& d : decoders) g_dec.emplace_back(d.param_count());

  for (std::size_t epoch = 0; epoch < cfg.epochs_pretrain; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double w = 1.0 / static_cast<double>(end - start);
      std::fill(g_enc.begin(), g_enc.end(), 0.0);
      for (auto& g : g_dec) std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        const std::size_t j = decoder_of[i];
        const auto xi = x.row(i);
        const auto enc = encoder.forward(xi);
        const auto dec = decoders[j].forward(enc.output);
        total += loss_mse(xi, dec.output);
        OutputGrads og;
        og.output = loss_mse_grad(xi, dec.output);
        for (double& v : og.output) v *= w;
        OutputGrads enc_og;
        enc_og.output = decoders[j].backward(enc.output, dec, og, g_dec[j]);
        encoder.backward(xi, enc, enc_og, g_enc);
      }
      adam_step(encoder.params(), g_enc, enc_state);
      for (std::size_t j = 0; j < decoders.size(); ++j) adam_step(decoders[j].params(), g_dec[j], dec_state[j]);
    }
    const double mean = total / static_cast<double>(x.rows());
    epoch_losses.push_back(mean);
    if (log) log({"pretrain", epoch, mean, 0.0, 0.0});
  }
  return epoch_losses;
}

}  // namespace detail

/// Fits encoder and experts; expert j sees only rows assigned to j while the
/// encoder accumulates gradients from every expert. Returns per-epoch mean MSE.
inline std::vector<double> pretrain(ArgueModel& model, const Matrix& normals, const ClusterAssignment& assignment,
                                    const TrainConfig& cfg, const EpochLogger& log = {}) {
  cfg.validate();
  if (assignment.expert_count != model.experts.size())
    throw ConfigError("assignment has " + std::to_string(assignment.expert_count) + " clusters but model has " +
                      std::to_string(model.experts.size()) + " experts");
  assignment.validate();
  return detail::train_reconstruction(model.encoder, model.experts, normals, assignment.expert_index, cfg, log);
}

// ---------------------------------------------------------------------------
// Phase two

struct BatchPlan {
  std::size_t real = 0;
  std::size_t noise = 0;
};

/// Real/noise counts of every detector batch in one epoch.
inline std::vector<BatchPlan> detector_batch_plan(std::size_t n_real, std::size_t batch_size, double noise_ratio) {
  std::vector<BatchPlan> plan;
  for (std::size_t start = 0; start < n_real; start += batch_size) {
    const std::size_t real = std::min(batch_size, n_real - start);
    const auto noise = static_cast<std::size_t>(std::llround(noise_ratio * static_cast<double>(real)));
    plan.push_back({real, std::max<std::size_t>(1, noise)});
  }
  return plan;
}

/// Fits alarm and gate with encoder and experts frozen. Returns per-epoch
/// composite losses (alarm BCE + gate CCE, real and noise terms summed).
inline std::vector<double> train_detector(ArgueModel& model, const TrainingSet& data, const TrainConfig& cfg,
                                          const EpochLogger& log = {}) {
  cfg.validate();
  const std::size_t J = model.experts.size();
  if (data.assignment.expert_count != J) throw ConfigError("assignment does not match expert count");
  if (data.assignment.size() != data.normals.rows()) throw ShapeError("assignment size does not match normals");
  if (cfg.mode == TrainMode::unsupervised && data.known_anomalies.rows() > 0)
    throw ModeError("known anomalies are not allowed in unsupervised mode");

  // Real samples with cached head inputs; frozen encoder/experts make them constant.
  std::vector<HeadInputs> inputs;
  std::vector<TargetPair> targets;
  for (std::size_t i = 0; i < data.normals.rows(); ++i) {
    inputs.push_back(head_inputs(model, data.normals.row(i)));
    targets.push_back(make_targets(SampleKind::normal(data.assignment.expert_index[i]), J, cfg.mode));
  }
  for (std::size_t i = 0; i < data.known_anomalies.rows(); ++i) {
    inputs.push_back(head_inputs(model, data.known_anomalies.row(i)));
    targets.push_back(make_targets(SampleKind::known_anomaly(), J, cfg.mode));
  }
  if (inputs.empty()) throw ConfigError("detector training needs at least one sample");
  const auto noise_target = make_targets(SampleKind::noise(), J, cfg.mode);

  AdamState alarm_state(model.alarm.param_count(), cfg.optimizer);
  AdamState gate_state(model.gate.param_count(), cfg.optimizer);
  Rng shuffle_rng(mix_seed(cfg.seed, stream::detector_shuffle));
  Rng noise_rng(mix_seed(cfg.seed, stream::detector_noise));
  auto order = detail::iota_indices(inputs.size());
  const auto plan = detector_batch_plan(inputs.size(), cfg.batch_size, cfg.noise_ratio);
  ArgueGradients grads(model);
  std::vector<double> epoch_losses;

  for (std::size_t epoch = 0; epoch < cfg.epochs_detector; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double alarm_sum = 0, gate_sum = 0;
    std::size_t start = 0;
    for (const auto& batch : plan) {
      std::fill(grads.alarm.begin(), grads.alarm.end(), 0.0);
      std::fill(grads.gate.begin(), grads.gate.end(), 0.0);
      const double w_real = 1.0 / static_cast<double>(batch.real);
      const double w_noise = 1.0 / static_cast<double>(batch.noise);
      double a_loss = 0, g_loss = 0;
      for (std::size_t b = start; b < start + batch.real; ++b) {
        const auto i = order[b];
        const auto pass = run_heads(model, inputs[i]);
        a_loss += w_real * loss_bce(targets[i].y, pass.scored.anomaly_score);
        g_loss += w_real * loss_cce(targets[i].p_target, pass.scored.gating.p);
        detail::heads_backward(model, inputs[i], pass, targets[i].y, targets[i].p_target, w_real,
                               GradientRouting::split_objectives, grads);
      }
      const auto noise = sample_noise(model.config.input_dim, batch.noise, noise_rng);
      for (std::size_t r = 0; r < noise.rows(); ++r) {
        const auto in = head_inputs(model, noise.row(r));
        const auto pass = run_heads(model, in);
        a_loss += w_noise * loss_bce(noise_target.y, pass.scored.anomaly_score);
        g_loss += w_noise * loss_cce(noise_target.p_target, pass.scored.gating.p);
        detail::heads_backward(model, in, pass, noise_target.y, noise_target.p_target, w_noise,
                               GradientRouting::split_objectives, grads);
      }
      adam_step(model.alarm.params(), grads.alarm, alarm_state);
      adam_step(model.gate.params(), grads.gate, gate_state);
      alarm_sum += a_loss;
      gate_sum += g_loss;
      start += batch.real;
    }
    const double nb = static_cast<double>(plan.size());
    EpochRecord rec{"detector", epoch, (alarm_sum + gate_sum) / nb, alarm_sum / nb, gate_sum / nb};
    epoch_losses.push_back(rec.loss);
    if (log) log(rec);
  }
  return epoch_losses;
}

}  // namespace argue
