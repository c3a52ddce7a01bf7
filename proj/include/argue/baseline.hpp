#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "argue/model.hpp"
#include "argue/nn.hpp"
#include "argue/trainer.hpp"

namespace argue {

/// Plain autoencoder scored by reconstruction MSE. Shares its layout and
/// seeding with the encoder and first expert of an ArgueModel.
struct AeBaseline {
  ArgueConfig config;  // only input_dim and encoder_dims are meaningful
  std::uint64_t seed = 0;
  Network encoder;
  Network decoder;

  bool operator==(const AeBaseline&) const = default;
};

inline AeBaseline build_ae(ArgueConfig config, std::uint64_t seed) {
  config.expert_count = 1;
  config.validate();
  AeBaseline ae;
  ae.config = config;
  ae.seed = seed;
  ae.encoder = make_encoder(config);
  ae.encoder.init_glorot(mix_seed(seed, stream::encoder));
  ae.decoder = make_expert(config);
  ae.decoder.init_glorot(mix_seed(seed, stream::expert_base));
  return ae;
}

inline std::vector<double> reconstruct(const AeBaseline& ae, std::span<const double> x) {
  return ae.decoder.forward(ae.encoder.forward(x).output).output;
}

inline double ae_score(const AeBaseline& ae, std::span<const double> x) {
  detail::require_shape(x.size() == ae.config.input_dim, "ae_score: input width mismatch");
  return loss_mse(x, reconstruct(ae, x));
}

struct TrainedAe {
  AeBaseline model;
  std::vector<double> epoch_losses;
};

/// Trains with the exact optimizer, batching and shuffling of ARGUE pretraining.
inline TrainedAe train_ae(const ArgueConfig& config, const Matrix& x, const TrainConfig& cfg, std::uint64_t model_seed,
                          const EpochLogger& log = {}) {
  cfg.validate();
  TrainedAe out{build_ae(config, model_seed), {}};
  std::vector<Network> decoders{std::move(out.model.decoder)};
  const std::vector<std::size_t> all_zero(x.rows(), 0);
  out.epoch_losses = detail::train_reconstruction(out.model.encoder, decoders, x, all_zero, cfg, log);
  out.model.decoder = std::move(decoders.front());
  return out;
}

}  // namespace argue
