#pragma once

#include <cstdint>
#include <random>

namespace argue {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; derives independent stream seeds from a base seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream identifiers so that every consumer of a seed draws from its own sequence.
namespace stream {
inline constexpr std::uint64_t encoder = 0;
inline constexpr std::uint64_t expert_base = 1;  // expert j uses expert_base + j
inline constexpr std::uint64_t alarm = 1u << 20;
inline constexpr std::uint64_t gate = (1u << 20) + 1;
inline constexpr std::uint64_t pretrain_shuffle = (1u << 21);
inline constexpr std::uint64_t detector_shuffle = (1u << 21) + 1;
inline constexpr std::uint64_t detector_noise = (1u << 21) + 2;
inline constexpr std::uint64_t split = (1u << 22);
inline constexpr std::uint64_t kmeans = (1u << 22) + 1;
inline constexpr std::uint64_t synth = (1u << 22) + 2;
inline constexpr std::uint64_t model = (1u << 22) + 3;
inline constexpr std::uint64_t train = (1u << 22) + 4;
inline constexpr std::uint64_t split_anomalies = (1u << 22) + 5;
}  // namespace stream

}  // namespace argue
