#include <catch_amalgamated.hpp>

#include <filesystem>
#include <random>

#include "argue/persistence.hpp"

using namespace argue;
namespace fs = std::filesystem;

namespace {

ArgueModel sample_model() {
  auto m = build(ArgueConfig{7, {5, 3}, 3, {6}, {4, 4}}, 21);
  // Arbitrary bit patterns, not just the initializer's.
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  for (double& v : m.alarm.params()) v = n(rng);
  return m;
}

std::string scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "argue_test_persistence";
  fs::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("ARGUE models round trip bit for bit") {
  const auto m = sample_model();
  const auto path = scratch("m.model");
  save_model(path, m);
  const auto back = load_argue_model(path);
  CHECK(back == m);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(7);
    for (double& v : x) v = u(rng);
    CHECK(score(back, x).anomaly_score == score(m, x).anomaly_score);
  }
  CHECK(serialize(back) == serialize(m));
}

TEST_CASE("autoencoder baselines round trip") {
  const auto ae = build_ae(ArgueConfig{5, {3}, 1, {}, {}}, 9);
  const auto path = scratch("ae.model");
  save_model(path, ae);
  CHECK(load_ae_baseline(path) == ae);
  CHECK_THROWS_AS(load_argue_model(path), ModelTypeError);
  save_model(path, sample_model());
  CHECK_THROWS_AS(load_ae_baseline(path), ModelTypeError);
}

TEST_CASE("damaged model files are rejected") {
  const auto bytes = serialize(sample_model());
  CHECK_THROWS_AS(deserialize(bytes.substr(0, bytes.size() - 1)), PersistenceError);
  CHECK_THROWS_AS(deserialize(bytes.substr(0, 10)), PersistenceError);
  CHECK_THROWS_AS(deserialize(""), PersistenceError);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(deserialize(flipped), PersistenceError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(deserialize(magic), PersistenceError);
  CHECK_THROWS_AS(load_model(scratch("does_not_exist.model")), PersistenceError);
}

TEST_CASE("unknown format versions are rejected with a clear message") {
  // Rewrite the version field and fix up the checksum so only the version differs.
  auto bytes = serialize(sample_model());
  const std::size_t body = bytes.size() - 8;
  bytes[sizeof kModelMagic] = 2;
  const auto sum = detail::fnv1a(bytes, body);
  for (int i = 0; i < 8; ++i) bytes[body + i] = static_cast<char>(sum >> (8 * i) & 0xff);
  CHECK_THROWS_WITH(deserialize(bytes), Catch::Matchers::ContainsSubstring("version 2"));
}
