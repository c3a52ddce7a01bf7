#pragma once

// Binary model files:
//   "ARGUEMDL" | u32 version | u8 kind | u64 seed | config | u32 networks |
//   per network: u32 layers, (u64 in, u64 out, u8 activation) per layer,
//   u64 parameter count, raw IEEE-754 doubles | u64 FNV-1a of all prior bytes.
// Integers and doubles are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "argue/baseline.hpp"
#include "argue/error.hpp"
#include "argue/model.hpp"
#include "argue/nn.hpp"

namespace argue {

inline constexpr char kModelMagic[8] = {'A', 'R', 'G', 'U', 'E', 'M', 'D', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

enum class ModelKind : std::uint8_t { argue = 1, autoencoder = 2 };

namespace detail {

inline std::uint64_t fnv1a(const std::string& bytes, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(bytes[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
  }
  void real(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void dims(const std::vector<std::size_t>& d) {
    uint<std::uint64_t>(d.size());
    for (auto v : d) uint<std::uint64_t>(v);
  }
  void network(const Network& net) {
    uint<std::uint32_t>(static_cast<std::uint32_t>(net.layer_count()));
    for (const auto& s : net.layers()) {
      uint<std::uint64_t>(s.input_dim);
      uint<std::uint64_t>(s.output_dim);
      uint<std::uint8_t>(static_cast<std::uint8_t>(s.activation));
    }
    uint<std::uint64_t>(net.param_count());
    for (double p : net.params()) real(p);
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string finish() {
    uint<std::uint64_t>(fnv1a(out_, out_.size()));
    return std::move(out_);
  }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : b_(bytes) {}

  template <typename T>
  T uint() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t{static_cast<unsigned char>(b_[pos_ + i])} << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double real() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::vector<std::size_t> dims() {
    const auto n = uint<std::uint64_t>();
    if (n > remaining() / 8) throw PersistenceError("model file: dimension list exceeds file size");
    std::vector<std::size_t> d(n);
    for (auto& v : d) v = static_cast<std::size_t>(uint<std::uint64_t>());
    return d;
  }
  Network network() {
    const auto layers = uint<std::uint32_t>();
    if (layers == 0 || layers > remaining() / 17) throw PersistenceError("model file: bad layer count");
    std::vector<LayerSpec> specs(layers);
    for (auto& s : specs) {
      s.input_dim = static_cast<std::size_t>(uint<std::uint64_t>());
      s.output_dim = static_cast<std::size_t>(uint<std::uint64_t>());
      const auto act = uint<std::uint8_t>();
      if (act > static_cast<std::uint8_t>(Activation::identity)) throw PersistenceError("model file: bad activation");
      s.activation = static_cast<Activation>(act);
    }
    Network net = [&] {
      try {
        return Network(std::move(specs));
      } catch (const ConfigError& e) {
        throw PersistenceError(std::string("model file: invalid network: ") + e.what());
      }
    }();
    if (uint<std::uint64_t>() != net.param_count()) throw PersistenceError("model file: parameter count mismatch");
    for (double& p : net.params()) p = real();
    return net;
  }
  void expect(const char* p, std::size_t n) {
    need(n);
    if (std::memcmp(b_.data() + pos_, p, n) != 0) throw PersistenceError("model file: bad magic");
    pos_ += n;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > b_.size() - pos_) throw PersistenceError("model file: truncated");
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

inline void write_header(Writer& w, ModelKind kind, std::uint64_t seed, const ArgueConfig& c) {
  w.raw(kModelMagic, sizeof kModelMagic);
  w.uint<std::uint32_t>(kModelFormatVersion);
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(kind));
  w.uint<std::uint64_t>(seed);
  w.uint<std::uint64_t>(c.input_dim);
  w.uint<std::uint64_t>(c.expert_count);
  w.dims(c.encoder_dims);
  w.dims(c.alarm_dims);
  w.dims(c.gate_dims);
}

// Validates framing and checksum, returns the payload without the trailer.
inline std::string checked_payload(const std::string& bytes) {
  if (bytes.size() < sizeof kModelMagic + 4 + 1 + 8)
    throw PersistenceError("model file: truncated");
  const std::size_t body = bytes.size() - 8;
  const std::string tail = bytes.substr(body);
  Reader trailer(tail);
  if (trailer.uint<std::uint64_t>() != fnv1a(bytes, body)) throw PersistenceError("model file: checksum mismatch (truncated or corrupt)");
  return bytes.substr(0, body);
}

struct Header {
  ModelKind kind;
  std::uint64_t seed;
  ArgueConfig config;
};

inline Header read_header(Reader& r) {
  r.expect(kModelMagic, sizeof kModelMagic);
  const auto version = r.uint<std::uint32_t>();
  if (version != kModelFormatVersion)
    throw PersistenceError("model file: unsupported format version " + std::to_string(version));
  Header h;
  const auto kind = r.uint<std::uint8_t>();
  if (kind != 1 && kind != 2) throw PersistenceError("model file: unknown model kind");
  h.kind = static_cast<ModelKind>(kind);
  h.seed = r.uint<std::uint64_t>();
  h.config.input_dim = static_cast<std::size_t>(r.uint<std::uint64_t>());
  h.config.expert_count = static_cast<std::size_t>(r.uint<std::uint64_t>());
  h.config.encoder_dims = r.dims();
  h.config.alarm_dims = r.dims();
  h.config.gate_dims = r.dims();
  return h;
}

}  // namespace detail

inline std::string serialize(const ArgueModel& m) {
  detail::Writer w;
  detail::write_header(w, ModelKind::argue, m.seed, m.config);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(3 + m.experts.size()));
  w.network(m.encoder);
  for (const auto& e : m.experts) w.network(e);
  w.network(m.alarm);
  w.network(m.gate);
  return w.finish();
}

inline std::string serialize(const AeBaseline& ae) {
  detail::Writer w;
  detail::write_header(w, ModelKind::autoencoder, ae.seed, ae.config);
  w.uint<std::uint32_t>(2);
  w.network(ae.encoder);
  w.network(ae.decoder);
  return w.finish();
}

using AnyModel = std::variant<ArgueModel, AeBaseline>;

inline AnyModel deserialize(const std::string& bytes) {
  const auto payload = detail::checked_payload(bytes);
  detail::Reader r(payload);
  const auto h = detail::read_header(r);
  try {
    h.config.validate();
  } catch (const ConfigError& e) {
    throw PersistenceError(std::string("model file: invalid config: ") + e.what());
  }
  const auto n = r.uint<std::uint32_t>();
  // Networks must have exactly the layout the config implies.
  auto expect_like = [](const Network& got, const Network& want, const char* role) {
    if (got.layers() != want.layers()) throw PersistenceError(std::string("model file: ") + role + " layout does not match config");
  };
  if (h.kind == ModelKind::autoencoder) {
    if (n != 2) throw PersistenceError("model file: autoencoder must hold 2 networks");
    AeBaseline ae;
    ae.config = h.config;
    ae.seed = h.seed;
    ae.encoder = r.network();
    expect_like(ae.encoder, make_encoder(h.config), "encoder");
    ae.decoder = r.network();
    expect_like(ae.decoder, make_expert(h.config), "decoder");
    if (r.remaining() != 0) throw PersistenceError("model file: trailing bytes");
    return ae;
  }
  if (n != 3 + h.config.expert_count) throw PersistenceError("model file: network count does not match expert count");
  const auto like = build(h.config, 0);
  ArgueModel m;
  m.config = h.config;
  m.seed = h.seed;
  m.encoder = r.network();
  expect_like(m.encoder, like.encoder, "encoder");
  for (std::size_t j = 0; j < h.config.expert_count; ++j) {
    m.experts.push_back(r.network());
    expect_like(m.experts.back(), like.experts[j], "expert");
  }
  m.alarm = r.network();
  expect_like(m.alarm, like.alarm, "alarm");
  m.gate = r.network();
  expect_like(m.gate, like.gate, "gate");
  if (r.remaining() != 0) throw PersistenceError("model file: trailing bytes");
  return m;
}

inline void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PersistenceError("short write to '" + path + "'");
}

inline std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void save_model(const std::string& path, const ArgueModel& m) { write_bytes(path, serialize(m)); }
inline void save_model(const std::string& path, const AeBaseline& ae) { write_bytes(path, serialize(ae)); }

inline AnyModel load_model(const std::string& path) { return deserialize(read_bytes(path)); }

inline ArgueModel load_argue_model(const std::string& path) {
  auto any = load_model(path);
  if (!std::holds_alternative<ArgueModel>(any)) throw ModelTypeError("'" + path + "' holds an autoencoder baseline, not an ARGUE model");
  return std::get<ArgueModel>(std::move(any));
}

inline AeBaseline load_ae_baseline(const std::string& path) {
  auto any = load_model(path);
  if (!std::holds_alternative<AeBaseline>(any)) throw ModelTypeError("'" + path + "' holds an ARGUE model, not an autoencoder baseline");
  return std::get<AeBaseline>(std::move(any));
}

}  // namespace argue
