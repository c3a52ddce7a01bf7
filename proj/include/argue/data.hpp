#pragma once

// Dataset ingestion (CSV, IDX), min-max scaling, train/test protocols and the
// synthetic Gaussian-mixture generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "argue/error.hpp"
#include "argue/matrix.hpp"
#include "argue/random.hpp"

namespace argue {

struct AttributeColumn {
  std::string name;
  std::vector<std::string> values;

  bool operator==(const AttributeColumn&) const = default;
};

struct Dataset {
  Matrix features;
  std::vector<std::string> feature_names;
  std::optional<std::vector<int>> anomaly_labels;         // 1 = anomalous
  std::optional<std::vector<std::string>> class_labels;   // normal class / generating cluster
  std::optional<AttributeColumn> cluster_attribute;       // kept out of the features
  std::vector<std::size_t> row_ids;                       // index in the source file

  std::size_t size() const { return features.rows(); }

  void validate() const {
    const auto n = features.rows();
    auto check = [&](std::size_t m, const char* what) {
      if (m != n) throw ShapeError(std::string("dataset: ") + what + " row count mismatch");
    };
    check(row_ids.size(), "row_ids");
    if (anomaly_labels) check(anomaly_labels->size(), "anomaly_labels");
    if (class_labels) check(class_labels->size(), "class_labels");
    if (cluster_attribute) check(cluster_attribute->values.size(), "cluster_attribute");
    if (!feature_names.empty() && feature_names.size() != features.cols())
      throw ShapeError("dataset: feature_names width mismatch");
  }

  Dataset select(std::span<const std::size_t> rows) const {
    Dataset d;
    d.features = features.select_rows(rows);
    d.feature_names = feature_names;
    auto pick = [&](const auto& src) {
      std::remove_cvref_t<decltype(src)> out;
      out.reserve(rows.size());
      for (auto r : rows) out.push_back(src[r]);
      return out;
    };
    if (anomaly_labels) d.anomaly_labels = pick(*anomaly_labels);
    if (class_labels) d.class_labels = pick(*class_labels);
    if (cluster_attribute) d.cluster_attribute = AttributeColumn{cluster_attribute->name, pick(cluster_attribute->values)};
    d.row_ids = pick(row_ids);
    return d;
  }

  std::vector<std::size_t> rows_where_label(int label) const {
    if (!anomaly_labels) throw SchemaError("dataset has no anomaly labels");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
      if ((*anomaly_labels)[i] == label) out.push_back(i);
    return out;
  }
};

// ---------------------------------------------------------------------------
// CSV

struct CsvSchema {
  std::optional<std::string> label_column;      // anomaly label
  std::set<std::string> anomaly_values{"1"};    // label cell values meaning anomalous
  std::optional<std::string> class_column;
  std::optional<std::string> attribute_column;  // cluster attribute, excluded from features
  std::set<std::string> categorical_columns;    // one-hot encoded
  std::set<std::string> drop_columns;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

inline Dataset load_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("csv: missing header row");
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) col[header[c]] = c;
  auto require = [&](const std::string& name) {
    if (!col.count(name)) throw SchemaError("csv: missing column '" + name + "'");
    return col.at(name);
  };
  std::optional<std::size_t> label_col, class_col, attr_col;
  if (schema.label_column) label_col = require(*schema.label_column);
  if (schema.class_column) class_col = require(*schema.class_column);
  if (schema.attribute_column) attr_col = require(*schema.attribute_column);
  for (const auto& c : schema.categorical_columns) require(c);
  for (const auto& c : schema.drop_columns) require(c);

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw IngestionError("csv: row " + std::to_string(rows.size() + 1) + " has " + std::to_string(cells.size()) +
                           " cells, header has " + std::to_string(header.size()));
    rows.push_back(std::move(cells));
  }

  // Feature columns in header order; categoricals expand to sorted one-hot columns.
  struct FeatureCol {
    std::size_t source;
    std::vector<std::string> categories;  // empty for numeric
  };
  std::vector<FeatureCol> fcols;
  Dataset d;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == label_col || c == class_col || c == attr_col || schema.drop_columns.count(header[c])) continue;
    FeatureCol fc{c, {}};
    if (schema.categorical_columns.count(header[c])) {
      std::set<std::string> values;
      for (const auto& r : rows) values.insert(r[c]);
      fc.categories.assign(values.begin(), values.end());
      for (const auto& v : fc.categories) d.feature_names.push_back(header[c] + "=" + v);
    } else {
      d.feature_names.push_back(header[c]);
    }
    fcols.push_back(std::move(fc));
  }

  d.features = Matrix(rows.size(), d.feature_names.size());
  if (label_col) d.anomaly_labels.emplace();
  if (class_col) d.class_labels.emplace();
  if (attr_col) d.cluster_attribute = AttributeColumn{header[*attr_col], {}};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t out = 0;
    for (const auto& fc : fcols) {
      const auto& cell = rows[r][fc.source];
      if (fc.categories.empty()) {
        auto v = detail::parse_double(cell);
        if (!v)
          throw IngestionError("csv: cannot parse '" + cell + "' at row " + std::to_string(r + 1) + ", column '" +
                               header[fc.source] + "'");
        d.features(r, out++) = *v;
      } else {
        for (const auto& cat : fc.categories) d.features(r, out++) = cell == cat ? 1.0 : 0.0;
      }
    }
    if (label_col) d.anomaly_labels->push_back(schema.anomaly_values.count(rows[r][*label_col]) ? 1 : 0);
    if (class_col) d.class_labels->push_back(rows[r][*class_col]);
    if (attr_col) d.cluster_attribute->values.push_back(rows[r][*attr_col]);
    d.row_ids.push_back(r);
  }
  return d;
}

inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IngestionError("csv: cannot open '" + path + "'");
  return load_csv(in, schema);
}

/// Writes features (and label/class/attribute columns when present) so that
/// load_csv with the matching schema restores the same matrix.
inline void write_csv(std::ostream& os, const Dataset& d) {
  std::vector<std::string> cols = d.feature_names;
  if (cols.empty())
    for (std::size_t c = 0; c < d.features.cols(); ++c) cols.push_back("f" + std::to_string(c));
  os << std::setprecision(17);
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
  if (d.anomaly_labels) os << ",label";
  if (d.class_labels) os << ",class";
  if (d.cluster_attribute) os << ',' << d.cluster_attribute->name;
  os << '\n';
  for (std::size_t r = 0; r < d.size(); ++r) {
    for (std::size_t c = 0; c < d.features.cols(); ++c) os << (c ? "," : "") << d.features(r, c);
    if (d.anomaly_labels) os << ',' << (*d.anomaly_labels)[r];
    if (d.class_labels) os << ',' << (*d.class_labels)[r];
    if (d.cluster_attribute) os << ',' << d.cluster_attribute->values[r];
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// IDX (MNIST distribution format)

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("idx: cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t pos) {
  if (pos + 4 > b.size()) throw FormatError("idx: truncated header");
  return (std::uint32_t{b[pos]} << 24) | (std::uint32_t{b[pos + 1]} << 16) | (std::uint32_t{b[pos + 2]} << 8) |
         std::uint32_t{b[pos + 3]};
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Images flattened row-major and divided by 255; labels become class labels.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);
  if (detail::read_be32(img, 0) != kIdxImagesMagic) throw FormatError("idx: bad image magic in '" + images_path + "'");
  if (detail::read_be32(lab, 0) != kIdxLabelsMagic) throw FormatError("idx: bad label magic in '" + labels_path + "'");
  const std::size_t n = detail::read_be32(img, 4);
  const std::size_t rows = detail::read_be32(img, 8);
  const std::size_t cols = detail::read_be32(img, 12);
  const std::size_t n_labels = detail::read_be32(lab, 4);
  if (n != n_labels) throw FormatError("idx: image and label counts differ");
  const std::size_t width = rows * cols;
  if (img.size() < 16 + n * width) throw FormatError("idx: image file truncated");
  if (lab.size() < 8 + n) throw FormatError("idx: label file truncated");
  Dataset d;
  d.features = Matrix(n, width);
  for (std::size_t i = 0; i < n * width; ++i) d.features.data()[i] = img[16 + i] / 255.0;
  d.class_labels.emplace();
  for (std::size_t i = 0; i < n; ++i) {
    d.class_labels->push_back(std::to_string(lab[8 + i]));
    d.row_ids.push_back(i);
  }
  for (std::size_t p = 0; p < width; ++p) d.feature_names.push_back("px" + std::to_string(p));
  return d;
}

/// Writes an IDX image/label pair (used for fixtures and exports).
inline void write_idx(const std::string& images_path, const std::string& labels_path,
                      const std::vector<std::vector<unsigned char>>& images, std::size_t rows, std::size_t cols,
                      const std::vector<unsigned char>& labels) {
  auto be32 = [](std::ostream& os, std::uint32_t v) {
    const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
    os.write(b, 4);
  };
  std::ofstream im(images_path, std::ios::binary), lb(labels_path, std::ios::binary);
  be32(im, kIdxImagesMagic);
  be32(im, static_cast<std::uint32_t>(images.size()));
  be32(im, static_cast<std::uint32_t>(rows));
  be32(im, static_cast<std::uint32_t>(cols));
  for (const auto& i : images) im.write(reinterpret_cast<const char*>(i.data()), static_cast<std::streamsize>(i.size()));
  be32(lb, kIdxLabelsMagic);
  be32(lb, static_cast<std::uint32_t>(labels.size()));
  lb.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

/// Marks rows whose class is not in `normal_classes` as anomalous.
inline void label_anomalies_by_class(Dataset& d, const std::set<std::string>& normal_classes) {
  if (!d.class_labels) throw SchemaError("dataset has no class labels");
  d.anomaly_labels.emplace();
  for (const auto& c : *d.class_labels) d.anomaly_labels->push_back(normal_classes.count(c) ? 0 : 1);
}

// ---------------------------------------------------------------------------
// Scaling

struct ScalerState {
  std::vector<double> min;
  std::vector<double> max;

  bool operator==(const ScalerState&) const = default;
};

inline ScalerState fit_scale(const Matrix& train_normals) {
  if (train_normals.rows() == 0) throw ConfigError("fit_scale: no rows");
  ScalerState s;
  s.min.assign(train_normals.cols(), std::numeric_limits<double>::infinity());
  s.max.assign(train_normals.cols(), -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < train_normals.rows(); ++r)
    for (std::size_t c = 0; c < train_normals.cols(); ++c) {
      s.min[c] = std::min(s.min[c], train_normals(r, c));
      s.max[c] = std::max(s.max[c], train_normals(r, c));
    }
  return s;
}

/// (x − min)/(max − min), unclipped; constant features map to 0.5.
inline Matrix apply_scale(const ScalerState& s, const Matrix& x) {
  detail::require_shape(x.cols() == s.min.size(), "apply_scale: width mismatch");
  Matrix out(x.rows(), x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    const double range = s.max[c] - s.min[c];
    for (std::size_t r = 0; r < x.rows(); ++r) out(r, c) = range > 0 ? (x(r, c) - s.min[c]) / range : 0.5;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Train/test protocols

struct SplitSpec {
  double test_fraction = 0.2;        // of the normal rows
  double pollution_rate = 0.0;       // hidden anomalies per train normal
  std::size_t known_anomaly_budget = 0;
  std::optional<std::size_t> test_anomaly_count;  // default: all anomalies left over
  std::uint64_t seed = 0;
};

/// Row positions refer to the input dataset.
struct Split {
  Dataset train;  // train normals and pollution (shuffled, label 0), then known anomalies (label 1)
  Dataset test;   // test normals and anomalies, input order
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> pollution_rows;
  std::vector<std::size_t> known_anomaly_rows;
  std::vector<std::size_t> test_rows;
  SplitSpec spec;

  /// Rows of `train` that are neither known anomalies: the clustering/pretraining set.
  std::vector<std::size_t> train_unlabeled_positions() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < train.size(); ++i)
      if ((*train.anomaly_labels)[i] == 0) out.push_back(i);
    return out;
  }
};

inline Split split_from_rows(const Dataset& data, std::vector<std::size_t> train_rows,
                             std::vector<std::size_t> pollution_rows, std::vector<std::size_t> known_rows,
                             std::vector<std::size_t> test_rows, const SplitSpec& spec) {
  Split s;
  s.spec = spec;
  std::vector<std::size_t> all_train = train_rows;
  all_train.insert(all_train.end(), known_rows.begin(), known_rows.end());
  s.train = data.select(all_train);
  std::set<std::size_t> known(known_rows.begin(), known_rows.end());
  for (std::size_t i = 0; i < all_train.size(); ++i) (*s.train.anomaly_labels)[i] = known.count(all_train[i]) ? 1 : 0;
  s.test = data.select(test_rows);
  s.train_rows = std::move(train_rows);
  s.pollution_rows = std::move(pollution_rows);
  s.known_anomaly_rows = std::move(known_rows);
  s.test_rows = std::move(test_rows);
  return s;
}

inline Split make_split(const Dataset& data, const SplitSpec& spec) {
  if (!data.anomaly_labels) throw SchemaError("make_split: dataset has no anomaly labels");
  if (!(spec.test_fraction > 0 && spec.test_fraction < 1)) throw ConfigError("test_fraction must lie in (0,1)");
  if (!(spec.pollution_rate >= 0 && spec.pollution_rate < 1)) throw ConfigError("pollution_rate must lie in [0,1)");
  Rng rng(mix_seed(spec.seed, stream::split));
  auto normals = data.rows_where_label(0);
  auto anomalies = data.rows_where_label(1);
  std::shuffle(normals.begin(), normals.end(), rng);
  // Own stream: the anomaly draw stays fixed when only the normal pool changes.
  Rng anomaly_rng(mix_seed(spec.seed, stream::split_anomalies));
  std::shuffle(anomalies.begin(), anomalies.end(), anomaly_rng);

  const auto n_test_norm = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(normals.size())));
  if (n_test_norm == 0 || n_test_norm >= normals.size())
    throw ProtocolError("split leaves no normal rows on one side (" + std::to_string(normals.size()) + " normals)");
  std::vector<std::size_t> test(normals.begin(), normals.begin() + static_cast<std::ptrdiff_t>(n_test_norm));
  std::vector<std::size_t> train_norm(normals.begin() + static_cast<std::ptrdiff_t>(n_test_norm), normals.end());

  const auto n_poll = static_cast<std::size_t>(std::floor(spec.pollution_rate * static_cast<double>(train_norm.size())));
  const std::size_t n_test_anom = spec.test_anomaly_count.value_or(
      anomalies.size() >= n_poll + spec.known_anomaly_budget ? anomalies.size() - n_poll - spec.known_anomaly_budget : 0);
  const std::size_t needed = n_test_anom + n_poll + spec.known_anomaly_budget;
  if (n_test_anom == 0 || needed > anomalies.size())
    throw ProtocolError("insufficient anomalies: need " + std::to_string(n_poll) + " for pollution, " +
                        std::to_string(spec.known_anomaly_budget) + " known and at least one for testing, have " +
                        std::to_string(anomalies.size()));
  auto it = anomalies.begin();
  auto take = [&](std::size_t n) {
    std::vector<std::size_t> out(it, it + static_cast<std::ptrdiff_t>(n));
    it += static_cast<std::ptrdiff_t>(n);
    return out;
  };
  auto test_anom = take(n_test_anom);
  auto pollution = take(n_poll);
  auto known = take(spec.known_anomaly_budget);

  test.insert(test.end(), test_anom.begin(), test_anom.end());
  std::sort(test.begin(), test.end());
  std::vector<std::size_t> train = train_norm;
  train.insert(train.end(), pollution.begin(), pollution.end());
  std::shuffle(train.begin(), train.end(), rng);
  return split_from_rows(data, std::move(train), std::move(pollution), std::move(known), std::move(test), spec);
}

/// Everything needed to rebuild a split and its scaler bit-exactly.
inline nlohmann::ordered_json split_manifest(const Split& s, const ScalerState& scaler) {
  nlohmann::ordered_json j;
  j["seed"] = s.spec.seed;
  j["test_fraction"] = s.spec.test_fraction;
  j["pollution_rate"] = s.spec.pollution_rate;
  j["known_anomaly_budget"] = s.spec.known_anomaly_budget;
  if (s.spec.test_anomaly_count) j["test_anomaly_count"] = *s.spec.test_anomaly_count;
  j["train_rows"] = s.train_rows;
  j["pollution_rows"] = s.pollution_rows;
  j["known_anomaly_rows"] = s.known_anomaly_rows;
  j["test_rows"] = s.test_rows;
  j["scaler"] = {{"min", scaler.min}, {"max", scaler.max}};
  return j;
}

inline std::pair<Split, ScalerState> split_from_manifest(const Dataset& data, const nlohmann::json& j) {
  try {
    SplitSpec spec;
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.test_fraction = j.at("test_fraction").get<double>();
    spec.pollution_rate = j.at("pollution_rate").get<double>();
    spec.known_anomaly_budget = j.at("known_anomaly_budget").get<std::size_t>();
    if (j.contains("test_anomaly_count")) spec.test_anomaly_count = j.at("test_anomaly_count").get<std::size_t>();
    auto rows = [&](const char* k) { return j.at(k).get<std::vector<std::size_t>>(); };
    for (const char* k : {"train_rows", "known_anomaly_rows", "test_rows"})
      for (auto r : rows(k))
        if (r >= data.size()) throw FormatError(std::string("manifest: row index out of range in ") + k);
    ScalerState sc{j.at("scaler").at("min").get<std::vector<double>>(), j.at("scaler").at("max").get<std::vector<double>>()};
    return {split_from_rows(data, rows("train_rows"), rows("pollution_rows"), rows("known_anomaly_rows"),
                            rows("test_rows"), spec),
            sc};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Synthetic multi-cluster data

struct SynthSpec {
  std::size_t clusters = 4;
  std::size_t dim = 20;
  std::size_t n_per_cluster = 2000;
  std::size_t anomaly_count = 400;
  double separation = 6.0;  // minimum center distance in units of sigma
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Dataset data;     // normals first (class "0".."k-1"), then anomalies (class "anomaly")
  Matrix centers;
  double sigma = 1.0;
};

/// k isotropic Gaussians with mutually separated centers; anomalies uniform in
/// the normals' bounding box, rejected within 3 sigma of any center.
inline SyntheticData synth_gaussian_mixture(const SynthSpec& spec) {
  if (spec.clusters == 0 || spec.dim == 0) throw ConfigError("synthetic data needs clusters, dim >= 1");
  if (!(spec.separation > 0) || !(spec.sigma > 0)) throw ConfigError("separation and sigma must be positive");
  Rng rng(mix_seed(spec.seed, stream::synth));
  const double min_dist = spec.separation * spec.sigma;

  SyntheticData out;
  out.sigma = spec.sigma;
  out.centers = Matrix(spec.clusters, spec.dim);
  double side = min_dist;
  for (std::size_t attempts = 0;; ++attempts) {
    if (attempts > 0 && attempts % 1000 == 0) side *= 1.25;
    std::uniform_real_distribution<double> u(0.0, side);
    for (double& v : out.centers.data()) v = u(rng);
    bool ok = true;
    for (std::size_t a = 0; a < spec.clusters && ok; ++a)
      for (std::size_t b = a + 1; b < spec.clusters && ok; ++b)
        ok = std::sqrt(squared_distance(out.centers.row(a), out.centers.row(b))) >= min_dist;
    if (ok) break;
  }

  Dataset& d = out.data;
  const std::size_t n_norm = spec.clusters * spec.n_per_cluster;
  d.features = Matrix(n_norm + spec.anomaly_count, spec.dim);
  d.anomaly_labels.emplace();
  d.class_labels.emplace();
  std::normal_distribution<double> gauss(0.0, spec.sigma);
  std::vector<double> lo(spec.dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(spec.dim, -std::numeric_limits<double>::infinity());
  std::size_t row = 0;
  for (std::size_t k = 0; k < spec.clusters; ++k)
    for (std::size_t i = 0; i < spec.n_per_cluster; ++i, ++row) {
      for (std::size_t f = 0; f < spec.dim; ++f) {
        const double v = out.centers(k, f) + gauss(rng);
        d.features(row, f) = v;
        lo[f] = std::min(lo[f], v);
        hi[f] = std::max(hi[f], v);
      }
      d.anomaly_labels->push_back(0);
      d.class_labels->push_back(std::to_string(k));
    }

  const double reject = 3.0 * spec.sigma;
  std::vector<double> x(spec.dim);
  for (std::size_t a = 0; a < spec.anomaly_count; ++a, ++row) {
    for (std::size_t attempts = 0;; ++attempts) {
      if (attempts > 0 && attempts % 10000 == 0)
        for (std::size_t f = 0; f < spec.dim; ++f) {  // box too tight to escape the centers: widen it
          const double pad = 0.25 * (hi[f] - lo[f]);
          lo[f] -= pad;
          hi[f] += pad;
        }
      for (std::size_t f = 0; f < spec.dim; ++f) x[f] = std::uniform_real_distribution<double>(lo[f], hi[f])(rng);
      bool far = true;
      for (std::size_t k = 0; k < spec.clusters && far; ++k)
        far = std::sqrt(squared_distance(x, out.centers.row(k))) >= reject;
      if (far) break;
    }
    std::copy(x.begin(), x.end(), d.features.row(row).begin());
    d.anomaly_labels->push_back(1);
    d.class_labels->push_back("anomaly");
  }
  for (std::size_t i = 0; i < d.features.rows(); ++i) d.row_ids.push_back(i);
  for (std::size_t f = 0; f < spec.dim; ++f) d.feature_names.push_back("x" + std::to_string(f));
  return out;
}

}  // namespace argue
