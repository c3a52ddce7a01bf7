#pragma once

// Config-driven experiment pipeline: load → split → scale → cluster →
// pretrain → detector → baseline → score → metrics, repeated with seeds
// base_seed + run. Every error leaving this header is a PipelineError whose
// message starts with the stage that failed.
//
// Config schema (JSON; unknown keys are rejected):
//
//   {
//     "seed": 7,                         required, base seed
//     "repeat_count": 5,                 default 1
//     "mode": "unsupervised" | "semi",   default "unsupervised"
//     "dataset": { exactly one of
//       "synthetic": {"clusters", "dim", "n_per_cluster", "anomaly_count",
//                     "separation", "sigma", "seed", "normal_clusters"?},
//       "csv": {"path", "label_column"?, "anomaly_values"?, "class_column"?,
//               "normal_classes"?, "attribute_column"?, "categorical_columns"?,
//               "drop_columns"?},
//       "idx": {"images", "labels", "normal_classes", "max_rows"?}
//     },
//     "split": {"test_fraction", "pollution_rate", "known_anomaly_budget",
//               "test_anomaly_count"?},
//     "clustering": {"strategy": "by_class" | "by_attribute" | "by_algorithm",
//                    "k"?, "attribute"?, "max_distinct"?},
//     "model": {"encoder_dims", "alarm_dims", "gate_dims"},
//     "train": {"epochs_pretrain", "epochs_detector", "batch_size",
//               "noise_ratio", "learning_rate", "beta1", "beta2", "epsilon"},
//     "baseline": true,                  also train and score the plain AE
//     "save_models": true
//   }
//
// Relative dataset paths resolve against the config file's directory.
// "normal_clusters" keeps only synthetic classes 0..n-1 as normals while the
// anomaly pool stays the one generated for all clusters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "argue/baseline.hpp"
#include "argue/clustering.hpp"
#include "argue/data.hpp"
#include "argue/error.hpp"
#include "argue/metrics.hpp"
#include "argue/model.hpp"
#include "argue/persistence.hpp"
#include "argue/trainer.hpp"

namespace argue {

struct SyntheticSource {
  SynthSpec spec;
  std::optional<std::size_t> normal_clusters;
};

struct CsvSource {
  std::string path;
  CsvSchema schema;
  std::vector<std::string> normal_classes;  // used when there is no label column
};

struct IdxSource {
  std::string images;
  std::string labels;
  std::vector<std::string> normal_classes;
  std::optional<std::size_t> max_rows;
};

using DataSource = std::variant<SyntheticSource, CsvSource, IdxSource>;

struct ClusteringSpec {
  ClusterStrategy strategy = ClusterStrategy::by_class;
  std::size_t k = 0;  // by_algorithm
  std::string attribute;  // by_attribute
  std::size_t max_distinct = 32;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t repeat_count = 1;
  DataSource source;
  SplitSpec split;
  ClusteringSpec clustering;
  std::vector<std::size_t> encoder_dims{16, 8};
  std::vector<std::size_t> alarm_dims{64, 32};
  std::vector<std::size_t> gate_dims{64, 32};
  TrainConfig train;
  bool baseline = true;
  bool save_models = true;

  TrainMode mode() const { return train.mode; }

  /// Switches mode; unsupervised drops the known-anomaly budget.
  void set_mode(TrainMode m) {
    train.mode = m;
    if (m == TrainMode::unsupervised) split.known_anomaly_budget = 0;
    train.known_anomaly_budget = split.known_anomaly_budget;
  }

  void validate() const {
    if (repeat_count == 0) throw ConfigError("repeat_count must be >= 1");
    if (train.mode == TrainMode::semi_supervised && split.known_anomaly_budget == 0)
      throw ConfigError("semi-supervised mode needs split.known_anomaly_budget > 0");
    if (clustering.strategy == ClusterStrategy::by_algorithm && clustering.k == 0)
      throw ConfigError("by_algorithm clustering needs clustering.k >= 1");
    if (clustering.strategy == ClusterStrategy::by_attribute && clustering.attribute.empty())
      throw ConfigError("by_attribute clustering needs clustering.attribute");
    TrainConfig t = train;
    t.known_anomaly_budget = split.known_anomaly_budget;
    t.validate();
  }
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

using Json = nlohmann::json;

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline std::string resolve(const std::string& path, const std::filesystem::path& base) {
  const std::filesystem::path p(path);
  return p.is_absolute() || base.empty() ? path : (base / p).string();
}

inline DataSource parse_source(const Json& d, const std::filesystem::path& base) {
  check_keys(d, {"synthetic", "csv", "idx"}, "dataset");
  if (d.size() != 1) throw ConfigError("dataset must name exactly one source (synthetic, csv or idx)");
  if (d.contains("synthetic")) {
    const auto& s = d.at("synthetic");
    check_keys(s, {"clusters", "dim", "n_per_cluster", "anomaly_count", "separation", "sigma", "seed", "normal_clusters"},
               "dataset.synthetic");
    SyntheticSource src;
    if (!s.contains("seed")) throw ConfigError("dataset.synthetic.seed is required");
    read_opt(s, "clusters", src.spec.clusters);
    read_opt(s, "dim", src.spec.dim);
    read_opt(s, "n_per_cluster", src.spec.n_per_cluster);
    read_opt(s, "anomaly_count", src.spec.anomaly_count);
    read_opt(s, "separation", src.spec.separation);
    read_opt(s, "sigma", src.spec.sigma);
    read_opt(s, "seed", src.spec.seed);
    if (s.contains("normal_clusters")) src.normal_clusters = s.at("normal_clusters").get<std::size_t>();
    return src;
  }
  if (d.contains("csv")) {
    const auto& c = d.at("csv");
    check_keys(c, {"path", "label_column", "anomaly_values", "class_column", "normal_classes", "attribute_column",
                   "categorical_columns", "drop_columns"},
               "dataset.csv");
    CsvSource src;
    src.path = resolve(c.at("path").get<std::string>(), base);
    if (c.contains("label_column")) src.schema.label_column = c.at("label_column").get<std::string>();
    if (c.contains("class_column")) src.schema.class_column = c.at("class_column").get<std::string>();
    if (c.contains("attribute_column")) src.schema.attribute_column = c.at("attribute_column").get<std::string>();
    read_opt(c, "anomaly_values", src.schema.anomaly_values);
    read_opt(c, "categorical_columns", src.schema.categorical_columns);
    read_opt(c, "drop_columns", src.schema.drop_columns);
    read_opt(c, "normal_classes", src.normal_classes);
    if (!src.schema.label_column && (src.normal_classes.empty() || !src.schema.class_column))
      throw ConfigError("dataset.csv needs label_column, or class_column with normal_classes");
    return src;
  }
  const auto& i = d.at("idx");
  check_keys(i, {"images", "labels", "normal_classes", "max_rows"}, "dataset.idx");
  IdxSource src;
  src.images = resolve(i.at("images").get<std::string>(), base);
  src.labels = resolve(i.at("labels").get<std::string>(), base);
  src.normal_classes = i.at("normal_classes").get<std::vector<std::string>>();
  if (src.normal_classes.empty()) throw ConfigError("dataset.idx.normal_classes must not be empty");
  if (i.contains("max_rows")) src.max_rows = i.at("max_rows").get<std::size_t>();
  return src;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::check_keys;
  using detail::read_opt;
  try {
    check_keys(j, {"seed", "repeat_count", "mode", "dataset", "split", "clustering", "model", "train", "baseline",
                   "save_models"},
               "config");
    ExperimentConfig c;
    if (!j.contains("seed")) throw ConfigError("config.seed is required");
    c.seed = j.at("seed").get<std::uint64_t>();
    read_opt(j, "repeat_count", c.repeat_count);
    read_opt(j, "baseline", c.baseline);
    read_opt(j, "save_models", c.save_models);
    if (!j.contains("dataset")) throw ConfigError("config.dataset is required");
    c.source = detail::parse_source(j.at("dataset"), base_dir);

    if (j.contains("split")) {
      const auto& s = j.at("split");
      check_keys(s, {"test_fraction", "pollution_rate", "known_anomaly_budget", "test_anomaly_count"}, "split");
      read_opt(s, "test_fraction", c.split.test_fraction);
      read_opt(s, "pollution_rate", c.split.pollution_rate);
      read_opt(s, "known_anomaly_budget", c.split.known_anomaly_budget);
      if (s.contains("test_anomaly_count")) c.split.test_anomaly_count = s.at("test_anomaly_count").get<std::size_t>();
    }
    if (j.contains("clustering")) {
      const auto& s = j.at("clustering");
      check_keys(s, {"strategy", "k", "attribute", "max_distinct"}, "clustering");
      if (s.contains("strategy")) c.clustering.strategy = parse_cluster_strategy(s.at("strategy").get<std::string>());
      read_opt(s, "k", c.clustering.k);
      read_opt(s, "attribute", c.clustering.attribute);
      read_opt(s, "max_distinct", c.clustering.max_distinct);
    }
    if (j.contains("model")) {
      const auto& s = j.at("model");
      check_keys(s, {"encoder_dims", "alarm_dims", "gate_dims"}, "model");
      read_opt(s, "encoder_dims", c.encoder_dims);
      read_opt(s, "alarm_dims", c.alarm_dims);
      read_opt(s, "gate_dims", c.gate_dims);
    }
    if (j.contains("train")) {
      const auto& s = j.at("train");
      check_keys(s, {"epochs_pretrain", "epochs_detector", "batch_size", "noise_ratio", "learning_rate", "beta1", "beta2",
                     "epsilon"},
                 "train");
      read_opt(s, "epochs_pretrain", c.train.epochs_pretrain);
      read_opt(s, "epochs_detector", c.train.epochs_detector);
      read_opt(s, "batch_size", c.train.batch_size);
      read_opt(s, "noise_ratio", c.train.noise_ratio);
      read_opt(s, "learning_rate", c.train.optimizer.lr);
      read_opt(s, "beta1", c.train.optimizer.beta1);
      read_opt(s, "beta2", c.train.optimizer.beta2);
      read_opt(s, "epsilon", c.train.optimizer.eps);
    }
    c.train.mode = j.contains("mode") ? parse_train_mode(j.at("mode").get<std::string>()) : TrainMode::unsupervised;
    c.train.known_anomaly_budget = c.split.known_anomaly_budget;
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw PipelineError("config", e.what());
  } catch (const Error& e) {
    throw PipelineError("config", e.what());
  }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("config", "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw PipelineError("config", "'" + path + "': " + e.what());
  }
  return parse_experiment_config(j, std::filesystem::path(path).parent_path());
}

/// Normalized echo of a config; paths are omitted so reports do not depend on
/// where the inputs live.
inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["repeat_count"] = c.repeat_count;
  j["mode"] = c.train.mode == TrainMode::semi_supervised ? "semi" : "unsupervised";
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SyntheticSource>) {
          nlohmann::ordered_json d{{"clusters", s.spec.clusters},           {"dim", s.spec.dim},
                                   {"n_per_cluster", s.spec.n_per_cluster}, {"anomaly_count", s.spec.anomaly_count},
                                   {"separation", s.spec.separation},       {"sigma", s.spec.sigma},
                                   {"seed", s.spec.seed}};
          if (s.normal_clusters) d["normal_clusters"] = *s.normal_clusters;
          j["dataset"] = {{"synthetic", d}};
        } else if constexpr (std::is_same_v<T, CsvSource>) {
          nlohmann::ordered_json d;
          if (s.schema.label_column) d["label_column"] = *s.schema.label_column;
          if (s.schema.class_column) d["class_column"] = *s.schema.class_column;
          if (!s.normal_classes.empty()) d["normal_classes"] = s.normal_classes;
          j["dataset"] = {{"csv", d}};
        } else {
          nlohmann::ordered_json d{{"normal_classes", s.normal_classes}};
          if (s.max_rows) d["max_rows"] = *s.max_rows;
          j["dataset"] = {{"idx", d}};
        }
      },
      c.source);
  j["split"] = {{"test_fraction", c.split.test_fraction},
                {"pollution_rate", c.split.pollution_rate},
                {"known_anomaly_budget", c.split.known_anomaly_budget}};
  if (c.split.test_anomaly_count) j["split"]["test_anomaly_count"] = *c.split.test_anomaly_count;
  j["clustering"] = {{"strategy", to_string(c.clustering.strategy)}};
  if (c.clustering.strategy == ClusterStrategy::by_algorithm) j["clustering"]["k"] = c.clustering.k;
  if (c.clustering.strategy == ClusterStrategy::by_attribute) j["clustering"]["attribute"] = c.clustering.attribute;
  j["model"] = {{"encoder_dims", c.encoder_dims}, {"alarm_dims", c.alarm_dims}, {"gate_dims", c.gate_dims}};
  j["train"] = {{"epochs_pretrain", c.train.epochs_pretrain}, {"epochs_detector", c.train.epochs_detector},
                {"batch_size", c.train.batch_size},           {"noise_ratio", c.train.noise_ratio},
                {"learning_rate", c.train.optimizer.lr},      {"beta1", c.train.optimizer.beta1},
                {"beta2", c.train.optimizer.beta2},           {"epsilon", c.train.optimizer.eps}};
  j["baseline"] = c.baseline;
  return j;
}

// ---------------------------------------------------------------------------
// Stages

namespace detail {

template <typename F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(stage, e.what());
  }
}

}  // namespace detail

/// Loads the configured source and, for by_attribute clustering on a numeric
/// column, moves that column out of the features.
inline Dataset load_dataset(const ExperimentConfig& cfg) {
  return detail::in_stage("dataset", [&] {
    Dataset d = std::visit(
        [&](const auto& s) -> Dataset {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, SyntheticSource>) {
            auto syn = synth_gaussian_mixture(s.spec);
            if (!s.normal_clusters) return std::move(syn.data);
            if (*s.normal_clusters == 0 || *s.normal_clusters > s.spec.clusters)
              throw ConfigError("normal_clusters must lie in [1, clusters]");
            std::vector<std::size_t> keep;
            for (std::size_t i = 0; i < syn.data.size(); ++i) {
              const auto& c = (*syn.data.class_labels)[i];
              if ((*syn.data.anomaly_labels)[i] || std::stoul(c) < *s.normal_clusters) keep.push_back(i);
            }
            return syn.data.select(keep);
          } else if constexpr (std::is_same_v<T, CsvSource>) {
            auto data = load_csv(s.path, s.schema);
            if (!s.schema.label_column)
              label_anomalies_by_class(data, std::set<std::string>(s.normal_classes.begin(), s.normal_classes.end()));
            return data;
          } else {
            auto data = load_idx(s.images, s.labels);
            if (s.max_rows && *s.max_rows < data.size()) {
              std::vector<std::size_t> head(*s.max_rows);
              for (std::size_t i = 0; i < head.size(); ++i) head[i] = i;
              data = data.select(head);
            }
            label_anomalies_by_class(data, std::set<std::string>(s.normal_classes.begin(), s.normal_classes.end()));
            return data;
          }
        },
        cfg.source);
    d.validate();
    if (cfg.clustering.strategy == ClusterStrategy::by_attribute)
      assign_by_attribute(d, cfg.clustering.attribute, cfg.clustering.max_distinct);
    return d;
  });
}

/// Everything a run needs before training: split, scaler, scaled matrices and
/// the expert assignment of the unlabeled training rows.
struct PreparedRun {
  std::uint64_t seed = 0;
  Split split;
  ScalerState scaler;
  Matrix train_unlabeled;  // scaled; clustering and pretraining set
  Matrix known_anomalies;  // scaled; empty unless semi-supervised
  Matrix test;             // scaled
  ClusterAssignment assignment;
};

namespace detail {

// By-class labels for the unlabeled training rows. Rows whose class is not a
// normal class (pollution) go to the nearest normal-class centroid.
inline std::vector<std::string> by_class_labels(const Dataset& full, const Dataset& rows, const Matrix& scaled) {
  if (!rows.class_labels) throw ConfigError("by_class clustering needs class labels");
  std::set<std::string> normal;
  for (std::size_t i = 0; i < full.size(); ++i)
    if ((*full.anomaly_labels)[i] == 0) normal.insert((*full.class_labels)[i]);
  std::vector<std::string> labels = *rows.class_labels;
  std::map<std::string, std::vector<double>> centroid;
  std::map<std::string, std::size_t> count;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!normal.count(labels[i])) continue;
    auto& c = centroid[labels[i]];
    c.resize(scaled.cols(), 0.0);
    const auto x = scaled.row(i);
    for (std::size_t f = 0; f < x.size(); ++f) c[f] += x[f];
    ++count[labels[i]];
  }
  if (centroid.empty()) throw ConfigError("no normal class present in the training rows");
  for (auto& [label, c] : centroid)
    for (double& v : c) v /= static_cast<double>(count[label]);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (normal.count(labels[i])) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [label, c] : centroid) {
      const double d = squared_distance(scaled.row(i), c);
      if (d < best) {
        best = d;
        labels[i] = label;
      }
    }
  }
  return labels;
}

}  // namespace detail

inline ClusterAssignment cluster_rows(const ExperimentConfig& cfg, const Dataset& full, const Dataset& rows,
                                      const Matrix& scaled, std::uint64_t seed) {
  return detail::in_stage("cluster", [&] {
    ClusterAssignment a;
    switch (cfg.clustering.strategy) {
      case ClusterStrategy::by_class:
        a = assign_by_class(detail::by_class_labels(full, rows, scaled));
        break;
      case ClusterStrategy::by_attribute:
        if (!rows.cluster_attribute) throw SchemaError("dataset has no cluster attribute");
        a = assign_by_attribute_values(rows.cluster_attribute->values, cfg.clustering.max_distinct);
        break;
      case ClusterStrategy::by_algorithm:
        a = assign_by_algorithm(scaled, cfg.clustering.k, seed);
        break;
    }
    a.validate();
    return a;
  });
}

inline PreparedRun prepare_run(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed,
                               const std::optional<nlohmann::json>& manifest = std::nullopt, bool cluster = true) {
  PreparedRun p;
  p.seed = seed;
  detail::in_stage("split", [&] {
    if (manifest) {
      std::tie(p.split, p.scaler) = split_from_manifest(data, *manifest);
    } else {
      SplitSpec spec = cfg.split;
      spec.seed = seed;
      p.split = make_split(data, spec);
    }
    return 0;
  });
  const auto unlabeled_pos = p.split.train_unlabeled_positions();
  const Dataset unlabeled = p.split.train.select(unlabeled_pos);
  detail::in_stage("scale", [&] {
    if (!manifest) p.scaler = fit_scale(unlabeled.features);
    if (p.scaler.min.size() != data.features.cols()) throw ShapeError("scaler width does not match the dataset");
    p.train_unlabeled = apply_scale(p.scaler, unlabeled.features);
    p.test = apply_scale(p.scaler, p.split.test.features);
    if (cfg.train.mode == TrainMode::semi_supervised) {
      std::vector<std::size_t> known;
      for (std::size_t i = 0; i < p.split.train.size(); ++i)
        if ((*p.split.train.anomaly_labels)[i]) known.push_back(i);
      p.known_anomalies = apply_scale(p.scaler, p.split.train.features.select_rows(known));
    } else {
      p.known_anomalies = Matrix(0, data.features.cols());
    }
    return 0;
  });
  if (cluster) p.assignment = cluster_rows(cfg, data, unlabeled, p.train_unlabeled, seed);
  return p;
}

// ---------------------------------------------------------------------------
// Gate ablation

/// Mean gate distribution per group; columns are the experts then "shortcut".
struct GateTable {
  std::vector<std::string> columns;
  struct Row {
    std::string group;
    std::size_t count = 0;
    std::vector<double> mean;
  };
  std::vector<Row> rows;

  const Row* find(const std::string& group) const {
    for (const auto& r : rows)
      if (r.group == group) return &r;
    return nullptr;
  }
};

inline constexpr const char* kAnomalousGroup = "anomalous";

/// Group of each test row: its class for normals, "anomalous" otherwise.
inline std::vector<std::string> test_groups(const Dataset& test) {
  std::vector<std::string> g;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if ((*test.anomaly_labels)[i]) g.emplace_back(kAnomalousGroup);
    else g.push_back(test.class_labels ? (*test.class_labels)[i] : "normal");
  }
  return g;
}

/// `order` fixes the row order; groups without members are dropped with a
/// warning. By default normal groups come sorted and "anomalous" last.
inline GateTable emit_gate_ablation(const ArgueModel& model, const Matrix& x, std::span<const std::string> groups,
                                    std::vector<std::string> expert_labels = {},
                                    std::vector<std::string> order = {}) {
  detail::require_shape(groups.size() == x.rows(), "emit_gate_ablation: one group per row required");
  const std::size_t J = model.config.expert_count;
  if (expert_labels.empty())
    for (std::size_t j = 0; j < J; ++j) expert_labels.push_back("expert" + std::to_string(j));
  detail::require_shape(expert_labels.size() == J, "emit_gate_ablation: expert label count mismatch");
  GateTable t;
  t.columns = std::move(expert_labels);
  t.columns.emplace_back("shortcut");

  std::map<std::string, std::pair<std::size_t, std::vector<double>>> acc;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto g = gate_forward(model, encode(model, x.row(i)));
    auto& [n, sum] = acc[groups[i]];
    sum.resize(J + 1, 0.0);
    for (std::size_t c = 0; c <= J; ++c) sum[c] += g.p[c];
    ++n;
  }
  if (order.empty()) {
    for (const auto& [group, _] : acc)
      if (group != kAnomalousGroup) order.push_back(group);
    if (acc.count(kAnomalousGroup)) order.emplace_back(kAnomalousGroup);
  }
  for (const auto& group : order) {
    const auto it = acc.find(group);
    if (it == acc.end()) {
      std::cerr << "warning: gate ablation group '" << group << "' has no samples, omitted\n";
      continue;
    }
    GateTable::Row row{group, it->second.first, it->second.second};
    for (double& v : row.mean) v /= static_cast<double>(row.count);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_gate_csv(std::ostream& os, const GateTable& t) {
  os << "group,count";
  for (const auto& c : t.columns) os << ',' << c;
  os << '\n' << std::setprecision(17);
  for (const auto& r : t.rows) {
    os << r.group << ',' << r.count;
    for (double v : r.mean) os << ',' << v;
    os << '\n';
  }
}

inline nlohmann::ordered_json to_json(const GateTable& t) {
  nlohmann::ordered_json j;
  j["columns"] = t.columns;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) j["rows"].push_back({{"group", r.group}, {"count", r.count}, {"mean", r.mean}});
  return j;
}

// ---------------------------------------------------------------------------
// Runs and reports

struct ScoreRow {
  std::size_t row_index = 0;  // row in the source dataset
  double score = 0.0;
  int label = 0;
};

inline void write_scores_csv(std::ostream& os, std::span<const ScoreRow> rows) {
  os << "row_index,anomaly_score,label\n" << std::setprecision(17);
  for (const auto& r : rows) os << r.row_index << ',' << r.score << ',' << r.label << '\n';
}

inline std::vector<ScoreRow> read_scores_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "row_index,anomaly_score,label")
    throw FormatError("score file: bad header");
  std::vector<ScoreRow> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 3) throw FormatError("score file: expected 3 columns");
    out.push_back({std::stoul(cells[0]), std::stod(cells[1]), std::stoi(cells[2])});
  }
  return out;
}

struct RunResult {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> expert_labels;
  std::vector<std::size_t> cluster_sizes;
  EvalResult argue;
  std::optional<EvalResult> baseline;
  GateTable gate;
  double shortcut_anomalous = 0.0;  // mean short-cut mass over anomalous test rows
  double shortcut_normal = 0.0;     // same over normal test rows
  std::optional<double> gate_recovery;  // by_class: share of normal test rows routed to their own class
  std::vector<double> pretrain_loss;
  std::vector<double> detector_loss;
  std::vector<ScoreRow> argue_scores;
  std::vector<ScoreRow> baseline_scores;
};

struct TrainedRun {
  PreparedRun prepared;
  ArgueModel model;
  std::optional<AeBaseline> baseline;
  RunResult result;
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot write '" + p.string() + "'");
  return out;
}

}  // namespace detail

/// One complete run. Artifacts go to `dir` unless it is empty.
inline TrainedRun run_once(const ExperimentConfig& cfg, const Dataset& data, std::size_t run,
                           const std::filesystem::path& dir = {}) {
  namespace fs = std::filesystem;
  const std::uint64_t seed = cfg.seed + run;
  TrainedRun tr;
  tr.prepared = prepare_run(cfg, data, seed);
  const auto& p = tr.prepared;
  RunResult& r = tr.result;
  r.run = run;
  r.seed = seed;
  r.expert_labels = p.assignment.expert_labels;
  r.cluster_sizes = p.assignment.counts();

  std::ofstream log_file, ae_log_file;
  if (!dir.empty()) {
    detail::in_stage("persist", [&] {
      fs::create_directories(dir);
      log_file = detail::open_out(dir / "train_log.jsonl");
      if (cfg.baseline) ae_log_file = detail::open_out(dir / "baseline_log.jsonl");
      auto out = detail::open_out(dir / "split.json");
      out << split_manifest(p.split, p.scaler).dump(1) << '\n';
      auto a = detail::open_out(dir / "assignment.csv");
      a << "row_index,expert_index\n";
      const auto pos = p.split.train_unlabeled_positions();
      for (std::size_t i = 0; i < pos.size(); ++i) a << p.split.train.row_ids[pos[i]] << ',' << p.assignment.expert_index[i] << '\n';
      return 0;
    });
  }
  auto logger = [&](std::ofstream& f) -> EpochLogger {
    if (!f.is_open()) return {};
    return [&f](const EpochRecord& rec) { f << to_json_line(rec) << '\n'; };
  };

  ArgueConfig acfg{data.features.cols(), cfg.encoder_dims, p.assignment.expert_count, cfg.alarm_dims, cfg.gate_dims};
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.known_anomaly_budget = cfg.split.known_anomaly_budget;
  detail::in_stage("pretrain", [&] {
    tr.model = build(acfg, seed);
    r.pretrain_loss = pretrain(tr.model, p.train_unlabeled, p.assignment, tc, logger(log_file));
    return 0;
  });
  detail::in_stage("detector", [&] {
    TrainingSet ts{p.train_unlabeled, p.assignment, p.known_anomalies};
    r.detector_loss = train_detector(tr.model, ts, tc, logger(log_file));
    return 0;
  });
  if (cfg.baseline)
    detail::in_stage("baseline", [&] {
      tr.baseline = train_ae(acfg, p.train_unlabeled, tc, seed, logger(ae_log_file)).model;
      return 0;
    });

  const Dataset& test = p.split.test;
  const auto groups = test_groups(test);
  detail::in_stage("score", [&] {
    std::size_t n_anom = 0, n_norm = 0, own = 0, with_class = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto s = score(tr.model, p.test.row(i));
      const int y = (*test.anomaly_labels)[i];
      r.argue_scores.push_back({test.row_ids[i], s.anomaly_score, y});
      if (y) {
        r.shortcut_anomalous += s.gating.shortcut();
        ++n_anom;
      } else {
        r.shortcut_normal += s.gating.shortcut();
        ++n_norm;
        if (cfg.clustering.strategy == ClusterStrategy::by_class && test.class_labels) {
          ++with_class;
          own += p.assignment.expert_labels[s.gating.argmax_expert()] == (*test.class_labels)[i];
        }
      }
      if (tr.baseline) r.baseline_scores.push_back({test.row_ids[i], ae_score(*tr.baseline, p.test.row(i)), y});
    }
    if (n_anom) r.shortcut_anomalous /= static_cast<double>(n_anom);
    if (n_norm) r.shortcut_normal /= static_cast<double>(n_norm);
    if (with_class) r.gate_recovery = static_cast<double>(own) / static_cast<double>(with_class);
    r.gate = emit_gate_ablation(tr.model, p.test, groups, p.assignment.expert_labels);
    return 0;
  });
  detail::in_stage("metrics", [&] {
    auto eval_rows = [](const std::vector<ScoreRow>& rows) {
      std::vector<double> s;
      std::vector<int> y;
      for (const auto& row : rows) {
        s.push_back(row.score);
        y.push_back(row.label);
      }
      return evaluate(s, y);
    };
    r.argue = eval_rows(r.argue_scores);
    if (tr.baseline) r.baseline = eval_rows(r.baseline_scores);
    return 0;
  });
  if (!dir.empty())
    detail::in_stage("persist", [&] {
      auto s = detail::open_out(dir / "scores_argue.csv");
      write_scores_csv(s, r.argue_scores);
      if (tr.baseline) {
        auto b = detail::open_out(dir / "scores_baseline.csv");
        write_scores_csv(b, r.baseline_scores);
      }
      auto g = detail::open_out(dir / "gate.csv");
      write_gate_csv(g, r.gate);
      if (cfg.save_models) {
        save_model((dir / "argue.model").string(), tr.model);
        if (tr.baseline) save_model((dir / "baseline.model").string(), *tr.baseline);
      }
      return 0;
    });
  return tr;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single run
};

inline MeanStd mean_std(std::span<const double> v) {
  MeanStd m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

struct RunReport {
  nlohmann::ordered_json config;
  std::vector<RunResult> runs;
  MeanStd argue_auc, argue_ap;
  std::optional<MeanStd> baseline_auc, baseline_ap;
  std::optional<WilcoxonResult> wilcoxon;  // ARGUE vs baseline AUC over paired runs
  std::optional<GateTable> gate;           // pooled over runs when every run has the same experts
};

inline RunReport summarize(nlohmann::ordered_json config, std::vector<RunResult> runs) {
  RunReport rep;
  rep.config = std::move(config);
  rep.runs = std::move(runs);
  std::vector<double> auc, ap, bauc, bap;
  for (const auto& r : rep.runs) {
    auc.push_back(r.argue.auc);
    ap.push_back(r.argue.ap);
    if (r.baseline) {
      bauc.push_back(r.baseline->auc);
      bap.push_back(r.baseline->ap);
    }
  }
  rep.argue_auc = mean_std(auc);
  rep.argue_ap = mean_std(ap);
  if (!bauc.empty() && bauc.size() == auc.size()) {
    rep.baseline_auc = mean_std(bauc);
    rep.baseline_ap = mean_std(bap);
    rep.wilcoxon = wilcoxon_signed_rank(auc, bauc);
  }
  const bool same_columns = std::all_of(rep.runs.begin(), rep.runs.end(),
                                        [&](const RunResult& r) { return r.gate.columns == rep.runs.front().gate.columns; });
  if (!rep.runs.empty() && same_columns) {
    GateTable pooled;
    pooled.columns = rep.runs.front().gate.columns;
    for (const auto& r : rep.runs)
      for (const auto& row : r.gate.rows) {
        auto it = std::find_if(pooled.rows.begin(), pooled.rows.end(), [&](const auto& x) { return x.group == row.group; });
        if (it == pooled.rows.end()) {
          pooled.rows.push_back({row.group, 0, std::vector<double>(pooled.columns.size(), 0.0)});
          it = std::prev(pooled.rows.end());
        }
        for (std::size_t c = 0; c < row.mean.size(); ++c) it->mean[c] += row.mean[c] * static_cast<double>(row.count);
        it->count += row.count;
      }
    for (auto& row : pooled.rows)
      for (double& v : row.mean) v /= static_cast<double>(row.count);
    rep.gate = std::move(pooled);
  }
  return rep;
}

inline nlohmann::ordered_json to_json(const RunReport& rep) {
  using J = nlohmann::ordered_json;
  auto ms = [](const MeanStd& m) { return J{{"mean", m.mean}, {"std", m.std}}; };
  auto ev = [](const EvalResult& e) { return J{{"auc", e.auc}, {"ap", e.ap}, {"n_normal", e.n_normal}, {"n_anomalous", e.n_anomalous}}; };
  J j;
  j["config"] = rep.config;
  j["runs"] = J::array();
  for (const auto& r : rep.runs) {
    J run{{"run", r.run}, {"seed", r.seed}, {"experts", r.expert_labels}, {"cluster_sizes", r.cluster_sizes},
          {"argue", ev(r.argue)}};
    if (r.baseline) run["baseline"] = ev(*r.baseline);
    run["shortcut_mass"] = {{"anomalous", r.shortcut_anomalous}, {"normal", r.shortcut_normal}};
    if (r.gate_recovery) run["gate_recovery"] = *r.gate_recovery;
    run["final_pretrain_loss"] = r.pretrain_loss.empty() ? 0.0 : r.pretrain_loss.back();
    run["final_detector_loss"] = r.detector_loss.empty() ? 0.0 : r.detector_loss.back();
    run["gate"] = to_json(r.gate);
    j["runs"].push_back(std::move(run));
  }
  J s{{"argue_auc", ms(rep.argue_auc)}, {"argue_ap", ms(rep.argue_ap)}};
  if (rep.baseline_auc) {
    s["baseline_auc"] = ms(*rep.baseline_auc);
    s["baseline_ap"] = ms(*rep.baseline_ap);
  }
  if (rep.wilcoxon)
    s["wilcoxon"] = {{"p_value", rep.wilcoxon->p_value}, {"w_plus", rep.wilcoxon->w_plus},
                     {"n_eff", rep.wilcoxon->n_eff}, {"exact", rep.wilcoxon->exact}};
  j["summary"] = std::move(s);
  if (rep.gate) j["gate"] = to_json(*rep.gate);
  return j;
}

/// Fixed-width text rendering of the report.
inline void write_report_text(std::ostream& os, const RunReport& rep) {
  const bool base = rep.baseline_auc.has_value();
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(6) << "run" << std::setw(22) << "seed" << std::right << std::setw(10) << "auc"
     << std::setw(10) << "ap";
  if (base) os << std::setw(10) << "ae_auc" << std::setw(10) << "ae_ap";
  os << std::setw(12) << "sc_anom" << std::setw(12) << "sc_norm" << '\n';
  for (const auto& r : rep.runs) {
    os << std::left << std::setw(6) << r.run << std::setw(22) << r.seed << std::right << std::setw(10) << r.argue.auc
       << std::setw(10) << r.argue.ap;
    if (base) os << std::setw(10) << r.baseline->auc << std::setw(10) << r.baseline->ap;
    os << std::setw(12) << r.shortcut_anomalous << std::setw(12) << r.shortcut_normal << '\n';
  }
  auto pm = [](const MeanStd& m) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << m.mean << " +- " << m.std;
    return s.str();
  };
  os << '\n' << std::left << std::setw(16) << "" << std::setw(20) << "AUC" << "AP" << '\n';
  os << std::setw(16) << "ARGUE" << std::setw(20) << pm(rep.argue_auc) << pm(rep.argue_ap) << '\n';
  if (base) os << std::setw(16) << "autoencoder" << std::setw(20) << pm(*rep.baseline_auc) << pm(*rep.baseline_ap) << '\n';
  if (rep.wilcoxon)
    os << "wilcoxon p (AUC, paired runs): " << std::setprecision(6) << rep.wilcoxon->p_value
       << (rep.wilcoxon->exact ? " exact" : " normal approx") << '\n';
  if (rep.gate) {
    const auto& t = *rep.gate;
    os << "\nmean gate mass per group\n" << std::setprecision(4) << std::left << std::setw(14) << "group" << std::right
       << std::setw(8) << "n";
    for (const auto& c : t.columns) os << std::setw(std::max<int>(10, static_cast<int>(c.size()) + 2)) << c;
    os << '\n';
    for (const auto& r : t.rows) {
      os << std::left << std::setw(14) << r.group << std::right << std::setw(8) << r.count;
      for (std::size_t c = 0; c < r.mean.size(); ++c)
        os << std::setw(std::max<int>(10, static_cast<int>(t.columns[c].size()) + 2)) << r.mean[c];
      os << '\n';
    }
  }
}

/// Runs every repeat and writes report.json and report.txt when `out_dir` is set.
inline RunReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir = {}) {
  detail::in_stage("config", [&] {
    cfg.validate();
    return 0;
  });
  const Dataset data = load_dataset(cfg);
  std::vector<RunResult> runs;
  for (std::size_t r = 0; r < cfg.repeat_count; ++r) {
    const auto dir = out_dir.empty() ? std::filesystem::path{} : out_dir / ("run_" + std::to_string(r));
    auto tr = run_once(cfg, data, r, dir);
    runs.push_back(std::move(tr.result));
  }
  auto rep = detail::in_stage("report", [&] { return summarize(to_json(cfg), std::move(runs)); });
  if (!out_dir.empty())
    detail::in_stage("report", [&] {
      auto j = detail::open_out(out_dir / "report.json");
      j << to_json(rep).dump(2) << '\n';
      auto t = detail::open_out(out_dir / "report.txt");
      write_report_text(t, rep);
      return 0;
    });
  return rep;
}

}  // namespace argue
