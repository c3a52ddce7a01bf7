#include <catch_amalgamated.hpp>

#include <filesystem>
#include <set>
#include <sstream>

#include "argue/data.hpp"
#include "argue/metrics.hpp"

using namespace argue;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("argue_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Dataset labeled(std::size_t normals, std::size_t anomalies) {
  Dataset d;
  d.features = Matrix(normals + anomalies, 2);
  d.anomaly_labels.emplace();
  for (std::size_t i = 0; i < normals + anomalies; ++i) {
    d.features(i, 0) = static_cast<double>(i);
    d.features(i, 1) = i < normals ? 0.0 : 1.0;
    d.anomaly_labels->push_back(i < normals ? 0 : 1);
    d.row_ids.push_back(i);
  }
  return d;
}

}  // namespace

TEST_CASE("csv ingestion with label, class, categorical and dropped columns") {
  std::istringstream in(
      "id,a,color,b,label,kind\n"
      "1,0.5,red,2,normal,x\n"
      "2,1.5,blue,-1,attack,y\n"
      "3,2.5,red,0,normal,x\n");
  CsvSchema s;
  s.label_column = "label";
  s.anomaly_values = {"attack"};
  s.class_column = "kind";
  s.categorical_columns = {"color"};
  s.drop_columns = {"id"};
  const auto d = load_csv(in, s);
  CHECK(d.feature_names == std::vector<std::string>{"a", "color=blue", "color=red", "b"});
  REQUIRE(d.size() == 3);
  CHECK(d.features(1, 0) == 1.5);
  CHECK(d.features(1, 1) == 1.0);
  CHECK(d.features(1, 2) == 0.0);
  CHECK(d.features(1, 3) == -1.0);
  CHECK(*d.anomaly_labels == std::vector<int>{0, 1, 0});
  CHECK(*d.class_labels == std::vector<std::string>{"x", "y", "x"});
  CHECK(d.row_ids == std::vector<std::size_t>{0, 1, 2});
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("csv errors point at the offending cell or column") {
  std::istringstream bad("a,b\n1,2\n3,oops\n");
  try {
    load_csv(bad, CsvSchema{});
    FAIL("expected an ingestion error");
  } catch (const IngestionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("'b'") != std::string::npos);
  }
  std::istringstream ragged("a,b\n1\n");
  CHECK_THROWS_AS(load_csv(ragged, CsvSchema{}), IngestionError);
  std::istringstream missing("a,b\n1,2\n");
  CsvSchema s;
  s.label_column = "label";
  CHECK_THROWS_AS(load_csv(missing, s), SchemaError);
  std::istringstream empty("");
  CHECK_THROWS_AS(load_csv(empty, CsvSchema{}), IngestionError);
}

TEST_CASE("csv write and load round trip exactly") {
  auto syn = synth_gaussian_mixture(SynthSpec{2, 3, 10, 4, 6.0, 1.0, 3});
  std::stringstream ss;
  write_csv(ss, syn.data);
  CsvSchema s;
  s.label_column = "label";
  s.class_column = "class";
  const auto back = load_csv(ss, s);
  CHECK(back.features == syn.data.features);
  CHECK(back.anomaly_labels == syn.data.anomaly_labels);
  CHECK(back.class_labels == syn.data.class_labels);
  CHECK(back.feature_names == syn.data.feature_names);
}

TEST_CASE("idx round trip and format errors") {
  const auto dir = scratch_dir("idx");
  const auto img = (dir / "img").string(), lab = (dir / "lab").string();
  write_idx(img, lab, {{0, 255, 51, 102}, {255, 255, 0, 0}, {1, 2, 3, 4}}, 2, 2, {7, 0, 3});
  const auto d = load_idx(img, lab);
  REQUIRE(d.size() == 3);
  CHECK(d.features.cols() == 4);
  CHECK(d.features(0, 1) == 1.0);
  CHECK(d.features(0, 2) == Approx(0.2));
  CHECK(*d.class_labels == std::vector<std::string>{"7", "0", "3"});
  CHECK_THROWS_AS(load_idx(lab, lab), FormatError);
  CHECK_THROWS_AS(load_idx(img, img), FormatError);
  CHECK_THROWS_AS(load_idx((dir / "nope").string(), lab), FormatError);
  write_idx(img, lab, {{1, 2, 3, 4}}, 2, 2, {1, 2});
  CHECK_THROWS_AS(load_idx(img, lab), FormatError);
}

TEST_CASE("labeling anomalies by class") {
  Dataset d;
  d.class_labels = std::vector<std::string>{"0", "5", "3", "9"};
  label_anomalies_by_class(d, {"0", "1", "2", "3", "4"});
  CHECK(*d.anomaly_labels == std::vector<int>{0, 1, 0, 1});
  Dataset none;
  CHECK_THROWS_AS(label_anomalies_by_class(none, {"0"}), SchemaError);
}

TEST_CASE("min-max scaling is unclipped and maps constants to one half") {
  Matrix train(2, 2);
  train(0, 0) = 2;
  train(1, 0) = 4;
  train(0, 1) = 7;
  train(1, 1) = 7;
  const auto s = fit_scale(train);
  Matrix test(1, 2);
  test(0, 0) = 6;
  test(0, 1) = -3;
  const auto t = apply_scale(s, test);
  CHECK(t(0, 0) == 2.0);
  CHECK(t(0, 1) == 0.5);
  CHECK_THROWS_AS(fit_scale(Matrix(0, 2)), ConfigError);
}

TEST_CASE("split sizes follow the pollution and budget settings") {
  const auto d = labeled(1000, 100);
  SplitSpec spec;
  spec.test_fraction = 0.2;
  spec.pollution_rate = 0.01;
  spec.known_anomaly_budget = 10;
  spec.seed = 4;
  const auto s = make_split(d, spec);
  // 800 train normals → floor(0.01 · 800) = 8 hidden anomalies.
  CHECK(s.pollution_rows.size() == 8);
  CHECK(s.known_anomaly_rows.size() == 10);
  CHECK(s.train.size() == 800 + 8 + 10);
  std::size_t labeled_anomalies = 0;
  for (int y : *s.train.anomaly_labels) labeled_anomalies += y;
  CHECK(labeled_anomalies == 10);
  CHECK(s.train_unlabeled_positions().size() == 808);
  // Test: 200 normals and the 82 remaining anomalies, disjoint from train.
  CHECK(s.test.size() == 200 + 82);
  std::set<std::size_t> train_set(s.train.row_ids.begin(), s.train.row_ids.end());
  for (auto r : s.test.row_ids) CHECK_FALSE(train_set.count(r));
  CHECK(std::is_sorted(s.test_rows.begin(), s.test_rows.end()));
  for (auto r : s.pollution_rows) CHECK((*d.anomaly_labels)[r] == 1);
}

TEST_CASE("pure normal training split") {
  const auto s = make_split(labeled(50, 5), SplitSpec{0.2, 0.0, 0, std::nullopt, 1});
  for (int y : *s.train.anomaly_labels) CHECK(y == 0);
  for (auto r : s.train.row_ids) CHECK(r < 50);
  CHECK(s.test.size() == 10 + 5);
}

TEST_CASE("split protocol errors") {
  CHECK_THROWS_AS(make_split(labeled(100, 5), SplitSpec{0.2, 0.0, 10, std::nullopt, 1}), ProtocolError);
  CHECK_THROWS_AS(make_split(labeled(100, 5), SplitSpec{0.2, 0.0, 0, 6, 1}), ProtocolError);
  CHECK_THROWS_AS(make_split(labeled(100, 5), SplitSpec{1.5, 0.0, 0, std::nullopt, 1}), ConfigError);
  Dataset unlabeled;
  unlabeled.features = Matrix(3, 1);
  unlabeled.row_ids = {0, 1, 2};
  CHECK_THROWS_AS(make_split(unlabeled, SplitSpec{}), SchemaError);
}

TEST_CASE("splits are seeded and restorable from their manifest") {
  const auto d = labeled(300, 40);
  const SplitSpec spec{0.25, 0.02, 5, 20, 9};
  const auto a = make_split(d, spec), b = make_split(d, spec);
  CHECK(a.train_rows == b.train_rows);
  CHECK(a.test_rows == b.test_rows);
  const auto c = make_split(d, SplitSpec{0.25, 0.02, 5, 20, 10});
  CHECK(a.train_rows != c.train_rows);

  const auto scaler = fit_scale(a.train.features);
  const auto j = nlohmann::json::parse(split_manifest(a, scaler).dump());
  const auto [r, sc] = split_from_manifest(d, j);
  CHECK(r.train_rows == a.train_rows);
  CHECK(r.known_anomaly_rows == a.known_anomaly_rows);
  CHECK(r.test.features == a.test.features);
  CHECK(r.train.anomaly_labels == a.train.anomaly_labels);
  CHECK(sc == scaler);
  auto broken = j;
  broken["test_rows"].push_back(100000);
  CHECK_THROWS_AS(split_from_manifest(d, broken), FormatError);
  CHECK_THROWS_AS(split_from_manifest(d, nlohmann::json::object()), FormatError);
}

TEST_CASE("anomaly draw does not depend on the size of the normal pool") {
  auto d1 = labeled(200, 30), d2 = labeled(500, 30);
  // Same anomaly features in both, placed after the normals.
  const SplitSpec spec{0.2, 0.0, 0, 10, 3};
  const auto a = make_split(d1, spec), b = make_split(d2, spec);
  std::vector<std::size_t> anom_a, anom_b;
  for (auto r : a.test_rows)
    if (r >= 200) anom_a.push_back(r - 200);
  for (auto r : b.test_rows)
    if (r >= 500) anom_b.push_back(r - 500);
  CHECK(anom_a == anom_b);
}

TEST_CASE("synthetic mixture geometry") {
  const SynthSpec spec{4, 20, 300, 200, 6.0, 1.0, 21};
  const auto syn = synth_gaussian_mixture(spec);
  const auto& d = syn.data;
  REQUIRE(d.size() == 4 * 300 + 200);
  CHECK_NOTHROW(d.validate());
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b)
      CHECK(std::sqrt(squared_distance(syn.centers.row(a), syn.centers.row(b))) >= 6.0);
  std::vector<double> nearest;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double best = 1e300;
    for (std::size_t k = 0; k < 4; ++k) best = std::min(best, std::sqrt(squared_distance(d.features.row(i), syn.centers.row(k))));
    nearest.push_back(best);
    if ((*d.anomaly_labels)[i]) {
      CHECK(best >= 3.0);
      CHECK((*d.class_labels)[i] == "anomaly");
    } else {
      CHECK((*d.class_labels)[i] == std::to_string(i / 300));
    }
  }
  // Distance to the nearest center alone separates the classes.
  CHECK(roc_auc(nearest, *d.anomaly_labels) >= 0.99);
}

TEST_CASE("synthetic mixture edge cases") {
  const auto one = synth_gaussian_mixture(SynthSpec{1, 5, 50, 10, 6.0, 1.0, 2});
  CHECK(one.centers.rows() == 1);
  CHECK(one.data.size() == 60);
  const auto a = synth_gaussian_mixture(SynthSpec{3, 4, 20, 5, 6.0, 0.5, 8});
  const auto b = synth_gaussian_mixture(SynthSpec{3, 4, 20, 5, 6.0, 0.5, 8});
  CHECK(a.data.features == b.data.features);
  CHECK_THROWS_AS(synth_gaussian_mixture(SynthSpec{0, 4, 20, 5, 6.0, 1.0, 8}), ConfigError);
  CHECK_THROWS_AS(synth_gaussian_mixture(SynthSpec{2, 4, 20, 5, 0.0, 1.0, 8}), ConfigError);
}

TEST_CASE("dataset selection and validation") {
  auto d = labeled(4, 2);
  d.class_labels = std::vector<std::string>{"a", "b", "a", "b", "z", "z"};
  const std::vector<std::size_t> rows{5, 1};
  const auto s = d.select(rows);
  CHECK(s.row_ids == std::vector<std::size_t>{5, 1});
  CHECK(*s.class_labels == std::vector<std::string>{"z", "b"});
  CHECK(d.rows_where_label(1) == std::vector<std::size_t>{4, 5});
  d.row_ids.pop_back();
  CHECK_THROWS_AS(d.validate(), ShapeError);
}
