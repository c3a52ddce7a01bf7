// argue: command-line front end for the experiment pipeline.
//
//   argue cluster    --config c.json --out dir   expert assignment of the training rows
//   argue train      --config c.json --out dir   one run: models, manifest, scores, report
//   argue score      --config c.json --model m --out dir
//   argue experiment --config c.json --out dir   repeat_count runs and the summary report
//   argue ablation   --config c.json --model m --out dir   mean gate mass per group
//
// --seed overrides the config seed, --mode {unsupervised|semi} the config mode.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "argue/argue.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::string out;
  std::string model;
  std::string manifest;
};

argue::ExperimentConfig load_config(const CommonOptions& o) {
  auto cfg = argue::load_experiment_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.mode) {
    try {
      cfg.set_mode(argue::parse_train_mode(*o.mode));
      cfg.validate();
    } catch (const argue::Error& e) {
      throw argue::PipelineError("config", e.what());
    }
  }
  return cfg;
}

std::optional<nlohmann::json> load_manifest(const std::string& path) {
  if (path.empty()) return std::nullopt;
  std::ifstream in(path);
  if (!in) throw argue::PipelineError("split", "cannot open manifest '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw argue::PipelineError("split", "manifest '" + path + "': " + e.what());
  }
}

std::ofstream open_out(const fs::path& p) {
  return argue::detail::in_stage("persist", [&] {
    if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
    return argue::detail::open_out(p);
  });
}

void write_report(const argue::RunReport& rep, const fs::path& dir) {
  open_out(dir / "report.json") << argue::to_json(rep).dump(2) << '\n';
  auto t = open_out(dir / "report.txt");
  argue::write_report_text(t, rep);
  argue::write_report_text(std::cout, rep);
}

int cmd_cluster(const CommonOptions& o) {
  const auto cfg = load_config(o);
  const auto data = argue::load_dataset(cfg);
  const auto p = argue::prepare_run(cfg, data, cfg.seed, load_manifest(o.manifest));
  const fs::path dir(o.out);
  auto a = open_out(dir / "assignment.csv");
  a << "row_index,expert_index\n";
  const auto pos = p.split.train_unlabeled_positions();
  for (std::size_t i = 0; i < pos.size(); ++i) a << p.split.train.row_ids[pos[i]] << ',' << p.assignment.expert_index[i] << '\n';
  nlohmann::ordered_json summary{{"strategy", argue::to_string(p.assignment.strategy)},
                                 {"expert_count", p.assignment.expert_count},
                                 {"experts", p.assignment.expert_labels},
                                 {"sizes", p.assignment.counts()}};
  open_out(dir / "clusters.json") << summary.dump(2) << '\n';
  open_out(dir / "split.json") << argue::split_manifest(p.split, p.scaler).dump(1) << '\n';
  const auto sizes = p.assignment.counts();
  for (std::size_t j = 0; j < sizes.size(); ++j)
    std::cout << "expert " << j << " (" << p.assignment.expert_labels[j] << "): " << sizes[j] << " rows\n";
  return 0;
}

int cmd_train(const CommonOptions& o) {
  auto cfg = load_config(o);
  cfg.repeat_count = 1;
  const auto data = argue::load_dataset(cfg);
  auto tr = argue::run_once(cfg, data, 0, o.out);
  std::vector<argue::RunResult> runs;
  runs.push_back(std::move(tr.result));
  write_report(argue::summarize(argue::to_json(cfg), std::move(runs)), o.out);
  return 0;
}

int cmd_experiment(const CommonOptions& o) {
  const auto cfg = load_config(o);
  const auto rep = argue::run_experiment(cfg, o.out);
  argue::write_report_text(std::cout, rep);
  return 0;
}

argue::AnyModel load_any(const std::string& path) {
  return argue::detail::in_stage("model", [&] { return argue::load_model(path); });
}

int cmd_score(const CommonOptions& o) {
  const auto cfg = load_config(o);
  const auto data = argue::load_dataset(cfg);
  const auto p = argue::prepare_run(cfg, data, cfg.seed, load_manifest(o.manifest), false);
  const auto model = load_any(o.model);
  std::vector<argue::ScoreRow> rows;
  argue::detail::in_stage("score", [&] {
    const auto& test = p.split.test;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto x = p.test.row(i);
      const double s = std::visit(
          [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if (m.config.input_dim != x.size())
              throw argue::ShapeError("model expects " + std::to_string(m.config.input_dim) + " features, data has " +
                                      std::to_string(x.size()));
            if constexpr (std::is_same_v<T, argue::ArgueModel>) return argue::score(m, x).anomaly_score;
            else return argue::ae_score(m, x);
          },
          model);
      rows.push_back({test.row_ids[i], s, (*test.anomaly_labels)[i]});
    }
    return 0;
  });
  auto out = open_out(fs::path(o.out) / "scores.csv");
  argue::write_scores_csv(out, rows);
  std::vector<double> s;
  std::vector<int> y;
  for (const auto& r : rows) {
    s.push_back(r.score);
    y.push_back(r.label);
  }
  const auto e = argue::detail::in_stage("metrics", [&] { return argue::evaluate(s, y); });
  std::cout << "scored " << rows.size() << " rows: auc " << e.auc << ", ap " << e.ap << '\n';
  return 0;
}

int cmd_ablation(const CommonOptions& o) {
  const auto cfg = load_config(o);
  const auto data = argue::load_dataset(cfg);
  const auto p = argue::prepare_run(cfg, data, cfg.seed, load_manifest(o.manifest));
  const auto any = load_any(o.model);
  if (!std::holds_alternative<argue::ArgueModel>(any))
    throw argue::PipelineError("model", "'" + o.model + "' holds an autoencoder baseline, ablation needs an ARGUE model");
  const auto& model = std::get<argue::ArgueModel>(any);
  const auto table = argue::detail::in_stage("ablation", [&] {
    if (model.config.input_dim != p.test.cols()) throw argue::ShapeError("model input width does not match the data");
    auto labels = p.assignment.expert_labels;
    if (labels.size() != model.config.expert_count) labels.clear();
    return argue::emit_gate_ablation(model, p.test, argue::test_groups(p.split.test), labels);
  });
  auto out = open_out(fs::path(o.out) / "gate.csv");
  argue::write_gate_csv(out, table);
  argue::write_gate_csv(std::cout, table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ARGUE anomaly detection: clustering, training, scoring and experiment reports"};
  app.require_subcommand(1);
  CommonOptions o;

  auto add_common = [&](CLI::App* sub, bool needs_model) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--mode", o.mode, "override the training mode")->check(CLI::IsMember({"unsupervised", "semi"}));
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--manifest", o.manifest, "reuse a split manifest instead of re-splitting")->check(CLI::ExistingFile);
    if (needs_model) sub->add_option("--model", o.model, "model file")->required()->check(CLI::ExistingFile);
  };
  auto* cluster = app.add_subcommand("cluster", "assign training rows to experts");
  auto* train = app.add_subcommand("train", "train one ARGUE model and its baseline");
  auto* score = app.add_subcommand("score", "score the test split with a saved model");
  auto* experiment = app.add_subcommand("experiment", "repeated runs with a summary report");
  auto* ablation = app.add_subcommand("ablation", "mean gate mass per test group");
  add_common(cluster, false);
  add_common(train, false);
  add_common(score, true);
  add_common(experiment, false);
  add_common(ablation, true);

  CLI11_PARSE(app, argc, argv);

  const std::string verb = app.get_subcommands().front()->get_name();
  try {
    if (verb == "cluster") return cmd_cluster(o);
    if (verb == "train") return cmd_train(o);
    if (verb == "score") return cmd_score(o);
    if (verb == "experiment") return cmd_experiment(o);
    return cmd_ablation(o);
  } catch (const argue::PipelineError& e) {
    std::cerr << "argue " << verb << ": error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "argue " << verb << ": error: internal: " << e.what() << '\n';
    return 1;
  }
}
