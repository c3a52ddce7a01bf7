// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exit status is
// nonzero when any criterion fails.
//
// ARGUE_MNIST_DIR, when set, points at a directory holding the MNIST
// train-images-idx3-ubyte / train-labels-idx1-ubyte files for criterion 11.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "argue/argue.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace argue;
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {Verdict::fail, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
  if (o.verdict == Verdict::fail) ++failures;
  std::cout << "criterion " << std::setw(2) << id << " " << tag << "  " << name << "  [" << std::fixed
            << std::setprecision(1) << secs << "s] " << o.detail << std::endl;
}

Outcome verdict(bool ok, const std::string& detail) { return {ok ? Verdict::pass : Verdict::fail, detail}; }

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Benchmark mixture: 4 clusters in 20 dimensions, 2000 normals each, 400 test
// anomalies, 1% pollution, by-class experts, seeds 1..5.
nlohmann::json benchmark_config(const std::string& mode) {
  auto j = nlohmann::json::parse(R"({
    "seed": 1,
    "repeat_count": 5,
    "dataset": {"synthetic": {"clusters": 4, "dim": 20, "n_per_cluster": 2000, "anomaly_count": 564,
                              "separation": 6.0, "sigma": 1.0, "seed": 2021}},
    "split": {"test_fraction": 0.2, "pollution_rate": 0.01, "known_anomaly_budget": 0, "test_anomaly_count": 400},
    "clustering": {"strategy": "by_class"},
    "model": {"encoder_dims": [16, 8], "alarm_dims": [64, 32], "gate_dims": [64, 32]},
    "train": {"epochs_pretrain": 30, "epochs_detector": 30, "batch_size": 256, "noise_ratio": 1.0,
              "learning_rate": 0.001}
  })");
  j["mode"] = mode;
  if (mode == "semi") j["split"]["known_anomaly_budget"] = 100;
  return j;
}

struct BenchRuns {
  std::vector<RunResult> runs;
  double seconds = 0;
};

BenchRuns run_benchmark(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = load_dataset(cfg);
  BenchRuns b;
  for (std::size_t r = 0; r < cfg.repeat_count; ++r) b.runs.push_back(run_once(cfg, data, r).result);
  b.seconds = seconds_since(t0);
  return b;
}

std::vector<double> aucs(const std::vector<RunResult>& runs) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.argue.auc);
  return v;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + fmt(x);
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<double> uniform_input(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  std::vector<double> x(n);
  for (double& v : x) v = u(rng);
  return x;
}

}  // namespace

int main() {
  report(1, "gradient check, 20 random graphs", [] {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    std::size_t params = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto r = gradcheck::random_trial(seed);
      worst = std::max(worst, r.max_rel_error);
      params += r.params;
    }
    const double secs = seconds_since(t0);
    return verdict(worst < 1e-4 && secs < 30.0,
                   "max rel error " + fmt(worst, 3) + " over " + std::to_string(params) + " params, " + fmt(secs, 3) +
                       "s (limits 1e-4, 30s)");
  });

  report(2, "score algebra, 1000 inputs", [] {
    std::mt19937_64 rng(2);
    auto cfg = gradcheck::random_config(rng);
    // Several experts so the mixture identity is not trivial.
    cfg.expert_count = 4;
    const auto m = build(cfg, 2);
    double worst_identity = 0, worst_sum = 0;
    bool in_range = true;
    for (int i = 0; i < 1000; ++i) {
      const auto s = score(m, uniform_input(cfg.input_dim, rng));
      double fused = s.gating.shortcut(), sum = 0;
      for (std::size_t j = 0; j < cfg.expert_count; ++j) fused += s.gating.p[j] * s.expert_scores[j];
      for (double p : s.gating.p) sum += p;
      worst_identity = std::max(worst_identity, std::abs(s.anomaly_score - fused));
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      in_range = in_range && s.anomaly_score >= 0.0 && s.anomaly_score <= 1.0;
    }
    return verdict(worst_identity <= 1e-9 && worst_sum <= 1e-6 && in_range,
                   "identity error " + fmt(worst_identity, 3) + ", gate sum error " + fmt(worst_sum, 3) +
                       (in_range ? ", scores in [0,1]" : ", score outside [0,1]") + " (J=" +
                       std::to_string(cfg.expert_count) + ")");
  });

  report(3, "metric and Wilcoxon oracles", [] {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(3);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
      const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 200)(rng);
      std::uniform_int_distribution<int> grid(0, 30);
      std::vector<double> s(n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = grid(rng) / 30.0;
        y[i] = std::bernoulli_distribution(0.25)(rng);
      }
      y[0] = 1;
      y[1] = 0;
      worst = std::max(worst, std::abs(roc_auc(s, y) - oracle::auc_pairs(s, y)));
      worst = std::max(worst, std::abs(average_precision(s, y) - oracle::ap_sweep(s, y)));
    }
    std::size_t mismatches = 0;
    for (int t = 0; t < 200; ++t) {
      const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 10)(rng);
      std::uniform_int_distribution<int> grid(-5, 5);
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = grid(rng) * 0.1;
        b[i] = grid(rng) * 0.1;
      }
      const auto got = wilcoxon_signed_rank(a, b);
      const auto want = oracle::wilcoxon_enumerate(a, b);
      mismatches += got.p_value != want.p_value || got.w_plus != want.w_plus || got.n_eff != want.n_eff;
    }
    const double secs = seconds_since(t0);
    return verdict(worst <= 1e-12 && mismatches == 0 && secs < 30.0,
                   "max metric deviation " + fmt(worst, 3) + ", wilcoxon mismatches " + std::to_string(mismatches) +
                       "/200, " + fmt(secs, 3) + "s");
  });

  report(4, "noise prior moments", [] {
    Rng rng(mix_seed(4, stream::detector_noise));
    const std::size_t n = 100000, dim = 20;
    const auto m = sample_noise(dim, n, rng);
    double worst_mean = 0, worst_std = 0;
    for (std::size_t f = 0; f < dim; ++f) {
      double s = 0, ss = 0;
      for (std::size_t r = 0; r < n; ++r) s += m(r, f);
      const double mean = s / static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r) ss += (m(r, f) - mean) * (m(r, f) - mean);
      worst_mean = std::max(worst_mean, std::abs(mean - 0.5));
      worst_std = std::max(worst_std, std::abs(std::sqrt(ss / static_cast<double>(n - 1)) - 1.0));
    }
    return verdict(worst_mean <= 0.02 && worst_std <= 0.02,
                   "max |mean-0.5| " + fmt(worst_mean, 3) + ", max |std-1| " + fmt(worst_std, 3) + " over " +
                       std::to_string(dim) + " dims");
  });

  report(5, "freeze and single-expert equivalence", [] {
    const auto syn = synth_gaussian_mixture(SynthSpec{2, 8, 200, 20, 6.0, 1.0, 5});
    const auto& d = syn.data;
    std::vector<std::size_t> normal_rows = d.rows_where_label(0), anomaly_rows = d.rows_where_label(1);
    const auto scaler = fit_scale(d.features.select_rows(normal_rows));
    const auto x = apply_scale(scaler, d.features.select_rows(normal_rows));
    const auto known = apply_scale(scaler, d.features.select_rows(anomaly_rows));
    std::vector<std::string> classes;
    for (auto r : normal_rows) classes.push_back((*d.class_labels)[r]);
    const auto assignment = assign_by_class(classes);
    const ArgueConfig cfg{8, {6, 3}, 2, {16}, {16}};

    TrainConfig t;
    t.epochs_pretrain = 5;
    t.epochs_detector = 5;
    t.batch_size = 32;
    t.optimizer.lr = 1e-3;
    t.seed = 5;
    bool frozen = true;
    for (auto mode : {TrainMode::unsupervised, TrainMode::semi_supervised}) {
      auto m = build(cfg, 5);
      pretrain(m, x, assignment, t);
      const auto before = m;
      auto td = t;
      td.mode = mode;
      td.known_anomaly_budget = mode == TrainMode::semi_supervised ? known.rows() : 0;
      train_detector(m, TrainingSet{x, assignment, mode == TrainMode::semi_supervised ? known : Matrix(0, 8)}, td);
      frozen = frozen && m.encoder == before.encoder && m.experts == before.experts && !(m.alarm == before.alarm) &&
               !(m.gate == before.gate);
    }

    ArgueConfig single = cfg;
    single.expert_count = 1;
    auto m = build(single, 9);
    t.seed = 9;
    const auto argue_losses = pretrain(m, x, assign_by_class(std::vector<std::string>(x.rows(), "all")), t);
    const auto ae = train_ae(single, x, t, 9);
    const bool equal = m.encoder == ae.model.encoder && m.experts.front() == ae.model.decoder &&
                       argue_losses == ae.epoch_losses;
    return verdict(frozen && equal, std::string("encoder/experts ") + (frozen ? "bitwise unchanged" : "CHANGED") +
                                        ", J=1 pretraining " + (equal ? "bitwise equals" : "DIFFERS from") +
                                        " AE training");
  });

  // Criteria 6, 8 and 9 share these runs.
  std::optional<BenchRuns> unsup, semi;

  report(6, "synthetic unsupervised benchmark", [&] {
    unsup = run_benchmark(parse_experiment_config(benchmark_config("unsupervised")));
    const auto a = aucs(unsup->runs);
    std::vector<double> b;
    for (const auto& r : unsup->runs) b.push_back(r.baseline->auc);
    const double ma = mean_std(a).mean, mb = mean_std(b).mean;
    return verdict(ma >= 0.90 && ma >= mb - 0.02 && unsup->seconds < 300.0,
                   "ARGUE mean AUC " + fmt(ma) + " [" + join(a) + "], AE mean AUC " + fmt(mb) + " [" + join(b) + "], " +
                       fmt(unsup->seconds, 3) + "s (need >= 0.90, >= AE - 0.02, < 300s)");
  });

  report(7, "normal-cluster sweep k=1..6", [] {
    // Fixed anomaly pool from a 6-cluster mixture; k keeps classes 0..k-1 as normals.
    auto j = nlohmann::json::parse(R"({
      "seed": 1,
      "repeat_count": 5,
      "mode": "unsupervised",
      "dataset": {"synthetic": {"clusters": 6, "dim": 20, "n_per_cluster": 1000, "anomaly_count": 500,
                                "separation": 6.0, "sigma": 1.0, "seed": 2021}},
      "split": {"test_fraction": 0.2, "pollution_rate": 0.01, "known_anomaly_budget": 0, "test_anomaly_count": 400},
      "clustering": {"strategy": "by_class"},
      "model": {"encoder_dims": [16, 8], "alarm_dims": [64, 32], "gate_dims": [64, 32]},
      "train": {"epochs_pretrain": 30, "epochs_detector": 30, "batch_size": 256, "noise_ratio": 1.0,
                "learning_rate": 0.001},
      "baseline": false
    })");
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> means;
    for (std::size_t k = 1; k <= 6; ++k) {
      j["dataset"]["synthetic"]["normal_clusters"] = k;
      means.push_back(mean_std(aucs(run_benchmark(parse_experiment_config(j)).runs)).mean);
    }
    const double secs = seconds_since(t0);
    const double gain = means.back() - means.front();
    return verdict(gain >= 0.10 && secs < 900.0, "mean AUC by k [" + join(means) + "], k=6 minus k=1 = " +
                                                     fmt(gain) + ", " + fmt(secs, 3) + "s (need >= 0.10, < 900s)");
  });

  report(8, "semi-supervised versus unsupervised", [&] {
    if (!unsup) unsup = run_benchmark(parse_experiment_config(benchmark_config("unsupervised")));
    auto cfg = parse_experiment_config(benchmark_config("semi"));
    cfg.baseline = false;
    semi = run_benchmark(cfg);
    const auto u = aucs(unsup->runs), s = aucs(semi->runs);
    const double mu = mean_std(u).mean, ms = mean_std(s).mean;
    return verdict(ms >= mu - 0.02, "semi mean AUC " + fmt(ms) + " [" + join(s) + "], unsupervised " + fmt(mu) +
                                        " [" + join(u) + "] (need semi >= unsup - 0.02)");
  });

  report(9, "short-cut mass and gate recovery (semi runs)", [&] {
    if (!semi) {
      auto cfg = parse_experiment_config(benchmark_config("semi"));
      cfg.baseline = false;
      semi = run_benchmark(cfg);
    }
    // Pooled over the semi-supervised runs, weighted by test rows.
    double anom = 0, norm = 0, recovered = 0, n_anom = 0, n_norm = 0;
    for (const auto& r : semi->runs) {
      const double na = static_cast<double>(r.argue.n_anomalous), nn = static_cast<double>(r.argue.n_normal);
      anom += r.shortcut_anomalous * na;
      norm += r.shortcut_normal * nn;
      recovered += r.gate_recovery.value_or(0.0) * nn;
      n_anom += na;
      n_norm += nn;
    }
    anom /= n_anom;
    norm /= n_norm;
    recovered /= n_norm;
    return verdict(anom > norm && recovered >= 0.80, "short-cut mass anomalous " + fmt(anom) + " vs normal " +
                                                         fmt(norm) + ", gate recovers " + fmt(recovered) +
                                                         " of normal rows (need >, >= 0.80)");
  });

  report(10, "reproducibility and persistence", [] {
    const auto cfg = parse_experiment_config(nlohmann::json::parse(R"({
      "seed": 10,
      "repeat_count": 2,
      "dataset": {"synthetic": {"clusters": 3, "dim": 10, "n_per_cluster": 300, "anomaly_count": 120,
                                "separation": 6.0, "sigma": 1.0, "seed": 11}},
      "split": {"test_fraction": 0.2, "pollution_rate": 0.01, "known_anomaly_budget": 0},
      "model": {"encoder_dims": [8, 4], "alarm_dims": [32, 16], "gate_dims": [32, 16]},
      "train": {"epochs_pretrain": 10, "epochs_detector": 10, "batch_size": 64, "learning_rate": 0.001}
    })"));
    const auto root = fs::temp_directory_path() / "argue_acceptance_repro";
    fs::remove_all(root);
    run_experiment(cfg, root / "a");
    run_experiment(cfg, root / "b");
    bool identical = true;
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
      if (!e.is_regular_file()) continue;
      ++files;
      identical = identical && slurp(e.path()) == slurp(root / "b" / fs::relative(e.path(), root / "a"));
    }
    bool round_trip = true;
    for (const char* run : {"run_0", "run_1"}) {
      const auto path = root / "a" / run / "argue.model";
      const auto m = load_argue_model(path.string());
      round_trip = round_trip && serialize(m) == slurp(path);
      const auto ae = load_ae_baseline((root / "a" / run / "baseline.model").string());
      round_trip = round_trip && serialize(ae) == slurp(root / "a" / run / "baseline.model");
    }
    // A freshly trained model scores identically after a save/load cycle.
    const auto tr = run_once(cfg, load_dataset(cfg), 0);
    const auto copy = std::get<ArgueModel>(deserialize(serialize(tr.model)));
    round_trip = round_trip && copy == tr.model;
    for (std::size_t i = 0; i < tr.prepared.test.rows(); ++i)
      round_trip = round_trip &&
                   score(copy, tr.prepared.test.row(i)).anomaly_score == tr.result.argue_scores[i].score;
    fs::remove_all(root);
    return verdict(identical && round_trip && files > 0,
                   std::to_string(files) + " artifacts " + (identical ? "bitwise identical" : "DIFFER") +
                       ", model round trip " + (round_trip ? "bit-exact" : "NOT exact"));
  });

  report(11, "MNIST dense encoder, semi-supervised", []() -> Outcome {
    const char* dir = std::getenv("ARGUE_MNIST_DIR");
    if (!dir) return {Verdict::skip, "set ARGUE_MNIST_DIR to the MNIST idx directory to run"};
    const fs::path d(dir);
    auto j = nlohmann::json::parse(R"({
      "seed": 1,
      "repeat_count": 1,
      "mode": "semi",
      "dataset": {"idx": {"normal_classes": ["0", "1", "2", "3", "4"], "max_rows": 20000}},
      "split": {"test_fraction": 0.2, "pollution_rate": 0.0, "known_anomaly_budget": 100,
                "test_anomaly_count": 2000},
      "clustering": {"strategy": "by_class"},
      "model": {"encoder_dims": [128, 32], "alarm_dims": [64, 32], "gate_dims": [64, 32]},
      "train": {"epochs_pretrain": 15, "epochs_detector": 15, "batch_size": 128, "learning_rate": 0.001},
      "baseline": false
    })");
    j["dataset"]["idx"]["images"] = (d / "train-images-idx3-ubyte").string();
    j["dataset"]["idx"]["labels"] = (d / "train-labels-idx1-ubyte").string();
    const auto t0 = std::chrono::steady_clock::now();
    const auto runs = run_benchmark(parse_experiment_config(j)).runs;
    const double secs = seconds_since(t0);
    const double auc = runs.front().argue.auc;
    return verdict(auc >= 0.90 && secs < 1200.0, "AUC " + fmt(auc) + " with " +
                                                    std::to_string(runs.front().expert_labels.size()) + " experts, " +
                                                    fmt(secs, 3) + "s (need >= 0.90, < 1200s)");
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion/criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
