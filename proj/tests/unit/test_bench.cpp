// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bench.hpp"
#include "error.hpp"
#include "synth.hpp"

using namespace hrbench;
using namespace hrbench::bench;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("hrbench_bench_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected hrbench::Error");
  return ErrorKind::Io;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing, overrides and errors") {
  const auto c = BenchConfig::parse(R"(
# comment
; another
[data]
manifest = corpus/manifest.csv
exclude = r1, r2

[window]
theta_candidates = 95, 90

[model]
kinds = transformer
hidden_sweep = 32,128

[train]
epochs = 3
seeds = 4, 5
target_mode = absolute

[eval]
calibration = false
beta = 1
)",
                                    "/base");
  CHECK(c.resolve(c.manifest) == fs::path("/base/corpus/manifest.csv"));
  CHECK(c.resolve("/abs/x") == fs::path("/abs/x"));
  CHECK(c.exclude == std::vector<std::string>{"r1", "r2"});
  CHECK(c.theta_candidates == std::vector<double>{95, 90});
  CHECK(c.kinds == std::vector<models::EncoderKind>{models::EncoderKind::transformer});
  CHECK(c.hidden_sweep == std::vector<std::size_t>{32, 128});
  CHECK(c.train.epochs == 3);
  CHECK(c.train.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.train.target_mode == training::TargetMode::absolute);
  CHECK_FALSE(c.calibration);
  CHECK(c.beta == 1.0);
  CHECK(c.context_length == 60);
  CHECK(c.train.batch_size == 64);

  auto d = c;
  d.set("train.lr", "0.01");
  d.set("eval.calibration", "true");
  CHECK(d.train.lr == 0.01);
  CHECK(d.calibration);
  CHECK(kind_of([&] { d.set("train.nope", "1"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { d.set("train.epochs", "many"); }) == ErrorKind::Config);
  CHECK(kind_of([] { BenchConfig::parse("[data]\nbogus = 1\n", "."); }) == ErrorKind::Config);
  CHECK(kind_of([] { BenchConfig::parse("epochs = 1\n", "."); }) == ErrorKind::Config);
  CHECK(kind_of([] { BenchConfig::parse("[split]\nratios = 0.5, 0.5, 0.5\n", ".").validate(); }) ==
        ErrorKind::Config);
}

TEST_CASE("run plan and ids") {
  BenchConfig c;
  c.train.seeds = {0, 1};
  c.hidden_sweep = {32, 128};
  const auto runs = plan_runs(c);
  CHECK(runs.size() == 2 * 2 * 2 + 2);
  std::set<std::string> ids;
  for (const auto& r : runs) ids.insert(r.id());
  CHECK(ids.size() == runs.size());
  CHECK(ids.count("cls_grud_s0"));
  CHECK(ids.count("fc_transformer_s1"));
  CHECK(ids.count("cls_grud_h32_s0"));
  CHECK(ids.count("cls_grud_h128_s0"));

  RunSpec r;
  r.task = training::Task::forecasting;
  r.kind = models::EncoderKind::transformer;
  r.target_mode = training::TargetMode::absolute;
  r.seed = 2;
  CHECK(r.id() == "fc_transformer_absolute_s2");
}

TEST_CASE("synthetic corpus is deterministic and per-record independent") {
  SynthSpec s;
  s.n_records = 4;
  s.length_s = 600;
  const auto a = synthesize(s);
  const auto b = synthesize(s);
  REQUIRE(a.size() == 4);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(a[r].record_id == b[r].record_id);
    CHECK(a[r].peaks == b[r].peaks);
  }
  s.n_records = 2;
  const auto c = synthesize(s);
  CHECK(c[1].hr == a[1].hr);
  s.seed = 1;
  CHECK(synthesize(s)[0].hr != a[0].hr);
  for (const auto& rec : a)
    for (double v : rec.hr) {
      CHECK(v >= ingest::kHrMin);
      CHECK(v <= ingest::kHrMax);
    }
}

TEST_CASE("default synthetic corpus yields 580 windows") {
  const SynthSpec s;
  const auto records = synthesize(s);
  std::vector<ingest::HrSeries> series;
  std::size_t windows = 0;
  for (const auto& r : records) {
    series.push_back(ingest::derive_hr({r.record_id, r.peaks}));
    windows += ingest::build_windows(series.back(), 100.0).size();
  }
  CHECK(windows == 580);
  const auto guard = ingest::select_threshold(series);
  CHECK(guard.n_windows == 580);
  CHECK(guard.n_positive_records >= 3);
  CHECK(guard.n_positive_windows >= 40);
}

TEST_CASE("prepared counts track the generator's own bookkeeping") {
  const SynthSpec s;
  const auto records = synthesize(s);
  std::vector<ingest::HrSeries> series;
  for (const auto& r : records) series.push_back(ingest::derive_hr({r.record_id, r.peaks}));
  const auto guard = ingest::select_threshold(series);
  const std::vector<double> thetas{guard.theta};
  const auto truth = synth_truth(records, thetas, 60, 10).by_theta.at(guard.theta);
  CHECK(truth.n_positive_records >= 3);
  CHECK(std::abs(double(guard.n_positive_windows) - double(truth.n_positive_windows)) <=
        0.1 * double(truth.n_positive_windows));
  CHECK(std::abs(double(guard.n_positive_records) - double(truth.n_positive_records)) <=
        0.1 * double(truth.n_positive_records));
}

TEST_CASE("no episodes means no positives") {
  SynthSpec s;
  s.amplitude_bpm = 0.0;
  const auto records = synthesize(s);
  const std::vector<double> thetas{100.0};
  const auto truth = synth_truth(records, thetas, 60, 10);
  CHECK(truth.by_theta.at(100.0).n_positive_windows == 0);
}

TEST_CASE("peaks reproduce the rate they were built from") {
  const std::vector<double> flat(300, 72.0);
  const auto p = hr_to_peaks(flat);
  CHECK(p.front() == 0.0);
  const auto s = ingest::derive_hr({"flat", p});
  for (double v : s.hr) CHECK(v == doctest::Approx(72.0).epsilon(1e-9));

  std::vector<double> ramp(1800);
  for (std::size_t t = 0; t < ramp.size(); ++t) ramp[t] = 60.0 + 60.0 * t / 1800.0;
  const auto r = ingest::derive_hr({"ramp", hr_to_peaks(ramp)});
  for (std::size_t i = 0; i < r.hr.size(); ++i)
    CHECK(std::abs(r.hr[i] - ramp[static_cast<std::size_t>(r.start_second) + i]) < 1.0);
}

TEST_CASE("aggregate uses the sample standard deviation") {
  std::vector<metrics::MetricRow> rows;
  const double per_seed[] = {0.90, 0.92, 0.91};
  for (int s = 0; s < 3; ++s) rows.push_back({"classification", "grud", s, "auroc", per_seed[s], {}, {}, 0});
  rows.push_back({"classification", "grud", 0, "f1", std::nullopt, {}, {}, 0});
  rows.push_back({"classification", "transformer", 0, "auroc", 0.8, {}, {}, 0});
  const auto agg = aggregate(rows);
  bool found = false;
  for (const auto& a : agg) {
    if (a.model == "grud" && a.metric == "auroc") {
      found = true;
      CHECK(a.n_seeds == 3);
      CHECK(*a.mean == doctest::Approx(0.91).epsilon(1e-12));
      CHECK(*a.std == doctest::Approx(0.01).epsilon(1e-9));
    }
    if (a.model == "transformer") CHECK_FALSE(a.std.has_value());
    if (a.metric == "f1") CHECK_FALSE(a.mean.has_value());
  }
  CHECK(found);
}

TEST_CASE("prepare fails cleanly on an empty manifest") {
  TempDir dir;
  {
    std::ofstream m(dir.path / "manifest.csv");
    m << "record_id,path\n";
  }
  auto c = BenchConfig::parse("[data]\nmanifest = manifest.csv\n", dir.path);
  try {
    cmd_prepare(c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptySignal);
    CHECK(std::string(e.what()).find("no records") != std::string::npos);
  }
}

TEST_CASE("end-to-end pipeline on a tiny corpus") {
  TempDir dir;
  auto c = BenchConfig::parse(R"(
[data]
manifest = synth/manifest.csv
prepared_dir = prepared
runs_dir = runs
[window]
min_positive_records = 3
min_positive_windows = 5
[model]
hidden = 6
d_model = 8
heads = 2
layers = 1
ffn_dim = 16
hidden_sweep = 4
[train]
epochs = 2
batch_size = 32
seeds = 0, 1
threads = 1
[eval]
bootstrap = 50
[synth]
out_dir = synth
n_records = 12
length_s = 900
episode_rate_per_hour = 6
seed = 3
)",
                              dir.path);
  std::vector<std::string> log;
  const Logger logger = [&](const std::string& line) { log.push_back(line); };

  cmd_synth(c, logger);
  CHECK(fs::exists(dir.path / "synth/truth.json"));
  const auto prep = cmd_prepare(c, logger);
  CHECK(prep.n_records == 12);
  CHECK(prep.split_windows[0] + prep.split_windows[1] + prep.split_windows[2] == prep.n_windows);

  const auto runs = cmd_train(c, logger);
  CHECK(runs.size() == 9);
  for (const auto& r : runs) {
    const auto run_dir = dir.path / "runs" / r.id();
    CHECK(fs::exists(run_dir / "checkpoint.json"));
    const auto manifest = nlohmann::json::parse(slurp(run_dir / "manifest.json"));
    CHECK(manifest["run_id"] == r.id());
    CHECK(manifest["data"]["context_length"] == 60);
  }

  const auto rows = cmd_evaluate(c, dir.path / "runs", logger);
  bool saw_baseline = false;
  for (const auto& row : rows) {
    if (row.model == "always_negative" && row.metric == "auroc") {
      saw_baseline = true;
      CHECK(*row.point == 0.5);
    }
    if (row.model == "always_negative" && row.metric == "brier") {
      for (const auto& other : rows)
        if (other.model == "always_negative" && other.metric == "prevalence" && other.seed == row.seed)
          CHECK(*row.point == doctest::Approx(*other.point).epsilon(1e-15));
    }
  }
  CHECK(saw_baseline);
  CHECK(fs::exists(dir.path / "runs/cls_grud_s0/calibration.json"));
  CHECK(fs::exists(dir.path / "runs/cls_grud_s0/reliability.csv"));

  const auto agg = cmd_report(dir.path / "runs", logger);
  CHECK_FALSE(agg.empty());
  const auto table = slurp(dir.path / "runs/table_classification.csv");
  CHECK(table.find("AUROC") != std::string::npos);
  CHECK(table.find("grud_h4") != std::string::npos);
  CHECK(fs::exists(dir.path / "runs/table_forecasting.csv"));
  CHECK(log.size() >= 4);

  // Same config and inputs again: byte-identical checkpoints and report.
  c.set("data.runs_dir", "runs_again");
  cmd_train(c);
  cmd_evaluate(c, dir.path / "runs_again");
  CHECK(slurp(dir.path / "runs/report.csv") == slurp(dir.path / "runs_again/report.csv"));
  for (const auto& r : runs)
    CHECK(slurp(dir.path / "runs" / r.id() / "checkpoint.json") ==
          slurp(dir.path / "runs_again" / r.id() / "checkpoint.json"));
}
