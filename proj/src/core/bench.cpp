// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include "bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "autodiff.hpp"
#include "calibration.hpp"
#include "error.hpp"
#include "synth.hpp"

namespace hrbench::bench {

namespace fs = std::filesystem;
using ingest::Split;
using metrics::MaybeValue;
using metrics::MetricRow;
using training::Task;
using training::TargetMode;

namespace {

constexpr double kPersistenceScaleFloor = 1e-6;  // bpm

void emit(const Logger& log, const std::string& line) {
  if (log) log(line);
}

const char* task_short(Task t) { return t == Task::classification ? "cls" : "fc"; }

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::Io, "cannot create directory " + dir.string());
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
}

fs::path prepared_windows(const BenchConfig& c) { return c.resolve(c.prepared_dir) / "windows.csv"; }
fs::path prepared_meta(const BenchConfig& c) { return c.resolve(c.prepared_dir) / "meta.json"; }

// --- evaluation helpers ---------------------------------------------------------

std::vector<double> gather(std::span<const double> v, std::span<const std::size_t> idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

struct RowContext {
  std::string task;
  std::string model;
  std::int64_t seed = 0;
  std::span<const std::string> records;
  std::size_t draws = 0;
  std::uint64_t bootstrap_seed = 0;
};

MetricRow bootstrapped(const RowContext& ctx, const std::string& name, const metrics::IndexMetric& m) {
  MetricRow row{ctx.task, ctx.model, ctx.seed, name, std::nullopt, std::nullopt, std::nullopt, 0};
  try {
    const auto r = metrics::grouped_bootstrap(ctx.records, m, ctx.draws, ctx.bootstrap_seed);
    row.point = r.point;
    row.ci_low = r.ci_low;
    row.ci_high = r.ci_high;
    row.n_valid_draws = r.n_valid;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::CIUndefined) throw;
    std::vector<std::size_t> all(ctx.records.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    row.point = m(all);
  }
  return row;
}

MetricRow undefined_row(const RowContext& ctx, const std::string& name) {
  return {ctx.task, ctx.model, ctx.seed, name, std::nullopt, std::nullopt, std::nullopt, 0};
}

MetricRow point_row(const RowContext& ctx, const std::string& name, double value) {
  return {ctx.task, ctx.model, ctx.seed, name, value, std::nullopt, std::nullopt, 0};
}

std::vector<double> labels_of(std::span<const ingest::StandardizedWindow> ws) {
  std::vector<double> out;
  out.reserve(ws.size());
  for (const auto& w : ws) out.push_back(static_cast<double>(w.cls_label));
  return out;
}

std::vector<std::string> records_of(std::span<const ingest::StandardizedWindow> ws) {
  std::vector<std::string> out;
  out.reserve(ws.size());
  for (const auto& w : ws) out.push_back(w.record_id);
  return out;
}

void add_probability_rows(std::vector<MetricRow>& rows, const RowContext& ctx,
                          const std::vector<double>& probs, const std::vector<double>& labels,
                          std::size_t ece_bins, const std::string& suffix, bool with_ranking) {
  if (with_ranking) {
    rows.push_back(bootstrapped(ctx, "auroc", [&](auto idx) {
      return metrics::auroc(gather(probs, idx), gather(labels, idx));
    }));
    rows.push_back(bootstrapped(ctx, "auprc", [&](auto idx) {
      return metrics::auprc(gather(probs, idx), gather(labels, idx));
    }));
  }
  rows.push_back(bootstrapped(ctx, "brier" + suffix, [&](auto idx) -> MaybeValue {
    return metrics::brier(gather(probs, idx), gather(labels, idx));
  }));
  rows.push_back(bootstrapped(ctx, "ece" + suffix, [&](auto idx) -> MaybeValue {
    return metrics::ece(gather(probs, idx), gather(labels, idx), ece_bins);
  }));
}

void write_reliability(const fs::path& csv, const std::vector<double>& probs,
                       const std::vector<double>& labels, std::size_t bins) {
  std::ofstream out(csv);
  require(out.good(), ErrorKind::Io, "cannot write " + csv.string());
  out << "lower,upper,count,mean_confidence,mean_outcome\n";
  for (const auto& b : metrics::reliability_bins(probs, labels, bins))
    out << fmt::format("{:.12g},{:.12g},{},{:.12g},{:.12g}\n", b.lower, b.upper, b.count,
                       b.mean_confidence, b.mean_outcome);
}

std::vector<MetricRow> evaluate_classifier(const BenchConfig& config, const ingest::WindowedDataset& data,
                                           models::Model& model, const RowContext& base,
                                           const fs::path& run_dir) {
  const auto val = data.split(Split::val);
  const auto test = data.split(Split::test);
  const auto val_raw = models::predict(model, val);
  const auto test_raw = models::predict(model, test);
  const auto val_labels = labels_of(val);
  const auto test_labels = labels_of(test);

  calibration::CalibrationResult cal;
  cal.beta = config.beta;
  cal.temperature = config.calibration ? calibration::fit_temperature(val_raw.logit, val_labels).temperature : 1.0;
  std::optional<double> threshold;
  try {
    threshold = calibration::select_threshold_fbeta(
        calibration::apply_temperature(val_raw.logit, cal.temperature), val_labels, config.beta);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ThresholdUndefined) throw;
  }
  cal.threshold = threshold.value_or(std::nan(""));
  calibration::write_calibration(run_dir / "calibration.json", cal);

  const auto probs = calibration::apply_temperature(test_raw.logit, cal.temperature);
  const auto raw_probs = calibration::apply_temperature(test_raw.logit, 1.0);

  std::vector<MetricRow> rows;
  add_probability_rows(rows, base, probs, test_labels, config.ece_bins, "", true);
  if (threshold) {
    rows.push_back(bootstrapped(base, "f1", [&](auto idx) -> MaybeValue {
      return metrics::f1_at_threshold(gather(probs, idx), gather(test_labels, idx), *threshold);
    }));
  } else {
    rows.push_back(undefined_row(base, "f1"));
  }
  rows.push_back(bootstrapped(base, "prevalence", [&](auto idx) -> MaybeValue {
    return metrics::prevalence(gather(test_labels, idx));
  }));
  add_probability_rows(rows, base, raw_probs, test_labels, config.ece_bins, "_uncalibrated", false);
  write_reliability(run_dir / "reliability.csv", probs, test_labels, config.ece_bins);
  return rows;
}

std::vector<MetricRow> forecast_rows(const RowContext& ctx, const std::vector<double>& mu,
                                     const std::vector<double>& sigma, const std::vector<double>& y) {
  std::vector<MetricRow> rows;
  rows.push_back(bootstrapped(ctx, "mae", [&](auto idx) -> MaybeValue {
    return metrics::mae_rmse(gather(mu, idx), gather(y, idx)).mae;
  }));
  rows.push_back(bootstrapped(ctx, "rmse", [&](auto idx) -> MaybeValue {
    return metrics::mae_rmse(gather(mu, idx), gather(y, idx)).rmse;
  }));
  rows.push_back(bootstrapped(ctx, "crps", [&](auto idx) -> MaybeValue {
    return metrics::mean_crps(gather(mu, idx), gather(sigma, idx), gather(y, idx));
  }));
  return rows;
}

std::vector<MetricRow> evaluate_forecaster(const ingest::WindowedDataset& data, models::Model& model,
                                           TargetMode mode, const RowContext& base) {
  const auto& stats = data.stats();
  const auto test = data.split(Split::test);
  const auto raw = models::predict(model, test);
  std::vector<double> mu, sigma, y;
  for (std::size_t i = 0; i < test.size(); ++i) {
    mu.push_back(stats.denormalize(training::mu_tilde(mode, test[i], raw.delta_mu[i])));
    sigma.push_back(stats.scale_to_bpm(raw.sigma_n[i]));
    y.push_back(test[i].fc_target);
  }
  auto rows = forecast_rows(base, mu, sigma, y);
  const double val_nll =
      training::evaluate_loss(Task::forecasting, model, data.split(Split::val), mode, 1.0);
  rows.push_back(point_row(base, "val_nll", val_nll));
  return rows;
}

std::vector<MetricRow> evaluate_baselines(const BenchConfig& config, const ingest::WindowedDataset& data,
                                          std::uint64_t seed, bool cls, bool fc) {
  const auto test = data.split(Split::test);
  const auto records = records_of(test);
  RowContext ctx;
  ctx.seed = static_cast<std::int64_t>(seed);
  ctx.records = records;
  ctx.draws = config.bootstrap_draws;
  ctx.bootstrap_seed = config.bootstrap_seed + seed;

  std::vector<MetricRow> rows;
  if (cls) {
    ctx.task = "classification";
    ctx.model = "always_negative";
    const auto labels = labels_of(test);
    const auto probs = models::baseline_always_negative(test.size());
    rows.push_back(bootstrapped(ctx, "auroc", [&](auto idx) {
      return metrics::auroc(gather(probs, idx), gather(labels, idx));
    }));
    rows.push_back(bootstrapped(ctx, "auprc", [&](auto idx) {
      return metrics::auprc(gather(probs, idx), gather(labels, idx));
    }));
    rows.push_back(bootstrapped(ctx, "brier", [&](auto idx) -> MaybeValue {
      return metrics::brier(gather(probs, idx), gather(labels, idx));
    }));
    // A constant score has no calibration curve or threshold to speak of.
    rows.push_back(undefined_row(ctx, "ece"));
    rows.push_back(undefined_row(ctx, "f1"));
    rows.push_back(bootstrapped(ctx, "prevalence", [&](auto idx) -> MaybeValue {
      return metrics::prevalence(gather(labels, idx));
    }));
  }
  if (fc) {
    ctx.task = "forecasting";
    ctx.model = "persistence";
    const double scale = std::max(models::persistence_scale(data.split(Split::train)), kPersistenceScaleFloor);
    std::vector<double> mu, sigma, y;
    for (const auto& w : test) {
      mu.push_back(models::baseline_persistence(w));
      sigma.push_back(scale);
      y.push_back(w.fc_target);
    }
    auto more = forecast_rows(ctx, mu, sigma, y);
    rows.insert(rows.end(), more.begin(), more.end());
  }
  return rows;
}

void write_train_log(const fs::path& csv, const std::string& run_id, const training::TrainResult& r) {
  std::ofstream out(csv);
  require(out.good(), ErrorKind::Io, "cannot write " + csv.string());
  out << "run_id,epoch,split,loss\n";
  for (const auto& e : r.history) {
    out << fmt::format("{},{},train,{:.17g}\n", run_id, e.epoch, e.train_loss);
    out << fmt::format("{},{},val,{:.17g}\n", run_id, e.epoch, e.val_loss);
  }
}

nlohmann::ordered_json train_config_json(const training::TrainConfig& t) {
  nlohmann::ordered_json j;
  j["lr"] = t.lr;
  j["batch_size"] = t.batch_size;
  j["epochs"] = t.epochs;
  j["weight_decay"] = t.weight_decay;
  j["eps_prevalence"] = t.eps_prevalence;
  j["target_mode"] = training::to_string(t.target_mode);
  j["beta1"] = t.beta1;
  j["beta2"] = t.beta2;
  j["adam_eps"] = t.adam_eps;
  return j;
}

RunSpec run_from_manifest(const nlohmann::json& j) {
  try {
    RunSpec r;
    r.task = training::task_from_string(j.at("task").get<std::string>());
    r.kind = models::encoder_from_string(j.at("kind").get<std::string>());
    r.width = j.at("width").get<std::size_t>();
    r.target_mode = training::target_mode_from_string(j.at("target_mode").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.sweep = j.at("sweep").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, std::string("run manifest: ") + e.what());
  }
}

std::string fixed4(const MaybeValue& v) { return v ? fmt::format("{:.4f}", *v) : std::string("NA"); }

}  // namespace

// --- runs ----------------------------------------------------------------------

std::string RunSpec::model_label() const {
  std::string label = models::to_string(kind);
  if (sweep) label += fmt::format("_{}{}", kind == models::EncoderKind::grud ? "h" : "d", width);
  if (task == Task::forecasting && target_mode == TargetMode::absolute) label += "_absolute";
  return label;
}

std::string RunSpec::id() const { return fmt::format("{}_{}_s{}", task_short(task), model_label(), seed); }

models::ModelConfig RunSpec::model_config(const BenchConfig& config) const {
  models::ModelConfig mc;
  mc.kind = kind;
  if (kind == models::EncoderKind::grud) {
    mc.grud.hidden_dim = width;
    mc.grud.train_mean = {0.0};  // inputs are standardized on train, so their mean is 0
  } else {
    mc.transformer = config.transformer;
    mc.transformer.d_model = width;
  }
  mc.validate();
  return mc;
}

std::vector<RunSpec> plan_runs(const BenchConfig& config) {
  std::vector<RunSpec> runs;
  for (auto task : config.tasks) {
    for (auto kind : config.kinds) {
      for (auto seed : config.train.seeds) {
        RunSpec r;
        r.task = task;
        r.kind = kind;
        r.width = kind == models::EncoderKind::grud ? config.grud_hidden : config.transformer.d_model;
        r.target_mode = task == Task::forecasting ? config.train.target_mode : TargetMode::residual;
        r.seed = seed;
        runs.push_back(r);
      }
    }
  }
  // Capacity sweep: one extra GRU-D classifier per width, first seed only.
  for (auto width : config.hidden_sweep) {
    RunSpec r;
    r.task = Task::classification;
    r.kind = models::EncoderKind::grud;
    r.width = width;
    r.seed = config.train.seeds.front();
    r.sweep = true;
    runs.push_back(r);
  }
  return runs;
}

// --- commands ------------------------------------------------------------------

SynthSummary cmd_synth(const BenchConfig& config, const Logger& log) {
  config.validate();
  const auto dir = config.resolve(config.synth_dir);
  const auto records = synthesize(config.synth);
  const auto truth = synth_truth(records, config.theta_candidates, config.context_length, config.horizon);
  write_synth(dir, records, truth);
  SynthSummary s{records.size(), truth.n_episodes, dir / "manifest.csv"};
  emit(log, fmt::format("synth: {} records, {} episodes -> {}", s.n_records, s.n_episodes,
                        s.manifest.string()));
  return s;
}

PrepareSummary cmd_prepare(const BenchConfig& config, const Logger& log) {
  config.validate();
  std::vector<ingest::RPeakRecord> records;
  if (!config.peak_table.empty()) {
    records = ingest::read_peak_table(config.resolve(config.peak_table));
  } else {
    require(!config.manifest.empty(), ErrorKind::Config, "set data.manifest or data.peak_table");
    records = ingest::read_manifest(config.resolve(config.manifest));
  }
  const std::set<std::string> excluded(config.exclude.begin(), config.exclude.end());
  std::erase_if(records, [&](const auto& r) { return excluded.count(r.record_id) > 0; });
  require(!records.empty(), ErrorKind::EmptySignal, "no records");

  std::vector<ingest::HrSeries> series;
  series.reserve(records.size());
  for (const auto& r : records) series.push_back(ingest::derive_hr(r));

  const auto guard = ingest::select_threshold(series, config.theta_candidates, config.guard,
                                              config.context_length, config.horizon);
  std::vector<ingest::LabeledWindow> windows;
  std::vector<ingest::RecordFlag> flags;
  for (const auto& s : series) {
    auto ws = ingest::build_windows(s, guard.theta, config.context_length, config.horizon);
    const bool positive = std::any_of(ws.begin(), ws.end(), [](const auto& w) { return w.cls_label == 1; });
    flags.push_back({s.record_id, positive});
    std::move(ws.begin(), ws.end(), std::back_inserter(windows));
  }
  const auto assignment = ingest::split_records(flags, config.ratios, config.split_seed);
  const auto dataset = ingest::standardize(windows, assignment);

  const auto dir = config.resolve(config.prepared_dir);
  make_dir(dir);
  ingest::write_prepared(prepared_windows(config), windows, config.context_length);
  ingest::PreparedMeta meta;
  meta.stats = dataset.stats();
  meta.theta = guard.theta;
  meta.context_length = config.context_length;
  meta.horizon = config.horizon;
  meta.split = assignment;
  ingest::write_meta(prepared_meta(config), meta);

  PrepareSummary s;
  s.theta = guard.theta;
  s.n_records = records.size();
  s.n_windows = guard.n_windows;
  s.n_positive_windows = guard.n_positive_windows;
  s.n_positive_records = guard.n_positive_records;
  for (auto split : {Split::train, Split::val, Split::test})
    s.split_windows[static_cast<int>(split)] = dataset.size(split);
  s.stats = dataset.stats();
  emit(log, fmt::format("prepare: theta = {} bpm, {} records, {} windows, {} positive windows, "
                        "{} positive records",
                        s.theta, s.n_records, s.n_windows, s.n_positive_windows, s.n_positive_records));
  emit(log, fmt::format("prepare: split windows train/val/test = {}/{}/{}, mu = {:.6g}, sigma = {:.6g}",
                        s.split_windows[0], s.split_windows[1], s.split_windows[2], s.stats.mu,
                        s.stats.sigma));
  return s;
}

ingest::WindowedDataset load_prepared(const BenchConfig& config) {
  const auto meta = ingest::read_meta(prepared_meta(config));
  require(meta.context_length == config.context_length && meta.horizon == config.horizon,
          ErrorKind::Config, "prepared data was built with a different window.T / window.H");
  const auto windows = ingest::read_prepared(prepared_windows(config));
  return ingest::WindowedDataset(windows, meta.split, meta.stats);
}

training::TrainResult train_run(const BenchConfig& config, const ingest::WindowedDataset& dataset,
                                const RunSpec& run, const fs::path& runs_dir) {
  const auto id = run.id();
  const auto mc = run.model_config(config);
  models::Model model(mc, run.seed);
  auto tc = config.train;
  tc.target_mode = run.target_mode;

  training::TrainResult result;
  try {
    result = training::train_model(run.task, model, dataset, tc, run.seed);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::TrainingDiverged) throw;
    fail(ErrorKind::TrainingDiverged, fmt::format("run {}: {}", id, e.what()));
  }

  const auto dir = runs_dir / id;
  make_dir(dir);
  ad::save_checkpoint(dir / "checkpoint.json", model.params(), mc.to_json());
  write_train_log(dir / "train_log.csv", id, result);

  nlohmann::ordered_json m;
  m["run_id"] = id;
  m["task"] = training::to_string(run.task);
  m["kind"] = models::to_string(run.kind);
  m["model"] = run.model_label();
  m["width"] = run.width;
  m["target_mode"] = training::to_string(run.target_mode);
  m["seed"] = run.seed;
  m["sweep"] = run.sweep;
  m["model_config"] = mc.to_json();
  m["train"] = train_config_json(tc);
  m["data"] = {{"mu", dataset.stats().mu},
               {"sigma", dataset.stats().sigma},
               {"context_length", config.context_length},
               {"horizon", config.horizon},
               {"train_windows", dataset.size(Split::train)},
               {"val_windows", dataset.size(Split::val)}};
  m["alpha"] = result.alpha;
  m["steps"] = result.steps;
  write_json(dir / "manifest.json", m);
  return result;
}

std::vector<RunSpec> cmd_train(const BenchConfig& config, const Logger& log) {
  config.validate();
  const auto dataset = load_prepared(config);
  const auto runs_dir = config.resolve(config.runs_dir);
  make_dir(runs_dir);
  const auto runs = plan_runs(config);

  std::size_t workers = config.threads ? config.threads : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, runs.size());

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      {
        std::lock_guard lock(mu);
        if (first_error) return;
      }
      try {
        const auto r = train_run(config, dataset, runs[i], runs_dir);
        std::lock_guard lock(mu);
        emit(log, fmt::format("train: {} done, {} steps, final train loss {:.6g}, val loss {:.6g}",
                              runs[i].id(), r.steps, r.history.back().train_loss,
                              r.history.back().val_loss));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  require(dataset.access_count(Split::test) == 0, ErrorKind::ContractViolation,
          "training touched the test split");
  return runs;
}

std::vector<MetricRow> cmd_evaluate(const BenchConfig& config, const fs::path& runs_dir, const Logger& log) {
  config.validate();
  const auto dataset = load_prepared(config);
  require(dataset.size(Split::val) > 0 && dataset.size(Split::test) > 0, ErrorKind::Evaluation,
          "missing split: validation and test must both be non-empty");
  require(fs::is_directory(runs_dir), ErrorKind::Evaluation, "no runs directory " + runs_dir.string());

  std::vector<fs::path> run_dirs;
  for (const auto& entry : fs::directory_iterator(runs_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) run_dirs.push_back(entry.path());
  std::sort(run_dirs.begin(), run_dirs.end());
  require(!run_dirs.empty(), ErrorKind::Evaluation, "no trained runs under " + runs_dir.string());

  const auto test_records = records_of(dataset.split(Split::test));
  std::vector<MetricRow> all;
  std::set<std::uint64_t> cls_seeds, fc_seeds;
  for (const auto& dir : run_dirs) {
    const auto run = run_from_manifest(read_json(dir / "manifest.json"));
    require(fs::exists(dir / "checkpoint.json"), ErrorKind::Evaluation,
            "missing checkpoint in " + dir.string());
    const auto checkpoint = read_json(dir / "checkpoint.json");
    require(checkpoint.contains("config"), ErrorKind::InvalidInput,
            "checkpoint without model config in " + dir.string());
    models::Model model(models::ModelConfig::from_json(checkpoint["config"]), 0);
    ad::load_checkpoint(dir / "checkpoint.json", model.params());

    RowContext ctx;
    ctx.task = training::to_string(run.task);
    ctx.model = run.model_label();
    ctx.seed = static_cast<std::int64_t>(run.seed);
    ctx.records = test_records;
    ctx.draws = config.bootstrap_draws;
    ctx.bootstrap_seed = config.bootstrap_seed + run.seed;

    std::vector<MetricRow> rows;
    if (run.task == Task::classification) {
      rows = evaluate_classifier(config, dataset, model, ctx, dir);
      cls_seeds.insert(run.seed);
    } else {
      rows = evaluate_forecaster(dataset, model, run.target_mode, ctx);
      fc_seeds.insert(run.seed);
    }
    metrics::write_report_csv(dir / "report.csv", rows);
    metrics::write_report_json(dir / "report.json", rows);
    emit(log, fmt::format("evaluate: {} ({} metrics)", run.id(), rows.size()));
    all.insert(all.end(), rows.begin(), rows.end());
  }

  std::set<std::uint64_t> seeds = cls_seeds;
  seeds.insert(fc_seeds.begin(), fc_seeds.end());
  for (auto seed : seeds) {
    const auto rows = evaluate_baselines(config, dataset, seed, cls_seeds.count(seed) > 0,
                                         fc_seeds.count(seed) > 0);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  metrics::write_report_csv(runs_dir / "report.csv", all);
  metrics::write_report_json(runs_dir / "report.json", all);
  emit(log, fmt::format("evaluate: {} rows -> {}", all.size(), (runs_dir / "report.csv").string()));
  return all;
}

std::vector<AggregateRow> aggregate(const std::vector<MetricRow>& rows) {
  std::vector<AggregateRow> out;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> slot;
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.task, r.model, r.metric);
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, out.size()).first;
      out.push_back({r.task, r.model, r.metric, std::nullopt, std::nullopt, 0});
      values.emplace_back();
    }
    if (r.point) values[it->second].push_back(*r.point);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& v = values[i];
    out[i].n_seeds = v.size();
    if (v.empty()) continue;
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    out[i].mean = mean;
    if (v.size() >= 2) {
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      out[i].std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
  }
  return out;
}

std::vector<AggregateRow> cmd_report(const fs::path& runs_dir, const Logger& log) {
  const auto report = runs_dir / "report.csv";
  require(fs::exists(report), ErrorKind::Evaluation, "no evaluated runs: missing " + report.string());
  const auto rows = metrics::read_report_csv(report);
  const auto agg = aggregate(rows);

  {
    std::ofstream out(runs_dir / "summary.csv");
    require(out.good(), ErrorKind::Io, "cannot write summary.csv");
    out << "task,model,metric,mean,std,n_seeds\n";
    for (const auto& a : agg)
      out << fmt::format("{},{},{},{},{},{}\n", a.task, a.model, a.metric, metrics::format_value(a.mean),
                         metrics::format_value(a.std), a.n_seeds);
  }

  auto write_table = [&](const std::string& task, const fs::path& path,
                         const std::vector<std::pair<std::string, std::string>>& columns) {
    std::vector<std::string> model_order;
    std::map<std::pair<std::string, std::string>, const AggregateRow*> cell;
    for (const auto& a : agg) {
      if (a.task != task) continue;
      if (std::find(model_order.begin(), model_order.end(), a.model) == model_order.end())
        model_order.push_back(a.model);
      cell[{a.model, a.metric}] = &a;
    }
    if (model_order.empty()) return;
    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot write " + path.string());
    out << "# mean ± sample std (n-1) of per-seed point estimates\n";
    out << "Method";
    for (const auto& [metric, header] : columns) out << ',' << header;
    out << ",n_seeds\n";
    for (const auto& model : model_order) {
      out << model;
      std::size_t n = 0;
      for (const auto& [metric, header] : columns) {
        const auto it = cell.find({model, metric});
        if (it == cell.end() || !it->second->mean) {
          out << ",NA";
          continue;
        }
        n = std::max(n, it->second->n_seeds);
        out << ',' << fixed4(it->second->mean);
        if (it->second->std) out << " ± " << fixed4(it->second->std);
      }
      out << ',' << n << '\n';
    }
  };
  write_table("classification", runs_dir / "table_classification.csv",
              {{"auroc", "AUROC"}, {"auprc", "AUPRC"}, {"brier", "Brier"}, {"ece", "ECE"},
               {"f1", "F1@thr"}, {"prevalence", "Prev."}});
  write_table("forecasting", runs_dir / "table_forecasting.csv",
              {{"mae", "MAE"}, {"rmse", "RMSE"}, {"crps", "CRPS"}});
  emit(log, fmt::format("report: {} aggregate rows -> {}", agg.size(), (runs_dir / "summary.csv").string()));
  return agg;
}

}  // namespace hrbench::bench
