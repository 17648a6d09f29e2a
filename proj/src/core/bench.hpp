// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors
//
// Pipeline commands behind the `bench` CLI.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "config.hpp"
#include "ingest.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "training.hpp"

namespace hrbench::bench {

using Logger = std::function<void(const std::string&)>;

struct PrepareSummary {
  double theta = 0.0;
  std::size_t n_records = 0;
  std::size_t n_windows = 0;
  std::size_t n_positive_windows = 0;
  std::size_t n_positive_records = 0;
  std::size_t split_windows[3] = {0, 0, 0};
  ingest::StandardizationStats stats;
};

struct SynthSummary {
  std::size_t n_records = 0;
  std::size_t n_episodes = 0;
  std::filesystem::path manifest;
};

/// One cell of the training grid.
struct RunSpec {
  training::Task task = training::Task::classification;
  models::EncoderKind kind = models::EncoderKind::grud;
  std::size_t width = 64;  // GRU-D hidden size or Transformer d_model
  training::TargetMode target_mode = training::TargetMode::residual;
  std::uint64_t seed = 0;
  bool sweep = false;  // capacity-sweep extra run

  /// e.g. "grud", "transformer_absolute", "grud_h32".
  std::string model_label() const;
  /// e.g. "cls_grud_s0".
  std::string id() const;
  models::ModelConfig model_config(const BenchConfig& config) const;
};

std::vector<RunSpec> plan_runs(const BenchConfig& config);

/// Loads the prepared dataset written by cmd_prepare.
ingest::WindowedDataset load_prepared(const BenchConfig& config);

SynthSummary cmd_synth(const BenchConfig& config, const Logger& log = {});
PrepareSummary cmd_prepare(const BenchConfig& config, const Logger& log = {});

/// Trains every run of the grid into `runs_dir/<run id>/`. Runs are spread
/// over worker threads; each run owns its model and RNG.
std::vector<RunSpec> cmd_train(const BenchConfig& config, const Logger& log = {});

/// Trains a single run; exposed for tests.
training::TrainResult train_run(const BenchConfig& config, const ingest::WindowedDataset& dataset,
                                const RunSpec& run, const std::filesystem::path& runs_dir);

/// Scores every trained run under runs_dir plus the baselines, writing a
/// per-run report and `runs_dir/report.{csv,json}`.
std::vector<metrics::MetricRow> cmd_evaluate(const BenchConfig& config,
                                             const std::filesystem::path& runs_dir,
                                             const Logger& log = {});

struct AggregateRow {
  std::string task;
  std::string model;
  std::string metric;
  metrics::MaybeValue mean;
  metrics::MaybeValue std;  // sample (n - 1); NA below two seeds
  std::size_t n_seeds = 0;
};

/// Mean and sample std of the per-seed points; NA points are left out.
std::vector<AggregateRow> aggregate(const std::vector<metrics::MetricRow>& rows);

/// Reads runs_dir/report.csv and writes summary.csv plus the two tables.
std::vector<AggregateRow> cmd_report(const std::filesystem::path& runs_dir, const Logger& log = {});

}  // namespace hrbench::bench
