// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ingest.hpp"
#include "models.hpp"
#include "training.hpp"

namespace hrbench::bench {

/// Clipped AR(1) heart rate with injected tachycardia episodes.
struct SynthSpec {
  std::size_t n_records = 20;
  std::size_t length_s = 1800;
  double base_hr = 75.0;
  double base_spread_bpm = 5.0;  // per-record base drawn from base_hr +/- spread
  double ar_coef = 0.95;
  double noise_bpm = 1.0;   // AR(1) innovation std
  double jitter_bpm = 8.0;  // white beat-to-beat variability
  double episode_rate_per_hour = 2.0;
  double episode_min_s = 60.0;
  double episode_max_s = 240.0;
  double amplitude_bpm = 45.0;
  double ramp_s = 20.0;
  double ectopic_rate = 0.0;  // probability that a given second carries an isolated spike
  double ectopic_bpm = 30.0;  // spike size, sign drawn at random
  std::uint64_t seed = 0;
};

/// Every tunable of the benchmark. Loaded from an INI-style file with
/// [sections] and `key = value` lines; relative paths resolve against the
/// file's directory.
struct BenchConfig {
  std::filesystem::path base_dir = ".";

  // [data]
  std::filesystem::path manifest;
  std::filesystem::path peak_table;
  std::filesystem::path prepared_dir = "prepared";
  std::filesystem::path runs_dir = "runs";
  std::vector<std::string> exclude;

  // [window]
  std::size_t context_length = ingest::kContextLength;
  std::size_t horizon = ingest::kHorizon;
  std::vector<double> theta_candidates = ingest::kThetaCandidates;
  ingest::GuardRequirements guard;

  // [split]
  ingest::SplitRatios ratios;
  std::uint64_t split_seed = 0;

  // [model]
  std::vector<models::EncoderKind> kinds{models::EncoderKind::grud, models::EncoderKind::transformer};
  std::vector<training::Task> tasks{training::Task::classification, training::Task::forecasting};
  std::size_t grud_hidden = 64;
  std::vector<std::size_t> hidden_sweep;
  models::TransformerConfig transformer;

  // [train]
  training::TrainConfig train;
  std::size_t threads = 0;  // 0 = hardware concurrency

  // [eval]
  bool calibration = true;
  double beta = 2.0;
  std::size_t ece_bins = 10;
  std::size_t bootstrap_draws = 1000;
  std::uint64_t bootstrap_seed = 0;

  // [synth]
  std::filesystem::path synth_dir = "synth";
  SynthSpec synth;

  static BenchConfig load(const std::filesystem::path& path);
  static BenchConfig parse(const std::string& text, const std::filesystem::path& base_dir);

  /// Overrides one setting by dotted key, e.g. set("train.epochs", "3").
  void set(const std::string& key, const std::string& value);
  void validate() const;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

}  // namespace hrbench::bench
