// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors
//
// Synthetic R-peak corpus for running the whole pipeline without access to
// clinical recordings.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "config.hpp"
#include "ingest.hpp"

namespace hrbench::bench {

struct Episode {
  double start_s = 0.0;
  double duration_s = 0.0;
};

struct SynthRecord {
  std::string record_id;
  std::vector<double> hr;     // ground-truth rate for each second [t, t+1)
  std::vector<double> peaks;  // R-peak times implied by hr
  std::vector<Episode> episodes;
};

/// Per-theta window counts computed on the ground-truth HR.
struct SynthTruth {
  std::size_t n_episodes = 0;
  std::map<double, ingest::ThresholdGuardResult> by_theta;
};

/// Record r is generated from an RNG seeded with (spec.seed, r), so records
/// are independent of each other and of n_records.
std::vector<SynthRecord> synthesize(const SynthSpec& spec);

/// Peaks at every integer crossing of the beat phase, integrating a rate
/// that is constant within each second. The first peak sits at t = 0.
std::vector<double> hr_to_peaks(std::span<const double> hr_per_second);

SynthTruth synth_truth(std::span<const SynthRecord> records, std::span<const double> thetas,
                       std::size_t context_length, std::size_t horizon);

/// Writes `manifest.csv`, `peaks/<id>.txt` and `truth.json` under dir.
void write_synth(const std::filesystem::path& dir, std::span<const SynthRecord> records,
                 const SynthTruth& truth);

}  // namespace hrbench::bench
