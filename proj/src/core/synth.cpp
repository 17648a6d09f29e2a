// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "error.hpp"

namespace hrbench::bench {

namespace fs = std::filesystem;

namespace {

// Trapezoid: linear rise over `ramp`, plateau, linear fall over `ramp`.
double envelope(const Episode& e, double ramp, double t) {
  const double end = e.start_s + e.duration_s;
  if (t < e.start_s || t > end + ramp) return 0.0;
  if (ramp <= 0.0) return t <= end ? 1.0 : 0.0;
  if (t < e.start_s + ramp) return (t - e.start_s) / ramp;
  if (t <= end) return 1.0;
  return 1.0 - (t - end) / ramp;
}

}  // namespace

std::vector<double> hr_to_peaks(std::span<const double> hr_per_second) {
  std::vector<double> peaks{0.0};
  double phase = 0.0;  // beats since t = 0
  for (std::size_t t = 0; t < hr_per_second.size(); ++t) {
    const double rate = hr_per_second[t] / 60.0;  // beats per second
    require(rate > 0.0, ErrorKind::InvalidInput, "hr_to_peaks: rate must be positive");
    const double next_phase = phase + rate;
    for (double k = std::floor(phase) + 1.0; k <= next_phase; k += 1.0)
      peaks.push_back(static_cast<double>(t) + (k - phase) / rate);
    phase = next_phase;
  }
  return peaks;
}

std::vector<SynthRecord> synthesize(const SynthSpec& spec) {
  std::vector<SynthRecord> out;
  out.reserve(spec.n_records);
  const double length = static_cast<double>(spec.length_s);
  for (std::size_t r = 0; r < spec.n_records; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    SynthRecord rec;
    rec.record_id = fmt::format("syn{:03d}", r);
    const double base = spec.base_hr + spec.base_spread_bpm * (2.0 * unit(rng) - 1.0);

    std::poisson_distribution<int> count(spec.episode_rate_per_hour * length / 3600.0);
    const int n_episodes = count(rng);
    for (int i = 0; i < n_episodes; ++i) {
      Episode e;
      e.start_s = length * unit(rng);
      e.duration_s = spec.episode_min_s + (spec.episode_max_s - spec.episode_min_s) * unit(rng);
      rec.episodes.push_back(e);
    }
    std::sort(rec.episodes.begin(), rec.episodes.end(),
              [](const Episode& a, const Episode& b) { return a.start_s < b.start_s; });

    const double phi = spec.ar_coef;
    double a = spec.noise_bpm / std::sqrt(1.0 - phi * phi) * normal(rng);  // stationary start
    rec.hr.resize(spec.length_s);
    for (std::size_t t = 0; t < spec.length_s; ++t) {
      if (t > 0) a = phi * a + spec.noise_bpm * normal(rng);
      double bump = 0.0;
      for (const auto& e : rec.episodes)
        bump = std::max(bump, envelope(e, spec.ramp_s, static_cast<double>(t)));
      double value = base + a + spec.amplitude_bpm * bump + spec.jitter_bpm * normal(rng);
      if (unit(rng) < spec.ectopic_rate) value += unit(rng) < 0.5 ? -spec.ectopic_bpm : spec.ectopic_bpm;
      rec.hr[t] = std::clamp(value, ingest::kHrMin, ingest::kHrMax);
    }
    rec.peaks = hr_to_peaks(rec.hr);
    out.push_back(std::move(rec));
  }
  return out;
}

SynthTruth synth_truth(std::span<const SynthRecord> records, std::span<const double> thetas,
                       std::size_t context_length, std::size_t horizon) {
  SynthTruth truth;
  for (const auto& r : records) truth.n_episodes += r.episodes.size();
  for (double theta : thetas) {
    ingest::ThresholdGuardResult counts;
    counts.theta = theta;
    for (const auto& r : records) {
      const ingest::HrSeries series{r.record_id, 0, r.hr};
      std::size_t positives = 0;
      for (const auto& w : ingest::build_windows(series, theta, context_length, horizon)) {
        ++counts.n_windows;
        positives += static_cast<std::size_t>(w.cls_label);
      }
      counts.n_positive_windows += positives;
      counts.n_positive_records += positives > 0 ? 1 : 0;
    }
    truth.by_theta[theta] = counts;
  }
  return truth;
}

void write_synth(const fs::path& dir, std::span<const SynthRecord> records, const SynthTruth& truth) {
  std::error_code ec;
  fs::create_directories(dir / "peaks", ec);
  require(!ec, ErrorKind::Io, "cannot create " + (dir / "peaks").string());

  std::ofstream manifest(dir / "manifest.csv");
  require(manifest.good(), ErrorKind::Io, "cannot write " + (dir / "manifest.csv").string());
  manifest << "record_id,path\n";
  for (const auto& r : records) {
    const auto rel = fs::path("peaks") / (r.record_id + ".txt");
    ingest::write_peak_file(dir / rel, r.peaks);
    manifest << r.record_id << ',' << rel.generic_string() << '\n';
  }

  nlohmann::ordered_json j;
  j["n_records"] = records.size();
  j["n_episodes"] = truth.n_episodes;
  auto& per = j["thresholds"] = nlohmann::ordered_json::array();
  for (const auto& [theta, c] : truth.by_theta) {
    per.push_back({{"theta", theta},
                   {"windows", c.n_windows},
                   {"positive_windows", c.n_positive_windows},
                   {"positive_records", c.n_positive_records}});
  }
  std::ofstream out(dir / "truth.json");
  require(out.good(), ErrorKind::Io, "cannot write " + (dir / "truth.json").string());
  out << j.dump(2) << '\n';
}

}  // namespace hrbench::bench
