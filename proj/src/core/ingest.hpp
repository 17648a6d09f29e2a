// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors
//
// Heart-rate series from R-peak timestamps, windowing, label-threshold guard,
// record-level splits and standardization.

#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace hrbench::ingest {

inline constexpr double kHrMin = 20.0;
inline constexpr double kHrMax = 220.0;
inline constexpr std::size_t kContextLength = 60;
inline constexpr std::size_t kHorizon = 10;
inline const std::vector<double> kThetaCandidates{100.0, 95.0, 90.0, 85.0};

struct RPeakRecord {
  std::string record_id;
  std::vector<double> peak_times;  // seconds, strictly increasing
};

/// Per-second HR for one record. hr[i] is the rate at second start_second + i.
struct HrSeries {
  std::string record_id;
  std::int64_t start_second = 0;
  std::vector<double> hr;
};

struct LabeledWindow {
  std::string record_id;
  std::int64_t start_index = 0;  // offset into HrSeries::hr
  int cls_label = 0;
  double fc_target = 0.0;
  std::vector<double> context;
};

struct StandardizationStats {
  double mu = 0.0;
  double sigma = 1.0;

  double normalize(double bpm) const { return (bpm - mu) / sigma; }
  double denormalize(double value) const { return sigma * value + mu; }
  double scale_to_bpm(double sigma_n) const { return sigma * sigma_n; }
};

enum class Split { train = 0, val = 1, test = 2 };

const char* to_string(Split split) noexcept;
Split split_from_string(const std::string& name);

struct SplitAssignment {
  std::map<std::string, Split> by_record;

  Split at(const std::string& record_id) const;
  std::vector<std::string> records_in(Split split) const;
};

struct ThresholdGuardResult {
  double theta = 0.0;
  std::size_t n_windows = 0;
  std::size_t n_positive_windows = 0;
  std::size_t n_positive_records = 0;
};

struct GuardRequirements {
  std::size_t min_positive_records = 3;
  std::size_t min_positive_windows = 40;
};

struct RecordFlag {
  std::string record_id;
  bool positive = false;
};

struct SplitRatios {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

/// Piecewise-constant HR over each RR interval, sampled at integer seconds
/// t with first_peak <= t < last_peak. Throws EmptySignal for < 2 peaks.
HrSeries derive_hr(const RPeakRecord& record);

/// Non-overlapping contexts at stride T; a window needs T + H samples.
std::vector<LabeledWindow> build_windows(const HrSeries& series, double theta,
                                         std::size_t context_length = kContextLength,
                                         std::size_t horizon = kHorizon);

/// First candidate (in the given order) meeting both positive-support guards.
ThresholdGuardResult select_threshold(std::span<const HrSeries> corpus,
                                      std::span<const double> candidates = kThetaCandidates,
                                      GuardRequirements guard = {},
                                      std::size_t context_length = kContextLength,
                                      std::size_t horizon = kHorizon);

/// Stratified record split: positives and negatives are shuffled and
/// apportioned separately; with >= 3 positives each split gets at least one.
SplitAssignment split_records(std::span<const RecordFlag> records, SplitRatios ratios,
                              std::uint64_t seed);

struct StandardizedWindow {
  std::string record_id;
  std::int64_t start_index = 0;
  int cls_label = 0;
  double fc_target = 0.0;            // bpm
  std::vector<double> context;       // bpm
  std::vector<double> context_norm;  // (x - mu) / sigma
  double target_norm = 0.0;          // normalized y^fc
  double residual_norm = 0.0;        // target_norm - context_norm.back()

  double last_norm() const { return context_norm.back(); }
  double last_bpm() const { return context.back(); }
};

/// Windows grouped by split. Every split read goes through split(), which
/// counts accesses so callers can prove test data was not touched early.
class WindowedDataset {
 public:
  WindowedDataset(std::span<const LabeledWindow> windows, SplitAssignment assignment,
                  StandardizationStats stats);
  WindowedDataset(const WindowedDataset& other);
  WindowedDataset& operator=(const WindowedDataset&) = delete;

  std::span<const StandardizedWindow> split(Split which) const;
  std::size_t size(Split which) const { return splits_[index(which)].size(); }
  std::size_t access_count(Split which) const { return accesses_[index(which)].load(); }
  void reset_access_log() const;

  const StandardizationStats& stats() const { return stats_; }
  const SplitAssignment& assignment() const { return assignment_; }
  std::size_t context_length() const { return context_length_; }

 private:
  static std::size_t index(Split s) { return static_cast<std::size_t>(s); }

  std::array<std::vector<StandardizedWindow>, 3> splits_;
  SplitAssignment assignment_;
  StandardizationStats stats_;
  std::size_t context_length_ = 0;
  mutable std::array<std::atomic<std::size_t>, 3> accesses_{};
};

/// Fits mu/sigma (population) on train-split contexts and transforms every split.
/// Throws DegenerateScale when the train contexts are constant.
WindowedDataset standardize(std::span<const LabeledWindow> windows,
                            const SplitAssignment& assignment);

StandardizationStats fit_stats(std::span<const LabeledWindow> windows,
                               const SplitAssignment& assignment);

// --- file formats ---------------------------------------------------------

/// Manifest CSV `record_id,path` (header optional); each path holds one peak
/// time in seconds per line. Relative paths resolve against the manifest.
std::vector<RPeakRecord> read_manifest(const std::filesystem::path& manifest);

/// Single CSV `record_id,peak_time`, sorted by (record_id, peak_time).
std::vector<RPeakRecord> read_peak_table(const std::filesystem::path& csv);

void write_peak_file(const std::filesystem::path& path, std::span<const double> peaks);

struct PreparedMeta {
  StandardizationStats stats;
  double theta = 0.0;
  std::size_t context_length = kContextLength;
  std::size_t horizon = kHorizon;
  SplitAssignment split;
};

/// CSV `record_id,start_index,cls_label,fc_target,ctx_0..ctx_{T-1}` in bpm.
void write_prepared(const std::filesystem::path& csv, std::span<const LabeledWindow> windows,
                    std::size_t context_length);
std::vector<LabeledWindow> read_prepared(const std::filesystem::path& csv);

/// Sidecar JSON `{mu, sigma, theta, T, H, split:{record_id: split}}`.
void write_meta(const std::filesystem::path& json, const PreparedMeta& meta);
PreparedMeta read_meta(const std::filesystem::path& json);

}  // namespace hrbench::ingest
