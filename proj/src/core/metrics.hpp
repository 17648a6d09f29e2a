// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors
//
// Classification and probabilistic-forecast scores, plus confidence
// intervals from resampling whole records.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hrbench::metrics {

/// A metric value, or nullopt when the metric is undefined on the input
/// (e.g. AUROC with a single class). Reported as "NA".
using MaybeValue = std::optional<double>;

/// Mann-Whitney statistic with tied pairs counted as 1/2.
MaybeValue auroc(std::span<const double> probs, std::span<const double> labels);

/// Average precision: sum over distinct thresholds of (R_k - R_{k-1}) * P_k.
MaybeValue auprc(std::span<const double> probs, std::span<const double> labels);

double brier(std::span<const double> probs, std::span<const double> labels);

/// Equal-width bins on [0,1], left-closed / right-open except the last bin.
double ece(std::span<const double> probs, std::span<const double> labels, std::size_t n_bins = 10);

struct ReliabilityBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double mean_outcome = 0.0;
};
std::vector<ReliabilityBin> reliability_bins(std::span<const double> probs,
                                             std::span<const double> labels, std::size_t n_bins = 10);

/// Predicted positive when p >= tau. Returns 0 without predicted positives.
double f1_at_threshold(std::span<const double> probs, std::span<const double> labels, double tau);

double prevalence(std::span<const double> labels);

struct PointErrors {
  double mae = 0.0;
  double rmse = 0.0;
};
PointErrors mae_rmse(std::span<const double> mu, std::span<const double> targets);

double normal_pdf(double z);
double normal_cdf(double z);

/// Closed-form CRPS of N(mu, sigma^2) at y. Throws ContractViolation for sigma <= 0.
double crps_gaussian(double mu, double sigma, double y);
double mean_crps(std::span<const double> mu, std::span<const double> sigma,
                 std::span<const double> targets);

// --- grouped bootstrap ------------------------------------------------------------

/// Metric evaluated on a multiset of example indices.
using IndexMetric = std::function<MaybeValue(std::span<const std::size_t>)>;

struct BootstrapResult {
  MaybeValue point;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_valid = 0;
  std::size_t n_draws = 0;
};

/// Linear-interpolated percentile (q in [0,1]) of an ascending sample.
double percentile_sorted(std::span<const double> sorted, double q);

/// Resamples record ids with replacement; each draw concatenates all
/// examples of the drawn records (duplicates included) and recomputes the
/// metric. Undefined draws are skipped and counted. Draw k uses an RNG
/// seeded from (seed, k), so the result does not depend on evaluation order.
/// Throws CIUndefined if no draw yields a value.
BootstrapResult grouped_bootstrap(std::span<const std::string> record_of_example,
                                  const IndexMetric& metric, std::size_t draws,
                                  std::uint64_t seed, double lower_q = 0.025,
                                  double upper_q = 0.975);

// --- reports -------------------------------------------------------------------

struct MetricRow {
  std::string task;
  std::string model;
  std::int64_t seed = 0;
  std::string metric;
  MaybeValue point;
  MaybeValue ci_low;
  MaybeValue ci_high;
  std::size_t n_valid_draws = 0;
};

inline constexpr const char* kReportHeader = "task,model,seed,metric,point,ci_low,ci_high,n_valid_draws";

std::string format_value(const MaybeValue& v);

/// CSV `task,model,seed,metric,point,ci_low,ci_high,n_valid_draws`.
void write_report_csv(const std::filesystem::path& csv, std::span<const MetricRow> rows);
/// JSON array mirroring the CSV rows; NA becomes null.
void write_report_json(const std::filesystem::path& json, std::span<const MetricRow> rows);
std::vector<MetricRow> read_report_csv(const std::filesystem::path& csv);

}  // namespace hrbench::metrics
