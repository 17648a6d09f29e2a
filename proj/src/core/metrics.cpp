// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "error.hpp"
#include "text.hpp"

namespace hrbench::metrics {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* what) {
  require(a.size() == b.size(), ErrorKind::Shape, fmt::format("{}: inputs differ in length", what));
}

}  // namespace

MaybeValue auroc(std::span<const double> probs, std::span<const double> labels) {
  check_lengths(probs, labels, "auroc");
  const std::size_t n = probs.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return probs[a] < probs[b]; });

  double n_pos = 0.0, rank_sum = 0.0;
  for (std::size_t k = 0; k < n;) {
    std::size_t j = k;
    while (j < n && probs[order[j]] == probs[order[k]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(k + 1 + j);  // mean of ranks k+1..j
    for (std::size_t m = k; m < j; ++m)
      if (labels[order[m]] == 1.0) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    k = j;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

MaybeValue auprc(std::span<const double> probs, std::span<const double> labels) {
  check_lengths(probs, labels, "auprc");
  const double total_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1.0));
  if (total_pos == 0.0) return std::nullopt;
  std::vector<std::size_t> order(probs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return probs[a] > probs[b]; });

  double tp = 0.0, predicted = 0.0, prev_recall = 0.0, ap = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    const double tau = probs[order[k]];
    while (k < order.size() && probs[order[k]] == tau) {
      tp += labels[order[k]];
      ++predicted;
      ++k;
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return ap;
}

double brier(std::span<const double> probs, std::span<const double> labels) {
  check_lengths(probs, labels, "brier");
  require(!probs.empty(), ErrorKind::Shape, "brier: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) total += (probs[i] - labels[i]) * (probs[i] - labels[i]);
  return total / static_cast<double>(probs.size());
}

std::vector<ReliabilityBin> reliability_bins(std::span<const double> probs,
                                             std::span<const double> labels, std::size_t n_bins) {
  check_lengths(probs, labels, "reliability_bins");
  require(n_bins >= 1, ErrorKind::InvalidInput, "ece needs at least one bin");
  std::vector<ReliabilityBin> bins(n_bins);
  std::vector<double> conf(n_bins, 0.0), acc(n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].lower = static_cast<double>(b) / static_cast<double>(n_bins);
    bins[b].upper = static_cast<double>(b + 1) / static_cast<double>(n_bins);
  }
  for (std::size_t i = 0; i < probs.size(); ++i) {
    auto b = static_cast<std::size_t>(std::floor(probs[i] * static_cast<double>(n_bins)));
    b = std::min(b, n_bins - 1);
    ++bins[b].count;
    conf[b] += probs[i];
    acc[b] += labels[i];
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (bins[b].count == 0) continue;
    bins[b].mean_confidence = conf[b] / static_cast<double>(bins[b].count);
    bins[b].mean_outcome = acc[b] / static_cast<double>(bins[b].count);
  }
  return bins;
}

double ece(std::span<const double> probs, std::span<const double> labels, std::size_t n_bins) {
  require(!probs.empty(), ErrorKind::Shape, "ece: empty input");
  const auto bins = reliability_bins(probs, labels, n_bins);
  double total = 0.0;
  for (const auto& b : bins)
    total += static_cast<double>(b.count) * std::abs(b.mean_outcome - b.mean_confidence);
  return total / static_cast<double>(probs.size());
}

double f1_at_threshold(std::span<const double> probs, std::span<const double> labels, double tau) {
  check_lengths(probs, labels, "f1_at_threshold");
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool predicted = probs[i] >= tau;
    const bool actual = labels[i] == 1.0;
    tp += (predicted && actual) ? 1.0 : 0.0;
    fp += (predicted && !actual) ? 1.0 : 0.0;
    fn += (!predicted && actual) ? 1.0 : 0.0;
  }
  if (tp + fp == 0.0) return 0.0;
  const double precision = tp / (tp + fp);
  const double recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

double prevalence(std::span<const double> labels) {
  require(!labels.empty(), ErrorKind::Shape, "prevalence: empty input");
  double total = 0.0;
  for (double y : labels) total += y;
  return total / static_cast<double>(labels.size());
}

PointErrors mae_rmse(std::span<const double> mu, std::span<const double> targets) {
  check_lengths(mu, targets, "mae_rmse");
  require(!mu.empty(), ErrorKind::Shape, "mae_rmse: empty input");
  double abs_total = 0.0, sq_total = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double e = mu[i] - targets[i];
    abs_total += std::abs(e);
    sq_total += e * e;
  }
  const auto n = static_cast<double>(mu.size());
  return {abs_total / n, std::sqrt(sq_total / n)};
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double crps_gaussian(double mu, double sigma, double y) {
  require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::ContractViolation,
          "crps_gaussian: sigma must be > 0");
  const double z = (y - mu) / sigma;
  return sigma * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) - std::numbers::inv_sqrtpi);
}

double mean_crps(std::span<const double> mu, std::span<const double> sigma, std::span<const double> targets) {
  check_lengths(mu, targets, "mean_crps");
  check_lengths(sigma, targets, "mean_crps");
  require(!mu.empty(), ErrorKind::Shape, "mean_crps: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) total += crps_gaussian(mu[i], sigma[i], targets[i]);
  return total / static_cast<double>(mu.size());
}

double percentile_sorted(std::span<const double> sorted, double q) {
  require(!sorted.empty(), ErrorKind::InvalidInput, "percentile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BootstrapResult grouped_bootstrap(std::span<const std::string> record_of_example,
                                  const IndexMetric& metric, std::size_t draws, std::uint64_t seed,
                                  double lower_q, double upper_q) {
  require(!record_of_example.empty(), ErrorKind::InvalidInput, "bootstrap needs at least one record");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < record_of_example.size(); ++i) groups[record_of_example[i]].push_back(i);
  std::vector<const std::vector<std::size_t>*> members;
  for (const auto& [id, idx] : groups) members.push_back(&idx);

  std::vector<std::size_t> all(record_of_example.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  BootstrapResult result;
  result.point = metric(all);
  result.n_draws = draws;

  std::vector<double> values;
  values.reserve(draws);
  std::vector<std::size_t> sample;
  std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
  for (std::size_t k = 0; k < draws; ++k) {
    const auto k64 = static_cast<std::uint64_t>(k);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k64), static_cast<std::uint32_t>(k64 >> 32)};
    std::mt19937_64 rng(seq);
    sample.clear();
    for (std::size_t r = 0; r < members.size(); ++r) {
      const auto& idx = *members[pick(rng)];
      sample.insert(sample.end(), idx.begin(), idx.end());
    }
    if (const auto v = metric(sample)) values.push_back(*v);
    pick.reset();
  }
  result.n_valid = values.size();
  require(!values.empty(), ErrorKind::CIUndefined, "metric undefined on every bootstrap draw");
  std::sort(values.begin(), values.end());
  result.ci_low = percentile_sorted(values, lower_q);
  result.ci_high = percentile_sorted(values, upper_q);
  return result;
}

// --- reports -------------------------------------------------------------------

std::string format_value(const MaybeValue& v) {
  return v ? fmt::format("{:.12g}", *v) : std::string("NA");
}

void write_report_csv(const std::filesystem::path& csv, std::span<const MetricRow> rows) {
  std::ofstream out(csv);
  require(out.good(), ErrorKind::Io, "cannot write " + csv.string());
  out << kReportHeader << '\n';
  for (const auto& r : rows)
    out << fmt::format("{},{},{},{},{},{},{},{}\n", r.task, r.model, r.seed, r.metric,
                       format_value(r.point), format_value(r.ci_low), format_value(r.ci_high),
                       r.n_valid_draws);
}

void write_report_json(const std::filesystem::path& json, std::span<const MetricRow> rows) {
  auto value = [](const MaybeValue& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["task"] = r.task;
    j["model"] = r.model;
    j["seed"] = r.seed;
    j["metric"] = r.metric;
    j["point"] = value(r.point);
    j["ci_low"] = value(r.ci_low);
    j["ci_high"] = value(r.ci_high);
    j["n_valid_draws"] = r.n_valid_draws;
    arr.push_back(std::move(j));
  }
  std::ofstream out(json);
  require(out.good(), ErrorKind::Io, "cannot write " + json.string());
  out << arr.dump(2) << '\n';
}

std::vector<MetricRow> read_report_csv(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  require(in.good(), ErrorKind::Io, "cannot open report " + csv.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && text::trim(line) == kReportHeader,
          ErrorKind::InvalidInput, "unexpected report header in " + csv.string());
  auto maybe = [](std::string_view s) -> MaybeValue {
    if (s == "NA") return std::nullopt;
    return text::parse_double(s);
  };
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto c = text::split(trimmed, ',');
    require(c.size() == 8, ErrorKind::InvalidInput, "malformed report row: " + std::string(trimmed));
    MetricRow r;
    r.task = std::string(c[0]);
    r.model = std::string(c[1]);
    r.seed = std::stoll(std::string(c[2]));
    r.metric = std::string(c[3]);
    r.point = maybe(c[4]);
    r.ci_low = maybe(c[5]);
    r.ci_high = maybe(c[6]);
    r.n_valid_draws = std::stoull(std::string(c[7]));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace hrbench::metrics
