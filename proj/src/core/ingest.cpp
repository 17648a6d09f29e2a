// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include "ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "error.hpp"
#include "text.hpp"

namespace hrbench::ingest {

namespace fs = std::filesystem;

const char* to_string(Split split) noexcept {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  fail(ErrorKind::InvalidInput, "unknown split '" + name + "'");
}

Split SplitAssignment::at(const std::string& record_id) const {
  auto it = by_record.find(record_id);
  require(it != by_record.end(), ErrorKind::InvalidInput,
          "record '" + record_id + "' has no split assignment");
  return it->second;
}

std::vector<std::string> SplitAssignment::records_in(Split split) const {
  std::vector<std::string> out;
  for (const auto& [id, s] : by_record)
    if (s == split) out.push_back(id);
  return out;
}

HrSeries derive_hr(const RPeakRecord& record) {
  const auto& t = record.peak_times;
  require(t.size() >= 2, ErrorKind::EmptySignal,
          "record '" + record.record_id + "' has " + std::to_string(t.size()) +
              " peaks; at least 2 are needed to form an RR interval");
  for (std::size_t i = 0; i < t.size(); ++i) {
    require(std::isfinite(t[i]) && t[i] >= 0.0, ErrorKind::InvalidInput,
            "record '" + record.record_id + "' has an invalid peak time");
    if (i > 0)
      require(t[i] > t[i - 1], ErrorKind::InvalidInput,
              "record '" + record.record_id + "' peak times are not strictly increasing");
  }

  HrSeries series;
  series.record_id = record.record_id;
  const auto first = static_cast<std::int64_t>(std::ceil(t.front()));
  series.start_second = first;

  std::size_t i = 0;
  for (std::int64_t second = first; static_cast<double>(second) < t.back(); ++second) {
    const auto s = static_cast<double>(second);
    while (t[i + 1] <= s) ++i;
    const double rr = t[i + 1] - t[i];
    series.hr.push_back(std::clamp(60.0 / rr, kHrMin, kHrMax));
  }
  return series;
}

std::vector<LabeledWindow> build_windows(const HrSeries& series, double theta,
                                         std::size_t context_length, std::size_t horizon) {
  require(std::isfinite(theta), ErrorKind::InvalidInput, "theta must be finite");
  require(context_length > 0 && horizon > 0, ErrorKind::InvalidInput,
          "context length and horizon must be positive");
  std::vector<LabeledWindow> out;
  const auto& hr = series.hr;
  for (std::size_t offset = 0; offset + context_length + horizon <= hr.size();
       offset += context_length) {
    LabeledWindow w;
    w.record_id = series.record_id;
    w.start_index = static_cast<std::int64_t>(offset);
    w.context.assign(hr.begin() + offset, hr.begin() + offset + context_length);
    const auto future = hr.begin() + offset + context_length;
    const double horizon_mean =
        std::accumulate(future, future + horizon, 0.0) / static_cast<double>(horizon);
    w.cls_label = horizon_mean >= theta ? 1 : 0;
    w.fc_target = *future;
    out.push_back(std::move(w));
  }
  return out;
}

ThresholdGuardResult select_threshold(std::span<const HrSeries> corpus,
                                      std::span<const double> candidates,
                                      GuardRequirements guard, std::size_t context_length,
                                      std::size_t horizon) {
  require(!corpus.empty(), ErrorKind::InvalidInput, "no records");
  require(!candidates.empty(), ErrorKind::InvalidInput, "no threshold candidates");

  std::vector<ThresholdGuardResult> tried;
  for (double theta : candidates) {
    ThresholdGuardResult r;
    r.theta = theta;
    for (const auto& series : corpus) {
      const auto windows = build_windows(series, theta, context_length, horizon);
      const auto positives = static_cast<std::size_t>(std::count_if(
          windows.begin(), windows.end(), [](const auto& w) { return w.cls_label == 1; }));
      r.n_windows += windows.size();
      r.n_positive_windows += positives;
      if (positives > 0) ++r.n_positive_records;
    }
    if (r.n_positive_records >= guard.min_positive_records &&
        r.n_positive_windows >= guard.min_positive_windows)
      return r;
    tried.push_back(r);
  }

  const auto best = std::max_element(tried.begin(), tried.end(), [](const auto& a, const auto& b) {
    return std::tie(a.n_positive_windows, a.n_positive_records) <
           std::tie(b.n_positive_windows, b.n_positive_records);
  });
  fail(ErrorKind::GuardUnsatisfied,
       fmt::format("no threshold candidate yields >= {} positive records and >= {} positive "
                   "windows; best was theta={} with {} positive records / {} positive windows",
                   guard.min_positive_records, guard.min_positive_windows, best->theta,
                   best->n_positive_records, best->n_positive_windows));
}

namespace {

// Largest-remainder apportionment of n items across the three ratios.
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = ratios[k] * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-12));
    remainders[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  while (assigned < n) {
    std::size_t pick = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (remainders[k] > remainders[pick] + 1e-12) pick = k;
    ++counts[pick];
    remainders[pick] = -1.0;
    ++assigned;
  }
  return counts;
}

}  // namespace

SplitAssignment split_records(std::span<const RecordFlag> records, SplitRatios ratios,
                              std::uint64_t seed) {
  require(records.size() >= 3, ErrorKind::SplitInfeasible,
          fmt::format("need at least 3 records to split, got {}", records.size()));
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  for (double v : r)
    require(std::isfinite(v) && v >= 0.0, ErrorKind::InvalidInput, "split ratios must be >= 0");
  require(std::abs(r[0] + r[1] + r[2] - 1.0) < 1e-9, ErrorKind::InvalidInput,
          "split ratios must sum to 1");

  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  std::set<std::string> seen;
  for (const auto& rec : records) {
    require(seen.insert(rec.record_id).second, ErrorKind::InvalidInput,
            "duplicate record id '" + rec.record_id + "'");
    (rec.positive ? positives : negatives).push_back(rec.record_id);
  }
  std::sort(positives.begin(), positives.end());
  std::sort(negatives.begin(), negatives.end());

  std::mt19937_64 rng(seed);
  std::shuffle(positives.begin(), positives.end(), rng);
  std::shuffle(negatives.begin(), negatives.end(), rng);

  SplitAssignment out;
  auto assign_group = [&](const std::vector<std::string>& ids, bool stratify) {
    auto counts = apportion(ids.size(), r);
    if (stratify && ids.size() >= 3) {
      for (std::size_t k = 0; k < 3; ++k) {
        while (counts[k] == 0) {
          const auto donor = static_cast<std::size_t>(
              std::max_element(counts.begin(), counts.end()) - counts.begin());
          --counts[donor];
          ++counts[k];
        }
      }
    }
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t j = 0; j < counts[k]; ++j)
        out.by_record[ids[cursor++]] = static_cast<Split>(k);
  };
  assign_group(positives, true);
  assign_group(negatives, false);
  return out;
}

StandardizationStats fit_stats(std::span<const LabeledWindow> windows,
                               const SplitAssignment& assignment) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& w : windows) {
    if (assignment.at(w.record_id) != Split::train) continue;
    for (double x : w.context) sum += x;
    n += w.context.size();
  }
  require(n > 0, ErrorKind::ContractViolation, "training split contains no windows");
  const double mu = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& w : windows) {
    if (assignment.at(w.record_id) != Split::train) continue;
    for (double x : w.context) ss += (x - mu) * (x - mu);
  }
  const double sigma = std::sqrt(ss / static_cast<double>(n));
  require(sigma > 0.0, ErrorKind::DegenerateScale,
          "training contexts are constant; standard deviation is zero");
  return {mu, sigma};
}

WindowedDataset::WindowedDataset(std::span<const LabeledWindow> windows,
                                 SplitAssignment assignment, StandardizationStats stats)
    : assignment_(std::move(assignment)), stats_(stats) {
  for (const auto& w : windows) {
    require(!w.context.empty(), ErrorKind::InvalidInput, "window with empty context");
    if (context_length_ == 0) context_length_ = w.context.size();
    require(w.context.size() == context_length_, ErrorKind::InvalidInput,
            "windows have inconsistent context lengths");
    StandardizedWindow s;
    s.record_id = w.record_id;
    s.start_index = w.start_index;
    s.cls_label = w.cls_label;
    s.fc_target = w.fc_target;
    s.context = w.context;
    s.context_norm.reserve(w.context.size());
    for (double x : w.context) s.context_norm.push_back(stats_.normalize(x));
    s.target_norm = stats_.normalize(w.fc_target);
    s.residual_norm = s.target_norm - s.context_norm.back();
    splits_[index(assignment_.at(w.record_id))].push_back(std::move(s));
  }
}

WindowedDataset::WindowedDataset(const WindowedDataset& other)
    : splits_(other.splits_),
      assignment_(other.assignment_),
      stats_(other.stats_),
      context_length_(other.context_length_) {}

std::span<const StandardizedWindow> WindowedDataset::split(Split which) const {
  accesses_[index(which)].fetch_add(1);
  return splits_[index(which)];
}

void WindowedDataset::reset_access_log() const {
  for (auto& a : accesses_) a.store(0);
}

WindowedDataset standardize(std::span<const LabeledWindow> windows,
                            const SplitAssignment& assignment) {
  return WindowedDataset(windows, assignment, fit_stats(windows, assignment));
}

// --- file formats ---------------------------------------------------------

namespace {

std::vector<double> read_peak_file(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open peak file " + path.string());
  std::vector<double> peaks;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto value = text::parse_double(trimmed);
    require(value.has_value(), ErrorKind::InvalidInput,
            fmt::format("{}:{}: not a number: '{}'", path.string(), lineno, trimmed));
    peaks.push_back(*value);
  }
  return peaks;
}

}  // namespace

std::vector<RPeakRecord> read_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  require(in.good(), ErrorKind::Io, "cannot open manifest " + manifest.string());
  std::vector<RPeakRecord> records;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto cells = text::split(trimmed, ',');
    if (first && cells.size() == 2 && text::trim(cells[0]) == "record_id") {
      first = false;
      continue;
    }
    first = false;
    require(cells.size() == 2, ErrorKind::InvalidInput,
            "manifest line must be 'record_id,path': " + std::string(trimmed));
    fs::path p = std::string(text::trim(cells[1]));
    if (p.is_relative()) p = manifest.parent_path() / p;
    records.push_back({std::string(text::trim(cells[0])), read_peak_file(p)});
  }
  return records;
}

std::vector<RPeakRecord> read_peak_table(const fs::path& csv) {
  std::ifstream in(csv);
  require(in.good(), ErrorKind::Io, "cannot open peak table " + csv.string());
  std::vector<RPeakRecord> records;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto cells = text::split(trimmed, ',');
    require(cells.size() == 2, ErrorKind::InvalidInput,
            "peak table line must be 'record_id,peak_time': " + std::string(trimmed));
    const auto time = text::parse_double(text::trim(cells[1]));
    if (first && !time) {  // header
      first = false;
      continue;
    }
    first = false;
    require(time.has_value(), ErrorKind::InvalidInput, "bad peak time: " + std::string(trimmed));
    const std::string id(text::trim(cells[0]));
    if (records.empty() || records.back().record_id != id) {
      for (const auto& r : records)
        require(r.record_id != id, ErrorKind::InvalidInput,
                "peak table is not grouped by record_id ('" + id + "' reappears)");
      records.push_back({id, {}});
    }
    records.back().peak_times.push_back(*time);
  }
  return records;
}

void write_peak_file(const fs::path& path, std::span<const double> peaks) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  for (double t : peaks) out << fmt::format("{}\n", t);
}

void write_prepared(const fs::path& csv, std::span<const LabeledWindow> windows,
                    std::size_t context_length) {
  std::ofstream out(csv);
  require(out.good(), ErrorKind::Io, "cannot write " + csv.string());
  out << "record_id,start_index,cls_label,fc_target";
  for (std::size_t i = 0; i < context_length; ++i) out << ",ctx_" << i;
  out << '\n';
  for (const auto& w : windows) {
    require(w.context.size() == context_length, ErrorKind::InvalidInput,
            "window context length mismatch");
    out << fmt::format("{},{},{},{}", w.record_id, w.start_index, w.cls_label, w.fc_target);
    for (double x : w.context) out << fmt::format(",{}", x);
    out << '\n';
  }
}

std::vector<LabeledWindow> read_prepared(const fs::path& csv) {
  std::ifstream in(csv);
  require(in.good(), ErrorKind::Io, "cannot open prepared dataset " + csv.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::InvalidInput,
          "prepared dataset is empty");
  const auto header = text::split(text::trim(line), ',');
  require(header.size() > 4 && header[0] == "record_id", ErrorKind::InvalidInput,
          "unexpected prepared dataset header");
  const std::size_t context_length = header.size() - 4;

  std::vector<LabeledWindow> out;
  while (std::getline(in, line)) {
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto cells = text::split(trimmed, ',');
    require(cells.size() == header.size(), ErrorKind::InvalidInput,
            "prepared dataset row has wrong column count");
    LabeledWindow w;
    w.record_id = std::string(cells[0]);
    w.start_index = std::stoll(std::string(cells[1]));
    w.cls_label = std::stoi(std::string(cells[2]));
    const auto target = text::parse_double(cells[3]);
    require(target.has_value(), ErrorKind::InvalidInput, "bad fc_target");
    w.fc_target = *target;
    w.context.reserve(context_length);
    for (std::size_t i = 0; i < context_length; ++i) {
      const auto v = text::parse_double(cells[4 + i]);
      require(v.has_value(), ErrorKind::InvalidInput, "bad context value");
      w.context.push_back(*v);
    }
    out.push_back(std::move(w));
  }
  return out;
}

void write_meta(const fs::path& json, const PreparedMeta& meta) {
  nlohmann::ordered_json j;
  j["mu"] = meta.stats.mu;
  j["sigma"] = meta.stats.sigma;
  j["theta"] = meta.theta;
  j["T"] = meta.context_length;
  j["H"] = meta.horizon;
  auto& split = j["split"];
  split = nlohmann::ordered_json::object();
  for (const auto& [id, s] : meta.split.by_record) split[id] = to_string(s);
  std::ofstream out(json);
  require(out.good(), ErrorKind::Io, "cannot write " + json.string());
  out << j.dump(2) << '\n';
}

PreparedMeta read_meta(const fs::path& json) {
  std::ifstream in(json);
  require(in.good(), ErrorKind::Io, "cannot open " + json.string());
  nlohmann::json j;
  try {
    in >> j;
    PreparedMeta meta;
    meta.stats.mu = j.at("mu").get<double>();
    meta.stats.sigma = j.at("sigma").get<double>();
    meta.theta = j.at("theta").get<double>();
    meta.context_length = j.at("T").get<std::size_t>();
    meta.horizon = j.at("H").get<std::size_t>();
    for (const auto& [id, s] : j.at("split").items())
      meta.split.by_record[id] = split_from_string(s.get<std::string>());
    return meta;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, json.string() + ": " + e.what());
  }
}

}  // namespace hrbench::ingest
