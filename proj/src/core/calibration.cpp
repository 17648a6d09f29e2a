// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include "calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "autodiff.hpp"
#include "error.hpp"

namespace hrbench::calibration {

namespace {
constexpr double kLogTMin = -2.995732273553991;  // log(0.05)
constexpr double kLogTMax = 2.995732273553991;   // log(20)
constexpr double kLogTTolerance = 1e-4;
}  // namespace

double scaled_bce(std::span<const double> logits, std::span<const double> labels, double temperature) {
  require(logits.size() == labels.size() && !logits.empty(), ErrorKind::Shape,
          "scaled_bce: logits and labels differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double s = logits[i] / temperature;
    total += labels[i] * ad::stable_softplus(-s) + (1.0 - labels[i]) * ad::stable_softplus(s);
  }
  return total / static_cast<double>(logits.size());
}

TemperatureFit fit_temperature(std::span<const double> val_logits, std::span<const double> val_labels) {
  require(val_logits.size() == val_labels.size(), ErrorKind::Shape,
          "fit_temperature: logits and labels differ in length");
  const auto positives = std::count(val_labels.begin(), val_labels.end(), 1.0);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(val_labels.size()))
    return {1.0, true};

  auto objective = [&](double log_t) { return scaled_bce(val_logits, val_labels, std::exp(log_t)); };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = kLogTMin, b = kLogTMax;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = objective(c), fd = objective(d);
  while (b - a > kLogTTolerance) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  double best_log_t = 0.5 * (a + b);
  double best = objective(best_log_t);
  // The bracket ends and T = 1 are candidates too.
  for (double candidate : {kLogTMin, kLogTMax, 0.0}) {
    const double f = objective(candidate);
    if (f < best) {
      best = f;
      best_log_t = candidate;
    }
  }
  return {std::exp(best_log_t), false};
}

std::vector<double> apply_temperature(std::span<const double> logits, double temperature) {
  require(temperature > 0.0, ErrorKind::ContractViolation, "temperature must be > 0");
  std::vector<double> out;
  out.reserve(logits.size());
  for (double s : logits) out.push_back(ad::stable_sigmoid(s / temperature));
  return out;
}

double f_beta(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  const double denom = b2 * precision + recall;
  return denom > 0.0 ? (1.0 + b2) * precision * recall / denom : 0.0;
}

double select_threshold_fbeta(std::span<const double> probs, std::span<const double> labels, double beta) {
  require(probs.size() == labels.size(), ErrorKind::Shape,
          "select_threshold_fbeta: probs and labels differ in length");
  const double total_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1.0));
  require(total_pos > 0, ErrorKind::ThresholdUndefined, "validation set has no positives");

  std::vector<std::size_t> order(probs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return probs[a] > probs[b]; });

  // Walk thresholds from high to low; at each unique probability all examples
  // with p >= tau are predicted positive.
  double best_tau = 1.0;
  double best_f = -1.0;
  auto consider = [&](double tau, double tp, double predicted) {
    const double precision = predicted > 0 ? tp / predicted : 0.0;
    const double recall = tp / total_pos;
    const double f = f_beta(precision, recall, beta);
    if (f > best_f) {  // descending sweep, so strict > keeps the larger tau on ties
      best_f = f;
      best_tau = tau;
    }
  };

  double tp = 0.0, predicted = 0.0;
  {
    // tau = 1: only examples with p >= 1
    for (std::size_t k = 0; k < order.size() && probs[order[k]] >= 1.0; ++k) {
      ++predicted;
      tp += labels[order[k]];
    }
    consider(1.0, tp, predicted);
  }
  std::size_t k = 0;
  tp = 0.0;
  predicted = 0.0;
  while (k < order.size()) {
    const double tau = probs[order[k]];
    while (k < order.size() && probs[order[k]] == tau) {
      ++predicted;
      tp += labels[order[k]];
      ++k;
    }
    if (tau < 1.0) consider(tau, tp, predicted);
  }
  consider(0.0, total_pos, static_cast<double>(probs.size()));
  return best_tau;
}

void write_calibration(const std::filesystem::path& json, const CalibrationResult& result) {
  nlohmann::ordered_json j;
  j["temperature"] = result.temperature;
  j["threshold"] = result.threshold;
  j["beta"] = result.beta;
  std::ofstream out(json);
  require(out.good(), ErrorKind::Io, "cannot write " + json.string());
  out << j.dump(2) << '\n';
}

CalibrationResult read_calibration(const std::filesystem::path& json) {
  std::ifstream in(json);
  require(in.good(), ErrorKind::Io, "cannot open " + json.string());
  try {
    nlohmann::json j;
    in >> j;
    return {j.at("temperature").get<double>(), j.at("threshold").get<double>(),
            j.at("beta").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, json.string() + ": " + e.what());
  }
}

}  // namespace hrbench::calibration
