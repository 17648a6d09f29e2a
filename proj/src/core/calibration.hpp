// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace hrbench::calibration {

struct TemperatureFit {
  double temperature = 1.0;
  bool skipped = false;  // validation had a single class; temperature left at 1
};

struct CalibrationResult {
  double temperature = 1.0;
  double threshold = 0.5;
  double beta = 2.0;
};

/// Mean BCE of sigmoid(logit / temperature) against labels.
double scaled_bce(std::span<const double> logits, std::span<const double> labels,
                  double temperature);

/// Golden-section search on log T over [log 0.05, log 20]; the result is
/// never worse on the validation objective than T = 1.
TemperatureFit fit_temperature(std::span<const double> val_logits, std::span<const double> val_labels);

std::vector<double> apply_temperature(std::span<const double> logits, double temperature);

/// F-beta from precision and recall; 0 when both are 0.
double f_beta(double precision, double recall, double beta);

/// Sweeps the unique predicted probabilities plus {0, 1}; predicted positive
/// means p >= tau. Ties go to the larger tau. Throws ThresholdUndefined when
/// there are no positives.
double select_threshold_fbeta(std::span<const double> probs, std::span<const double> labels,
                              double beta = 2.0);

void write_calibration(const std::filesystem::path& json, const CalibrationResult& result);
CalibrationResult read_calibration(const std::filesystem::path& json);

}  // namespace hrbench::calibration
