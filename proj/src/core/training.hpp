// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "ingest.hpp"
#include "models.hpp"

namespace hrbench::training {

enum class Task { classification, forecasting };
enum class TargetMode { residual, absolute };

const char* to_string(Task task) noexcept;
const char* to_string(TargetMode mode) noexcept;
Task task_from_string(const std::string& name);
TargetMode target_mode_from_string(const std::string& name);

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 6;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  double weight_decay = 0.01;
  double eps_prevalence = 1e-6;
  TargetMode target_mode = TargetMode::residual;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct AdamWState {
  std::vector<ad::Tensor> first_moment;
  std::vector<ad::Tensor> second_moment;
  std::uint64_t step = 0;

  static AdamWState zeros_like(const ad::ParameterStore& params);
};

struct AdamWHyper {
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One AdamW update from the gradients currently stored on the parameters.
/// Weight decay is applied to the weights directly (decoupled), before the
/// bias-corrected moment step.
void adamw_step(ad::ParameterStore& params, AdamWState& state, const AdamWHyper& hyper);

/// alpha = (1 - p) / max(p, eps)
double positive_class_weight(double prevalence, double eps);

/// Mean of alpha*y*softplus(-s) + (1-y)*softplus(s), i.e. the class-weighted
/// cross-entropy written in its overflow-free form.
ad::Var weighted_bce(ad::Var logits, std::span<const double> labels, double alpha);

/// (1/2N) sum ((y - mu)/sigma)^2 + (1/N) sum log sigma. No 2*pi constant.
ad::Var gaussian_nll(ad::Var mu_tilde, ad::Var sigma_n, std::span<const double> targets);

/// Scalar helpers for evaluation without a tape.
double weighted_bce_value(std::span<const double> logits, std::span<const double> labels,
                          double alpha);
double gaussian_nll_value(std::span<const double> mu_tilde, std::span<const double> sigma_n,
                          std::span<const double> targets);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t steps = 0;
  double alpha = 1.0;
};

/// Seeded mini-batch AdamW over the train split for the configured number of
/// epochs; returns final-epoch weights in `model`. Throws TrainingDiverged on
/// a non-finite loss.
TrainResult train_model(Task task, models::Model& model, const ingest::WindowedDataset& dataset,
                        const TrainConfig& config, std::uint64_t seed);

/// Loss of `model` on a set of windows with the training objective for `task`.
double evaluate_loss(Task task, models::Model& model,
                     std::span<const ingest::StandardizedWindow> windows, TargetMode mode,
                     double alpha);

/// Normalized predictive mean for a window given the head's delta output.
inline double mu_tilde(TargetMode mode, const ingest::StandardizedWindow& w, double delta_mu) {
  return mode == TargetMode::residual ? w.last_norm() + delta_mu : delta_mu;
}

}  // namespace hrbench::training
