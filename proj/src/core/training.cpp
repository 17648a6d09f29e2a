// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include "training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "error.hpp"

namespace hrbench::training {

using ad::Tape;
using ad::Tensor;
using ad::Var;

const char* to_string(Task task) noexcept {
  return task == Task::classification ? "classification" : "forecasting";
}

const char* to_string(TargetMode mode) noexcept {
  return mode == TargetMode::residual ? "residual" : "absolute";
}

Task task_from_string(const std::string& name) {
  if (name == "classification" || name == "cls") return Task::classification;
  if (name == "forecasting" || name == "fc") return Task::forecasting;
  fail(ErrorKind::Config, "unknown task '" + name + "'");
}

TargetMode target_mode_from_string(const std::string& name) {
  if (name == "residual") return TargetMode::residual;
  if (name == "absolute") return TargetMode::absolute;
  fail(ErrorKind::Config, "unknown target mode '" + name + "' (expected residual or absolute)");
}

void TrainConfig::validate() const {
  require(lr > 0.0, ErrorKind::Config, "lr must be > 0");
  require(epochs >= 1, ErrorKind::Config, "epochs must be >= 1");
  require(batch_size >= 1, ErrorKind::Config, "batch_size must be >= 1");
  require(eps_prevalence > 0.0, ErrorKind::Config, "eps_prevalence must be > 0");
  require(weight_decay >= 0.0, ErrorKind::Config, "weight_decay must be >= 0");
  require(!seeds.empty(), ErrorKind::Config, "at least one seed is required");
}

AdamWState AdamWState::zeros_like(const ad::ParameterStore& params) {
  AdamWState s;
  for (const auto& p : params.all()) {
    s.first_moment.emplace_back(p.value.shape(), std::vector<double>(p.value.size(), 0.0));
    s.second_moment.emplace_back(p.value.shape(), std::vector<double>(p.value.size(), 0.0));
  }
  return s;
}

void adamw_step(ad::ParameterStore& params, AdamWState& state, const AdamWHyper& hyper) {
  auto& all = params.all();
  require(state.first_moment.size() == all.size() && state.second_moment.size() == all.size(),
          ErrorKind::ContractViolation, "AdamW state does not match the parameter set");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);
  const double decay = 1.0 - hyper.lr * hyper.weight_decay;
  for (std::size_t k = 0; k < all.size(); ++k) {
    auto& p = all[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    require(m.same_shape(p.value) && p.grad.same_shape(p.value), ErrorKind::ContractViolation,
            "AdamW moment shape mismatch for '" + p.name + "'");
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
      const double m_hat = bc1 > 0.0 ? m[i] / bc1 : m[i];
      const double v_hat = bc2 > 0.0 ? v[i] / bc2 : v[i];
      p.value[i] *= decay;
      p.value[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
  }
}

double positive_class_weight(double prevalence, double eps) {
  return (1.0 - prevalence) / std::max(prevalence, eps);
}

Var weighted_bce(Var logits, std::span<const double> labels, double alpha) {
  require(logits.value().size() == labels.size(), ErrorKind::Shape,
          "weighted_bce: logits and labels differ in length");
  require(alpha > 0.0, ErrorKind::ContractViolation, "weighted_bce: alpha must be > 0");
  Tape& tape = *logits.tape();
  Tensor pos(logits.value().shape(), std::vector<double>(labels.size()));
  Tensor neg(logits.value().shape(), std::vector<double>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] == 0.0 || labels[i] == 1.0, ErrorKind::ContractViolation,
            "weighted_bce: labels must be 0 or 1");
    pos[i] = alpha * labels[i];
    neg[i] = 1.0 - labels[i];
  }
  // -log sigma(s) = softplus(-s), -log(1 - sigma(s)) = softplus(s)
  const Var terms = tape.constant(std::move(pos)) * ad::softplus(-logits) +
                    tape.constant(std::move(neg)) * ad::softplus(logits);
  return ad::mean(terms);
}

Var gaussian_nll(Var mu_tilde, Var sigma_n, std::span<const double> targets) {
  require(mu_tilde.value().size() == targets.size() && sigma_n.value().size() == targets.size(),
          ErrorKind::Shape, "gaussian_nll: inputs differ in length");
  Tape& tape = *mu_tilde.tape();
  const Var y = tape.constant(Tensor(mu_tilde.value().shape(),
                                     std::vector<double>(targets.begin(), targets.end())));
  const Var z = (y - mu_tilde) / sigma_n;
  return ad::mean(z * z) * 0.5 + ad::mean(ad::log(sigma_n));
}

double weighted_bce_value(std::span<const double> logits, std::span<const double> labels,
                          double alpha) {
  require(logits.size() == labels.size() && !logits.empty(), ErrorKind::Shape,
          "weighted_bce_value: bad input lengths");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    total += alpha * labels[i] * ad::stable_softplus(-logits[i]) +
             (1.0 - labels[i]) * ad::stable_softplus(logits[i]);
  return total / static_cast<double>(logits.size());
}

double gaussian_nll_value(std::span<const double> mu_tilde, std::span<const double> sigma_n,
                          std::span<const double> targets) {
  require(mu_tilde.size() == targets.size() && sigma_n.size() == targets.size() && !targets.empty(),
          ErrorKind::Shape, "gaussian_nll_value: bad input lengths");
  double sq = 0.0, logs = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double z = (targets[i] - mu_tilde[i]) / sigma_n[i];
    sq += z * z;
    logs += std::log(sigma_n[i]);
  }
  const auto n = static_cast<double>(targets.size());
  return 0.5 * sq / n + logs / n;
}

namespace {

Var batch_loss(Task task, models::Model& model, Tape& tape,
               std::span<const ingest::StandardizedWindow* const> batch, TargetMode mode,
               double alpha) {
  const auto heads = model.forward(tape, models::SequenceBatch::from_windows(batch));
  if (task == Task::classification) {
    std::vector<double> labels;
    labels.reserve(batch.size());
    for (const auto* w : batch) labels.push_back(static_cast<double>(w->cls_label));
    return weighted_bce(heads.logit, labels, alpha);
  }
  std::vector<double> targets;
  targets.reserve(batch.size());
  for (const auto* w : batch) targets.push_back(w->target_norm);
  Var mu = heads.delta_mu;
  if (mode == TargetMode::residual) {
    std::vector<double> last;
    last.reserve(batch.size());
    for (const auto* w : batch) last.push_back(w->last_norm());
    mu = tape.constant(Tensor::column(std::move(last))) + mu;
  }
  return gaussian_nll(mu, heads.sigma_n, targets);
}

}  // namespace

double evaluate_loss(Task task, models::Model& model,
                     std::span<const ingest::StandardizedWindow> windows, TargetMode mode,
                     double alpha) {
  require(!windows.empty(), ErrorKind::ContractViolation, "evaluate_loss on an empty split");
  const auto raw = models::predict(model, windows);
  if (task == Task::classification) {
    std::vector<double> labels;
    for (const auto& w : windows) labels.push_back(static_cast<double>(w.cls_label));
    return weighted_bce_value(raw.logit, labels, alpha);
  }
  std::vector<double> mu, targets;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    mu.push_back(mu_tilde(mode, windows[i], raw.delta_mu[i]));
    targets.push_back(windows[i].target_norm);
  }
  return gaussian_nll_value(mu, raw.sigma_n, targets);
}

TrainResult train_model(Task task, models::Model& model, const ingest::WindowedDataset& dataset,
                        const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  const auto train = dataset.split(ingest::Split::train);
  require(!train.empty(), ErrorKind::ContractViolation, "training split is empty");

  TrainResult result;
  if (task == Task::classification) {
    const double positives = static_cast<double>(std::count_if(
        train.begin(), train.end(), [](const auto& w) { return w.cls_label == 1; }));
    result.alpha = positive_class_weight(positives / static_cast<double>(train.size()),
                                         config.eps_prevalence);
  }

  std::vector<const ingest::StandardizedWindow*> order;
  order.reserve(train.size());
  for (const auto& w : train) order.push_back(&w);

  std::seed_seq shuffle_seed{seed, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(shuffle_seed);
  auto state = AdamWState::zeros_like(model.params());
  const AdamWHyper hyper{config.lr, config.weight_decay, config.beta1, config.beta2, config.adam_eps};

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const ingest::StandardizedWindow* const> batch(order.data() + start, end - start);

      model.params().zero_grad();
      Tape tape;
      const Var loss = batch_loss(task, model, tape, batch, config.target_mode, result.alpha);
      const double value = loss.value().item();
      if (!std::isfinite(value))
        fail(ErrorKind::TrainingDiverged,
             fmt::format("non-finite loss at step {} (epoch {})", result.steps, epoch));
      tape.backward(loss);
      adamw_step(model.params(), state, hyper);
      ++result.steps;
      weighted_total += value * static_cast<double>(batch.size());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = weighted_total / static_cast<double>(order.size());
    const auto val = dataset.split(ingest::Split::val);
    rec.val_loss = val.empty() ? std::nan("")
                               : evaluate_loss(task, model, val, config.target_mode, result.alpha);
    result.history.push_back(rec);
  }
  return result;
}

}  // namespace hrbench::training
