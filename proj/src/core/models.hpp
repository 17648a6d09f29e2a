// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors
//
// GRU-D and compact Transformer encoders over a fixed context, the shared
// classification / forecast heads, and the non-learned baselines.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autodiff.hpp"
#include "ingest.hpp"

namespace hrbench::models {

enum class EncoderKind { grud, transformer };

const char* to_string(EncoderKind kind) noexcept;
EncoderKind encoder_from_string(const std::string& name);

struct GrudConfig {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 64;
  std::vector<double> train_mean{0.0};  // x-bar, normalized units
};

struct TransformerConfig {
  std::size_t d_model = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_dim = 256;
  std::size_t max_len = 512;
  bool layer_norm = true;  // post-norm after each residual add
};

struct ModelConfig {
  EncoderKind kind = EncoderKind::grud;
  GrudConfig grud;
  TransformerConfig transformer;

  std::size_t hidden_size() const;
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Inputs laid out as [batch][step][feature]. mask is 1 where observed and
/// delta is the time since the last observation (>= 0).
struct SequenceBatch {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::size_t features = 1;
  std::vector<double> x;
  std::vector<double> mask;
  std::vector<double> delta;

  std::size_t at(std::size_t b, std::size_t t, std::size_t f = 0) const {
    return (b * steps + t) * features + f;
  }
  /// Fully observed univariate batch: mask = 1, delta = 0.
  static SequenceBatch observed(std::size_t batch, std::size_t steps, std::vector<double> values);
  static SequenceBatch from_windows(std::span<const ingest::StandardizedWindow* const> windows);
};

struct HeadOutputs {
  ad::Var logit;     // s, (B x 1)
  ad::Var delta_mu;  // normalized residual mean, (B x 1)
  ad::Var sigma_n;   // normalized scale >= 1e-4, (B x 1)
};

inline constexpr double kSigmaFloor = 1e-4;

/// Captures attention weight matrices (one per window, head and layer).
struct AttentionProbe {
  std::vector<ad::Tensor> weights;
};

struct TransformerOptions {
  // The final layer only needs queries for the last position of each window.
  bool last_query_only = true;
  AttentionProbe* probe = nullptr;
};

void init_grud_params(ad::ParameterStore& store, const GrudConfig& cfg, std::uint64_t seed);
void init_transformer_params(ad::ParameterStore& store, const TransformerConfig& cfg,
                             std::uint64_t seed);
void init_head_params(ad::ParameterStore& store, std::size_t hidden, std::uint64_t seed);

/// Returns h_T as a (B x hidden) matrix.
ad::Var grud_forward(ad::Tape& tape, const GrudConfig& cfg, ad::ParameterStore& params,
                     const SequenceBatch& batch);

/// Returns the final-layer state at the last position, (B x d_model).
ad::Var transformer_forward(ad::Tape& tape, const TransformerConfig& cfg,
                            ad::ParameterStore& params, const SequenceBatch& batch,
                            const TransformerOptions& options = {});

HeadOutputs heads_forward(ad::Tape& tape, ad::ParameterStore& params, ad::Var h_last);

/// Sinusoidal position table, (steps x d_model).
ad::Tensor sinusoidal_positions(std::size_t steps, std::size_t d_model);

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ad::ParameterStore& params() { return params_; }
  const ad::ParameterStore& params() const { return params_; }

  ad::Var encode(ad::Tape& tape, const SequenceBatch& batch,
                 const TransformerOptions& options = {});
  HeadOutputs forward(ad::Tape& tape, const SequenceBatch& batch);

 private:
  ModelConfig config_;
  ad::ParameterStore params_;
};

struct RawPredictions {
  std::vector<double> logit;
  std::vector<double> delta_mu;
  std::vector<double> sigma_n;
};

/// Forward pass over windows in fixed-size chunks, no gradients kept.
RawPredictions predict(Model& model, std::span<const ingest::StandardizedWindow> windows,
                       std::size_t chunk = 128);

// --- baselines ---------------------------------------------------------------

/// Constant probability 0 for every window.
std::vector<double> baseline_always_negative(std::size_t n);

/// Next = last, in bpm.
double baseline_persistence(const ingest::StandardizedWindow& window);

/// Population std of (target - last) over the training windows, in bpm; used
/// as the Gaussian scale when scoring persistence with CRPS.
double persistence_scale(std::span<const ingest::StandardizedWindow> train);

}  // namespace hrbench::models
