// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include "models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "error.hpp"

namespace hrbench::models {

using ad::Parameter;
using ad::ParameterStore;
using ad::Tape;
using ad::Tensor;
using ad::Var;

const char* to_string(EncoderKind kind) noexcept {
  return kind == EncoderKind::grud ? "grud" : "transformer";
}

EncoderKind encoder_from_string(const std::string& name) {
  if (name == "grud" || name == "gru-d" || name == "gru_d") return EncoderKind::grud;
  if (name == "transformer") return EncoderKind::transformer;
  fail(ErrorKind::Config, "unknown model kind '" + name + "'");
}

std::size_t ModelConfig::hidden_size() const {
  return kind == EncoderKind::grud ? grud.hidden_dim : transformer.d_model;
}

void ModelConfig::validate() const {
  if (kind == EncoderKind::grud) {
    require(grud.hidden_dim > 0, ErrorKind::Config, "GRU-D hidden_dim must be > 0");
    require(grud.input_dim > 0, ErrorKind::Config, "GRU-D input_dim must be > 0");
    require(grud.train_mean.size() == grud.input_dim, ErrorKind::Config,
            "GRU-D train_mean must have input_dim entries");
  } else {
    const auto& t = transformer;
    require(t.d_model > 0 && t.heads > 0 && t.d_model % t.heads == 0, ErrorKind::Config,
            "d_model must be divisible by heads");
    require(t.layers > 0 && t.ffn_dim > 0 && t.max_len > 0, ErrorKind::Config,
            "transformer layers, ffn_dim and max_len must be > 0");
  }
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = to_string(kind);
  if (kind == EncoderKind::grud) {
    j["input_dim"] = grud.input_dim;
    j["hidden_dim"] = grud.hidden_dim;
    j["train_mean"] = grud.train_mean;
  } else {
    j["d_model"] = transformer.d_model;
    j["layers"] = transformer.layers;
    j["heads"] = transformer.heads;
    j["ffn_dim"] = transformer.ffn_dim;
    j["max_len"] = transformer.max_len;
    j["layer_norm"] = transformer.layer_norm;
  }
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.kind = encoder_from_string(j.at("kind").get<std::string>());
    if (c.kind == EncoderKind::grud) {
      c.grud.input_dim = j.at("input_dim").get<std::size_t>();
      c.grud.hidden_dim = j.at("hidden_dim").get<std::size_t>();
      c.grud.train_mean = j.at("train_mean").get<std::vector<double>>();
    } else {
      c.transformer.d_model = j.at("d_model").get<std::size_t>();
      c.transformer.layers = j.at("layers").get<std::size_t>();
      c.transformer.heads = j.at("heads").get<std::size_t>();
      c.transformer.ffn_dim = j.at("ffn_dim").get<std::size_t>();
      c.transformer.max_len = j.at("max_len").get<std::size_t>();
      c.transformer.layer_norm = j.at("layer_norm").get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

SequenceBatch SequenceBatch::observed(std::size_t batch, std::size_t steps,
                                      std::vector<double> values) {
  require(values.size() == batch * steps, ErrorKind::Shape, "batch values do not match batch x steps");
  SequenceBatch out;
  out.batch = batch;
  out.steps = steps;
  out.features = 1;
  out.x = std::move(values);
  out.mask.assign(out.x.size(), 1.0);
  out.delta.assign(out.x.size(), 0.0);
  return out;
}

SequenceBatch SequenceBatch::from_windows(std::span<const ingest::StandardizedWindow* const> windows) {
  require(!windows.empty(), ErrorKind::Shape, "empty window batch");
  const std::size_t steps = windows.front()->context_norm.size();
  std::vector<double> values;
  values.reserve(windows.size() * steps);
  for (const auto* w : windows) {
    require(w->context_norm.size() == steps, ErrorKind::Shape, "windows differ in context length");
    values.insert(values.end(), w->context_norm.begin(), w->context_norm.end());
  }
  return observed(windows.size(), steps, std::move(values));
}

namespace {

void add_weight(ParameterStore& store, const std::string& name, std::size_t rows, std::size_t cols,
                std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (auto& v : t.data()) v = dist(rng);
  store.add(name, std::move(t));
}

void add_constant(ParameterStore& store, const std::string& name, std::size_t cols, double value) {
  store.add(name, Tensor(1, cols, value));
}

void grud_params(ParameterStore& s, const GrudConfig& c, std::mt19937_64& rng) {
  const std::size_t d = c.input_dim, h = c.hidden_dim;
  add_weight(s, "grud.w_gamma_x", d, d, rng);
  add_weight(s, "grud.w_gamma_h", d, h, rng);
  add_weight(s, "grud.w_z", 2 * d, h, rng);
  add_constant(s, "grud.b_z", h, 0.0);
  add_weight(s, "grud.w_ih", h, 3 * h, rng);
  add_constant(s, "grud.b_ih", 3 * h, 0.0);
  add_weight(s, "grud.w_hh", h, 3 * h, rng);
  add_constant(s, "grud.b_hh", 3 * h, 0.0);
}

std::string layer_key(std::size_t layer, const char* name) {
  return fmt::format("tf.l{}.{}", layer, name);
}

void transformer_params(ParameterStore& s, const TransformerConfig& c, std::mt19937_64& rng) {
  const std::size_t d = c.d_model, f = c.ffn_dim;
  add_weight(s, "tf.w_in", 1, d, rng);
  for (std::size_t l = 0; l < c.layers; ++l) {
    for (const char* proj : {"q", "k", "v", "o"}) {
      add_weight(s, layer_key(l, (std::string("w_") + proj).c_str()), d, d, rng);
      add_constant(s, layer_key(l, (std::string("b_") + proj).c_str()), d, 0.0);
    }
    add_constant(s, layer_key(l, "ln1.gain"), d, 1.0);
    add_constant(s, layer_key(l, "ln1.bias"), d, 0.0);
    add_weight(s, layer_key(l, "ffn.w1"), d, f, rng);
    add_constant(s, layer_key(l, "ffn.b1"), f, 0.0);
    add_weight(s, layer_key(l, "ffn.w2"), f, d, rng);
    add_constant(s, layer_key(l, "ffn.b2"), d, 0.0);
    add_constant(s, layer_key(l, "ln2.gain"), d, 1.0);
    add_constant(s, layer_key(l, "ln2.bias"), d, 0.0);
  }
}

void head_params(ParameterStore& s, std::size_t hidden, std::mt19937_64& rng) {
  add_weight(s, "head.cls.w", hidden, 1, rng);
  add_constant(s, "head.cls.b", 1, 0.0);
  add_weight(s, "head.mu.w", hidden, 1, rng);
  add_constant(s, "head.mu.b", 1, 0.0);
  add_weight(s, "head.scale.w", hidden, 1, rng);
  add_constant(s, "head.scale.b", 1, 0.0);
}

Var param_var(Tape& tape, ParameterStore& params, const std::string& name) {
  return tape.parameter(params.get(name));
}

}  // namespace

void init_grud_params(ParameterStore& store, const GrudConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  grud_params(store, cfg, rng);
}

void init_transformer_params(ParameterStore& store, const TransformerConfig& cfg,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  transformer_params(store, cfg, rng);
}

void init_head_params(ParameterStore& store, std::size_t hidden, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  head_params(store, hidden, rng);
}

Var grud_forward(Tape& tape, const GrudConfig& cfg, ParameterStore& params,
                 const SequenceBatch& batch) {
  const std::size_t B = batch.batch, T = batch.steps, D = batch.features, H = cfg.hidden_dim;
  require(T >= 1 && B >= 1, ErrorKind::ContractViolation, "GRU-D needs at least one step");
  require(D == cfg.input_dim, ErrorKind::Shape,
          fmt::format("GRU-D expects {} features, batch has {}", cfg.input_dim, D));
  require(batch.x.size() == B * T * D && batch.mask.size() == B * T * D &&
              batch.delta.size() == B * T * D,
          ErrorKind::Shape, "GRU-D batch buffers have inconsistent sizes");

  // Time-major rows: row t * B + b.
  Tensor x(T * B, D), m(T * B, D), one_minus_m(T * B, D), delta(T * B, D), x_minus_mean(T * B, D),
      mean(T * B, D);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t f = 0; f < D; ++f) {
        const std::size_t src = batch.at(b, t, f), dst = (t * B + b) * D + f;
        const double dt = batch.delta[src];
        require(dt >= 0.0, ErrorKind::ContractViolation, "GRU-D delta must be >= 0");
        const double mk = batch.mask[src];
        require(mk == 0.0 || mk == 1.0, ErrorKind::ContractViolation, "GRU-D mask must be 0 or 1");
        x[dst] = batch.x[src];
        m[dst] = mk;
        one_minus_m[dst] = 1.0 - mk;
        delta[dst] = dt;
        mean[dst] = cfg.train_mean[f];
        x_minus_mean[dst] = batch.x[src] - cfg.train_mean[f];
      }

  const Var d_var = tape.constant(std::move(delta));
  const Var m_var = tape.constant(m);
  const Var gamma_x = ad::exp(-ad::relu(ad::matmul(d_var, param_var(tape, params, "grud.w_gamma_x"))));
  const Var gamma_h = ad::exp(-ad::relu(ad::matmul(d_var, param_var(tape, params, "grud.w_gamma_h"))));

  // x_hat = m x + (1 - m) (gamma x + (1 - gamma) x_bar) = m x + (1 - m)(x_bar + gamma (x - x_bar))
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= m[i];
  const Var imputed = tape.constant(std::move(mean)) + gamma_x * tape.constant(std::move(x_minus_mean));
  const Var x_hat = tape.constant(std::move(x)) + tape.constant(std::move(one_minus_m)) * imputed;

  const std::vector<Var> z_parts{x_hat, m_var};
  const Var z_proj = ad::tanh(ad::matmul(ad::concat_cols(z_parts), param_var(tape, params, "grud.w_z")) +
                              param_var(tape, params, "grud.b_z"));
  const Var gates_in = ad::matmul(z_proj, param_var(tape, params, "grud.w_ih")) + param_var(tape, params, "grud.b_ih");

  const Var w_hh = param_var(tape, params, "grud.w_hh");
  const Var b_hh = param_var(tape, params, "grud.b_hh");
  Var h = tape.constant(Tensor(B, H, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t r0 = t * B, r1 = (t + 1) * B;
    const Var h_decayed = ad::slice(gamma_h, r0, r1, 0, H) * h;
    const Var gi = ad::slice(gates_in, r0, r1, 0, 3 * H);
    const Var gh = ad::matmul(h_decayed, w_hh) + b_hh;
    const Var ru = ad::sigmoid(ad::slice(gi, 0, B, 0, 2 * H) + ad::slice(gh, 0, B, 0, 2 * H));
    const Var reset = ad::slice(ru, 0, B, 0, H);
    const Var update = ad::slice(ru, 0, B, H, 2 * H);
    const Var candidate =
        ad::tanh(ad::slice(gi, 0, B, 2 * H, 3 * H) + reset * ad::slice(gh, 0, B, 2 * H, 3 * H));
    h = candidate + update * (h_decayed - candidate);
  }
  return h;
}

Tensor sinusoidal_positions(std::size_t steps, std::size_t d_model) {
  Tensor pe(steps, d_model);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < d_model; ++i) {
      const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model);
      const double angle = static_cast<double>(t) / std::pow(10000.0, exponent);
      pe.at(t, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

Var transformer_forward(Tape& tape, const TransformerConfig& cfg, ParameterStore& params,
                        const SequenceBatch& batch, const TransformerOptions& options) {
  const std::size_t B = batch.batch, T = batch.steps, d = cfg.d_model;
  require(T >= 1 && B >= 1, ErrorKind::ContractViolation, "transformer needs at least one step");
  require(T <= cfg.max_len, ErrorKind::ContractViolation,
          fmt::format("context length {} exceeds max_len {}", T, cfg.max_len));
  require(batch.features == 1, ErrorKind::Shape, "transformer encoder takes univariate input");
  require(batch.x.size() == B * T, ErrorKind::Shape, "transformer batch buffer size mismatch");

  const std::size_t heads = cfg.heads, dk = d / heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  // Batch-major rows: row b * T + t.
  const Tensor pe = sinusoidal_positions(T, d);
  Tensor pe_tiled(B * T, d);
  for (std::size_t b = 0; b < B; ++b)
    std::copy(pe.data().begin(), pe.data().end(),
              pe_tiled.data().begin() + static_cast<std::ptrdiff_t>(b * T * d));
  Var hidden = ad::matmul(tape.constant(Tensor::column(batch.x)), param_var(tape, params, "tf.w_in")) +
               tape.constant(std::move(pe_tiled));

  std::vector<std::size_t> last_rows(B);
  for (std::size_t b = 0; b < B; ++b) last_rows[b] = b * T + T - 1;

  bool pooled = false;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const bool last_only = options.last_query_only && l + 1 == cfg.layers;
    const std::size_t q_rows = last_only ? 1 : T;
    const Var query_src = last_only ? ad::gather_rows(hidden, last_rows) : hidden;

    const Var q = ad::matmul(query_src, param_var(tape, params, layer_key(l, "w_q"))) +
                  param_var(tape, params, layer_key(l, "b_q"));
    const Var k = ad::matmul(hidden, param_var(tape, params, layer_key(l, "w_k"))) +
                  param_var(tape, params, layer_key(l, "b_k"));
    const Var v = ad::matmul(hidden, param_var(tape, params, layer_key(l, "w_v"))) +
                  param_var(tape, params, layer_key(l, "b_v"));
    const Var k_t = ad::transpose(k);

    std::vector<Var> windows;
    windows.reserve(B);
    std::vector<Var> per_head(heads);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t hd = 0; hd < heads; ++hd) {
        const std::size_t c0 = hd * dk, c1 = c0 + dk;
        const Var qh = ad::slice(q, b * q_rows, (b + 1) * q_rows, c0, c1);
        const Var kh = ad::slice(k_t, c0, c1, b * T, (b + 1) * T);
        const Var vh = ad::slice(v, b * T, (b + 1) * T, c0, c1);
        const Var weights = ad::softmax_rows(ad::matmul(qh, kh) * inv_sqrt_dk);
        if (options.probe != nullptr) options.probe->weights.push_back(weights.value());
        per_head[hd] = ad::matmul(weights, vh);
      }
      windows.push_back(ad::concat_cols(per_head));
    }
    const Var attended = ad::matmul(ad::concat_rows(windows), param_var(tape, params, layer_key(l, "w_o"))) +
                         param_var(tape, params, layer_key(l, "b_o"));

    Var mixed = attended + query_src;
    if (cfg.layer_norm)
      mixed = ad::layer_norm_rows(mixed, param_var(tape, params, layer_key(l, "ln1.gain")),
                                  param_var(tape, params, layer_key(l, "ln1.bias")));
    const Var ffn_hidden = ad::relu(ad::matmul(mixed, param_var(tape, params, layer_key(l, "ffn.w1"))) +
                                    param_var(tape, params, layer_key(l, "ffn.b1")));
    const Var ffn_out = ad::matmul(ffn_hidden, param_var(tape, params, layer_key(l, "ffn.w2"))) +
                        param_var(tape, params, layer_key(l, "ffn.b2"));
    hidden = ffn_out + mixed;
    if (cfg.layer_norm)
      hidden = ad::layer_norm_rows(hidden, param_var(tape, params, layer_key(l, "ln2.gain")),
                                   param_var(tape, params, layer_key(l, "ln2.bias")));
    pooled = last_only;
  }
  return pooled ? hidden : ad::gather_rows(hidden, last_rows);
}

HeadOutputs heads_forward(Tape& tape, ParameterStore& params, Var h_last) {
  HeadOutputs out;
  out.logit = ad::matmul(h_last, param_var(tape, params, "head.cls.w")) + param_var(tape, params, "head.cls.b");
  out.delta_mu = ad::matmul(h_last, param_var(tape, params, "head.mu.w")) + param_var(tape, params, "head.mu.b");
  const Var raw = ad::matmul(h_last, param_var(tape, params, "head.scale.w")) + param_var(tape, params, "head.scale.b");
  out.sigma_n = ad::softplus(raw) + kSigmaFloor;
  return out;
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  if (config_.kind == EncoderKind::grud)
    grud_params(params_, config_.grud, rng);
  else
    transformer_params(params_, config_.transformer, rng);
  head_params(params_, config_.hidden_size(), rng);
}

Var Model::encode(Tape& tape, const SequenceBatch& batch, const TransformerOptions& options) {
  if (config_.kind == EncoderKind::grud) return grud_forward(tape, config_.grud, params_, batch);
  return transformer_forward(tape, config_.transformer, params_, batch, options);
}

HeadOutputs Model::forward(Tape& tape, const SequenceBatch& batch) {
  return heads_forward(tape, params_, encode(tape, batch));
}

RawPredictions predict(Model& model, std::span<const ingest::StandardizedWindow> windows,
                       std::size_t chunk) {
  RawPredictions out;
  out.logit.reserve(windows.size());
  out.delta_mu.reserve(windows.size());
  out.sigma_n.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += chunk) {
    const std::size_t end = std::min(windows.size(), start + chunk);
    std::vector<const ingest::StandardizedWindow*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&windows[i]);
    Tape tape;
    const auto heads = model.forward(tape, SequenceBatch::from_windows(ptrs));
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
      out.logit.push_back(heads.logit.value()[i]);
      out.delta_mu.push_back(heads.delta_mu.value()[i]);
      out.sigma_n.push_back(heads.sigma_n.value()[i]);
    }
  }
  return out;
}

std::vector<double> baseline_always_negative(std::size_t n) { return std::vector<double>(n, 0.0); }

double baseline_persistence(const ingest::StandardizedWindow& window) { return window.last_bpm(); }

double persistence_scale(std::span<const ingest::StandardizedWindow> train) {
  require(!train.empty(), ErrorKind::ContractViolation, "persistence scale needs training windows");
  double sum = 0.0;
  for (const auto& w : train) sum += w.fc_target - w.last_bpm();
  const double mean = sum / static_cast<double>(train.size());
  double ss = 0.0;
  for (const auto& w : train) {
    const double d = w.fc_target - w.last_bpm() - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(train.size()));
}

}  // namespace hrbench::models
