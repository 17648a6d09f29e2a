// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include "hrbench/hrbench.h"

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <new>
#include <string>

#include <nlohmann/json.hpp>

#include "../core/autodiff.hpp"
#include "../core/bench.hpp"
#include "../core/calibration.hpp"
#include "../core/error.hpp"
#include "../core/metrics.hpp"

namespace fs = std::filesystem;
using hrbench::Error;
using hrbench::ErrorKind;

struct hrb_session {
  hrbench::bench::BenchConfig config;
  hrbench::bench::Logger log;
};

struct hrb_model {
  std::unique_ptr<hrbench::models::Model> model;
  hrbench::training::Task task = hrbench::training::Task::classification;
  hrbench::training::TargetMode mode = hrbench::training::TargetMode::residual;
  hrbench::ingest::StandardizationStats stats;
  std::size_t context_length = 0;
  double temperature = 1.0;
};

namespace {

thread_local std::string g_last_error;

hrb_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
      return HRB_ERR_USAGE;
    case ErrorKind::EmptySignal:
    case ErrorKind::InvalidInput:
    case ErrorKind::GuardUnsatisfied:
    case ErrorKind::SplitInfeasible:
    case ErrorKind::DegenerateScale:
    case ErrorKind::Io:
      return HRB_ERR_DATA;
    case ErrorKind::TrainingDiverged:
      return HRB_ERR_DIVERGED;
    case ErrorKind::ThresholdUndefined:
    case ErrorKind::CIUndefined:
    case ErrorKind::Evaluation:
      return HRB_ERR_EVALUATION;
    case ErrorKind::Shape:
    case ErrorKind::ContractViolation:
      break;
  }
  return HRB_ERR_INTERNAL;
}

template <typename F>
hrb_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return HRB_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return HRB_ERR_INTERNAL;
}

hrb_status null_argument(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return HRB_ERR_USAGE;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  hrbench::require(in.good(), ErrorKind::Io, "cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    hrbench::fail(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
}

}  // namespace

extern "C" {

const char* hrb_version(void) { return "0.1.0"; }

const char* hrb_last_error(void) { return g_last_error.c_str(); }

hrb_status hrb_session_open(const char* config_path, hrb_session** out) {
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto s = std::make_unique<hrb_session>();
    if (config_path) s->config = hrbench::bench::BenchConfig::load(config_path);
    *out = s.release();
  });
}

hrb_status hrb_session_set(hrb_session* s, const char* key, const char* value) {
  if (!s || !key || !value) return null_argument("session, key or value");
  return guarded([&] {
    auto next = s->config;
    next.set(key, value);
    next.validate();
    s->config = std::move(next);
  });
}

hrb_status hrb_session_set_logger(hrb_session* s, hrb_log_fn fn, void* user) {
  if (!s) return null_argument("session");
  if (fn)
    s->log = [fn, user](const std::string& line) { fn(line.c_str(), user); };
  else
    s->log = nullptr;
  return HRB_OK;
}

void hrb_session_close(hrb_session* s) { delete s; }

hrb_status hrb_synth(hrb_session* s) {
  if (!s) return null_argument("session");
  return guarded([&] { hrbench::bench::cmd_synth(s->config, s->log); });
}

hrb_status hrb_prepare(hrb_session* s, hrb_prepare_summary* out) {
  if (!s) return null_argument("session");
  return guarded([&] {
    const auto summary = hrbench::bench::cmd_prepare(s->config, s->log);
    if (out) {
      out->theta = summary.theta;
      out->records = summary.n_records;
      out->windows = summary.n_windows;
      out->positive_windows = summary.n_positive_windows;
      out->positive_records = summary.n_positive_records;
    }
  });
}

hrb_status hrb_train(hrb_session* s) {
  if (!s) return null_argument("session");
  return guarded([&] { hrbench::bench::cmd_train(s->config, s->log); });
}

hrb_status hrb_evaluate(hrb_session* s, const char* runs_dir) {
  if (!s) return null_argument("session");
  return guarded([&] {
    const fs::path dir = runs_dir ? fs::path(runs_dir) : s->config.resolve(s->config.runs_dir);
    hrbench::bench::cmd_evaluate(s->config, dir, s->log);
  });
}

hrb_status hrb_report(const char* runs_dir) {
  if (!runs_dir) return null_argument("runs_dir");
  return guarded([&] { hrbench::bench::cmd_report(runs_dir); });
}

hrb_status hrb_model_load(hrb_session* s, const char* run_dir, hrb_model** out) {
  if (!s || !run_dir || !out) return null_argument("session, run_dir or out");
  *out = nullptr;
  return guarded([&] {
    const fs::path dir = run_dir;
    const auto manifest = read_json(dir / "manifest.json");
    const auto checkpoint = read_json(dir / "checkpoint.json");
    auto m = std::make_unique<hrb_model>();
    try {
      m->task = hrbench::training::task_from_string(manifest.at("task").get<std::string>());
      m->mode = hrbench::training::target_mode_from_string(manifest.at("target_mode").get<std::string>());
      m->stats.mu = manifest.at("data").at("mu").get<double>();
      m->stats.sigma = manifest.at("data").at("sigma").get<double>();
      m->context_length = manifest.at("data").at("context_length").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      hrbench::fail(ErrorKind::InvalidInput, std::string("run manifest: ") + e.what());
    }
    m->model = std::make_unique<hrbench::models::Model>(
        hrbench::models::ModelConfig::from_json(checkpoint.at("config")), 0);
    hrbench::ad::load_checkpoint(dir / "checkpoint.json", m->model->params());
    if (fs::exists(dir / "calibration.json"))
      m->temperature = hrbench::calibration::read_calibration(dir / "calibration.json").temperature;
    *out = m.release();
  });
}

hrb_status hrb_model_predict(hrb_model* m, const double* context, size_t n, hrb_prediction* out) {
  if (!m || !context || !out) return null_argument("model, context or out");
  return guarded([&] {
    hrbench::require(n == m->context_length, ErrorKind::Shape, "context length does not match the model");
    hrbench::ingest::StandardizedWindow w;
    w.context.assign(context, context + n);
    for (double x : w.context) w.context_norm.push_back(m->stats.normalize(x));
    const auto raw = hrbench::models::predict(*m->model, std::span(&w, 1));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    *out = {nan, nan, nan};
    if (m->task == hrbench::training::Task::classification) {
      out->probability = hrbench::calibration::apply_temperature(raw.logit, m->temperature).front();
    } else {
      out->mean_bpm = m->stats.denormalize(hrbench::training::mu_tilde(m->mode, w, raw.delta_mu.front()));
      out->sigma_bpm = m->stats.scale_to_bpm(raw.sigma_n.front());
    }
  });
}

void hrb_model_free(hrb_model* m) { delete m; }

hrb_status hrb_crps_gaussian(double mu, double sigma, double y, double* out) {
  if (!out) return null_argument("out");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    g_last_error = "sigma must be finite and > 0";
    return HRB_ERR_USAGE;
  }
  return guarded([&] { *out = hrbench::metrics::crps_gaussian(mu, sigma, y); });
}

hrb_status hrb_derive_hr(const double* peaks, size_t n_peaks, double* hr, size_t capacity, size_t* written) {
  if ((!peaks && n_peaks > 0) || (!hr && capacity > 0) || !written)
    return null_argument("peaks, hr or written");
  return guarded([&] {
    hrbench::ingest::RPeakRecord record{"capi", std::vector<double>(peaks, peaks + n_peaks)};
    const auto series = hrbench::ingest::derive_hr(record);
    *written = series.hr.size();
    for (std::size_t i = 0; i < std::min(capacity, series.hr.size()); ++i) hr[i] = series.hr[i];
  });
}

}  // extern "C"
