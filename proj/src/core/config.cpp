// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include "config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "error.hpp"
#include "text.hpp"

namespace hrbench::bench {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  fail(ErrorKind::Config, key + " = '" + value + "': expected " + what);
}

double as_double(const std::string& key, const std::string& value) {
  const auto v = text::parse_double(text::trim(value));
  if (!v) bad_value(key, value, "a number");
  return *v;
}

std::uint64_t as_u64(const std::string& key, const std::string& value) {
  const auto s = text::trim(value);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    bad_value(key, value, "a non-negative integer");
  return out;
}

std::size_t as_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(as_u64(key, value));
}

bool as_bool(const std::string& key, const std::string& value) {
  const auto s = std::string(text::trim(value));
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, value, "a boolean");
}

std::vector<std::string> as_list(const std::string& value) {
  std::vector<std::string> out;
  for (auto part : text::split(text::trim(value), ',')) {
    const auto item = text::trim(part);
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

template <typename T, typename F>
std::vector<T> as_list_of(const std::string& value, F convert) {
  std::vector<T> out;
  for (const auto& item : as_list(value)) out.push_back(convert(item));
  return out;
}

using Setter = std::function<void(BenchConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    // [data]
    t["data.manifest"] = [](auto& c, auto&, auto& v) { c.manifest = std::string(text::trim(v)); };
    t["data.peak_table"] = [](auto& c, auto&, auto& v) { c.peak_table = std::string(text::trim(v)); };
    t["data.prepared_dir"] = [](auto& c, auto&, auto& v) { c.prepared_dir = std::string(text::trim(v)); };
    t["data.runs_dir"] = [](auto& c, auto&, auto& v) { c.runs_dir = std::string(text::trim(v)); };
    t["data.exclude"] = [](auto& c, auto&, auto& v) { c.exclude = as_list(v); };
    // [window]
    t["window.T"] = [](auto& c, auto& k, auto& v) { c.context_length = as_size(k, v); };
    t["window.H"] = [](auto& c, auto& k, auto& v) { c.horizon = as_size(k, v); };
    t["window.theta_candidates"] = [](auto& c, auto& k, auto& v) {
      c.theta_candidates = as_list_of<double>(v, [&](auto& s) { return as_double(k, s); });
    };
    t["window.min_positive_records"] = [](auto& c, auto& k, auto& v) {
      c.guard.min_positive_records = as_size(k, v);
    };
    t["window.min_positive_windows"] = [](auto& c, auto& k, auto& v) {
      c.guard.min_positive_windows = as_size(k, v);
    };
    // [split]
    t["split.ratios"] = [](auto& c, auto& k, auto& v) {
      const auto r = as_list_of<double>(v, [&](auto& s) { return as_double(k, s); });
      if (r.size() != 3) bad_value(k, v, "three comma-separated ratios");
      c.ratios = {r[0], r[1], r[2]};
    };
    t["split.seed"] = [](auto& c, auto& k, auto& v) { c.split_seed = as_u64(k, v); };
    // [model]
    t["model.kinds"] = [](auto& c, auto& k, auto& v) {
      try {
        c.kinds = as_list_of<models::EncoderKind>(v, [](auto& s) { return models::encoder_from_string(s); });
      } catch (const Error&) {
        bad_value(k, v, "a list of grud/transformer");
      }
    };
    t["model.tasks"] = [](auto& c, auto& k, auto& v) {
      try {
        c.tasks = as_list_of<training::Task>(v, [](auto& s) { return training::task_from_string(s); });
      } catch (const Error&) {
        bad_value(k, v, "a list of classification/forecasting");
      }
    };
    t["model.hidden"] = [](auto& c, auto& k, auto& v) { c.grud_hidden = as_size(k, v); };
    t["model.hidden_sweep"] = [](auto& c, auto& k, auto& v) {
      c.hidden_sweep = as_list_of<std::size_t>(v, [&](auto& s) { return as_size(k, s); });
    };
    t["model.d_model"] = [](auto& c, auto& k, auto& v) { c.transformer.d_model = as_size(k, v); };
    t["model.layers"] = [](auto& c, auto& k, auto& v) { c.transformer.layers = as_size(k, v); };
    t["model.heads"] = [](auto& c, auto& k, auto& v) { c.transformer.heads = as_size(k, v); };
    t["model.ffn_dim"] = [](auto& c, auto& k, auto& v) { c.transformer.ffn_dim = as_size(k, v); };
    t["model.max_len"] = [](auto& c, auto& k, auto& v) { c.transformer.max_len = as_size(k, v); };
    t["model.layer_norm"] = [](auto& c, auto& k, auto& v) { c.transformer.layer_norm = as_bool(k, v); };
    // [train]
    t["train.lr"] = [](auto& c, auto& k, auto& v) { c.train.lr = as_double(k, v); };
    t["train.batch_size"] = [](auto& c, auto& k, auto& v) { c.train.batch_size = as_size(k, v); };
    t["train.epochs"] = [](auto& c, auto& k, auto& v) { c.train.epochs = as_size(k, v); };
    t["train.seeds"] = [](auto& c, auto& k, auto& v) {
      c.train.seeds = as_list_of<std::uint64_t>(v, [&](auto& s) { return as_u64(k, s); });
    };
    t["train.weight_decay"] = [](auto& c, auto& k, auto& v) { c.train.weight_decay = as_double(k, v); };
    t["train.eps_prevalence"] = [](auto& c, auto& k, auto& v) { c.train.eps_prevalence = as_double(k, v); };
    t["train.target_mode"] = [](auto& c, auto& k, auto& v) {
      try {
        c.train.target_mode = training::target_mode_from_string(std::string(text::trim(v)));
      } catch (const Error&) {
        bad_value(k, v, "residual or absolute");
      }
    };
    t["train.beta1"] = [](auto& c, auto& k, auto& v) { c.train.beta1 = as_double(k, v); };
    t["train.beta2"] = [](auto& c, auto& k, auto& v) { c.train.beta2 = as_double(k, v); };
    t["train.adam_eps"] = [](auto& c, auto& k, auto& v) { c.train.adam_eps = as_double(k, v); };
    t["train.threads"] = [](auto& c, auto& k, auto& v) { c.threads = as_size(k, v); };
    // [eval]
    t["eval.calibration"] = [](auto& c, auto& k, auto& v) { c.calibration = as_bool(k, v); };
    t["eval.beta"] = [](auto& c, auto& k, auto& v) { c.beta = as_double(k, v); };
    t["eval.ece_bins"] = [](auto& c, auto& k, auto& v) { c.ece_bins = as_size(k, v); };
    t["eval.bootstrap"] = [](auto& c, auto& k, auto& v) { c.bootstrap_draws = as_size(k, v); };
    t["eval.bootstrap_seed"] = [](auto& c, auto& k, auto& v) { c.bootstrap_seed = as_u64(k, v); };
    // [synth]
    t["synth.out_dir"] = [](auto& c, auto&, auto& v) { c.synth_dir = std::string(text::trim(v)); };
    t["synth.n_records"] = [](auto& c, auto& k, auto& v) { c.synth.n_records = as_size(k, v); };
    t["synth.length_s"] = [](auto& c, auto& k, auto& v) { c.synth.length_s = as_size(k, v); };
    t["synth.base_hr"] = [](auto& c, auto& k, auto& v) { c.synth.base_hr = as_double(k, v); };
    t["synth.base_spread_bpm"] = [](auto& c, auto& k, auto& v) { c.synth.base_spread_bpm = as_double(k, v); };
    t["synth.ar_coef"] = [](auto& c, auto& k, auto& v) { c.synth.ar_coef = as_double(k, v); };
    t["synth.noise_bpm"] = [](auto& c, auto& k, auto& v) { c.synth.noise_bpm = as_double(k, v); };
    t["synth.jitter_bpm"] = [](auto& c, auto& k, auto& v) { c.synth.jitter_bpm = as_double(k, v); };
    t["synth.episode_rate_per_hour"] = [](auto& c, auto& k, auto& v) {
      c.synth.episode_rate_per_hour = as_double(k, v);
    };
    t["synth.episode_min_s"] = [](auto& c, auto& k, auto& v) { c.synth.episode_min_s = as_double(k, v); };
    t["synth.episode_max_s"] = [](auto& c, auto& k, auto& v) { c.synth.episode_max_s = as_double(k, v); };
    t["synth.amplitude_bpm"] = [](auto& c, auto& k, auto& v) { c.synth.amplitude_bpm = as_double(k, v); };
    t["synth.ramp_s"] = [](auto& c, auto& k, auto& v) { c.synth.ramp_s = as_double(k, v); };
    t["synth.ectopic_rate"] = [](auto& c, auto& k, auto& v) { c.synth.ectopic_rate = as_double(k, v); };
    t["synth.ectopic_bpm"] = [](auto& c, auto& k, auto& v) { c.synth.ectopic_bpm = as_double(k, v); };
    t["synth.seed"] = [](auto& c, auto& k, auto& v) { c.synth.seed = as_u64(k, v); };
    return t;
  }();
  return table;
}

}  // namespace

BenchConfig BenchConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto dir = path.parent_path();
  if (dir.empty()) dir = ".";
  return parse(buffer.str(), dir);
}

BenchConfig BenchConfig::parse(const std::string& text, const std::filesystem::path& base_dir) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorKind::Config, e.what());
  }
  BenchConfig config;
  config.base_dir = base_dir;
  for (const auto& [section, body] : tree) {
    if (body.empty()) fail(ErrorKind::Config, "key '" + section + "' outside a [section]");
    for (const auto& [key, node] : body) config.set(section + "." + key, node.data());
  }
  config.validate();
  return config;
}

void BenchConfig::set(const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) fail(ErrorKind::Config, "unknown config key '" + key + "'");
  it->second(*this, key, value);
}

void BenchConfig::validate() const {
  require(context_length > 0 && horizon > 0, ErrorKind::Config, "window.T and window.H must be > 0");
  require(!theta_candidates.empty(), ErrorKind::Config, "window.theta_candidates is empty");
  require(ratios.train > 0 && ratios.val >= 0 && ratios.test >= 0, ErrorKind::Config,
          "split.ratios must be non-negative with a positive train share");
  require(std::abs(ratios.train + ratios.val + ratios.test - 1.0) < 1e-9, ErrorKind::Config,
          "split.ratios must sum to 1");
  require(!kinds.empty(), ErrorKind::Config, "model.kinds is empty");
  require(!tasks.empty(), ErrorKind::Config, "model.tasks is empty");
  require(grud_hidden > 0, ErrorKind::Config, "model.hidden must be > 0");
  for (auto h : hidden_sweep) require(h > 0, ErrorKind::Config, "model.hidden_sweep entries must be > 0");
  models::ModelConfig tf;
  tf.kind = models::EncoderKind::transformer;
  tf.transformer = transformer;
  try {
    tf.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
  try {
    train.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
  require(beta > 0, ErrorKind::Config, "eval.beta must be > 0");
  require(ece_bins > 0, ErrorKind::Config, "eval.ece_bins must be > 0");
  require(bootstrap_draws > 0, ErrorKind::Config, "eval.bootstrap must be > 0");
  require(synth.ar_coef > -1.0 && synth.ar_coef < 1.0, ErrorKind::Config, "synth.ar_coef must be in (-1, 1)");
  require(synth.noise_bpm >= 0 && synth.jitter_bpm >= 0 && synth.amplitude_bpm >= 0, ErrorKind::Config,
          "synth noise, jitter and amplitude must be >= 0");
  require(synth.episode_min_s > 0 && synth.episode_max_s >= synth.episode_min_s, ErrorKind::Config,
          "synth episode durations must satisfy 0 < min <= max");
  require(synth.episode_rate_per_hour >= 0 && synth.ramp_s >= 0, ErrorKind::Config,
          "synth episode rate and ramp must be >= 0");
  require(synth.ectopic_rate >= 0 && synth.ectopic_rate <= 1 && synth.ectopic_bpm >= 0, ErrorKind::Config,
          "synth.ectopic_rate must be in [0, 1] and synth.ectopic_bpm >= 0");
  require(synth.base_hr >= ingest::kHrMin && synth.base_hr <= ingest::kHrMax, ErrorKind::Config,
          "synth.base_hr must lie in [20, 220]");
}

std::filesystem::path BenchConfig::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return base_dir / p;
}

}  // namespace hrbench::bench
