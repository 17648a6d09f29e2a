// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors
//
// `bench` command-line driver. Talks to the engine only through the C API.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "hrbench/hrbench.h"

namespace {

void print_line(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

int report_failure(hrb_status status) {
  std::fprintf(stderr, "bench: %s\n", hrb_last_error());
  return static_cast<int>(status);
}

struct Overrides {
  bool no_calibration = false;
  std::string beta;
  std::string hidden_sweep;
  std::string target_mode;
};

// Opens the session and applies flag overrides on top of the config file.
hrb_status open_session(const std::string& config, const Overrides& o, hrb_session** out) {
  hrb_status st = hrb_session_open(config.c_str(), out);
  if (st != HRB_OK) return st;
  hrb_session_set_logger(*out, print_line, nullptr);
  if (o.no_calibration && (st = hrb_session_set(*out, "eval.calibration", "false")) != HRB_OK) return st;
  if (!o.beta.empty() && (st = hrb_session_set(*out, "eval.beta", o.beta.c_str())) != HRB_OK) return st;
  if (!o.hidden_sweep.empty() &&
      (st = hrb_session_set(*out, "model.hidden_sweep", o.hidden_sweep.c_str())) != HRB_OK)
    return st;
  if (!o.target_mode.empty() &&
      (st = hrb_session_set(*out, "train.target_mode", o.target_mode.c_str())) != HRB_OK)
    return st;
  return HRB_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heart-rate risk and forecasting benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hrb_version()));

  std::string config;
  std::string runs;
  Overrides o;

  auto add_overrides = [&](CLI::App* cmd) {
    cmd->add_flag("--no-calibration", o.no_calibration, "Skip temperature scaling");
    cmd->add_option("--beta", o.beta, "F-beta used for threshold selection")->check(CLI::IsMember({"1", "2"}));
    cmd->add_option("--hidden-sweep", o.hidden_sweep, "Extra GRU-D classifier widths, e.g. 32,64,128");
    cmd->add_option("--target-mode", o.target_mode, "Forecast target")
        ->check(CLI::IsMember({"residual", "absolute"}));
  };

  auto* prepare = app.add_subcommand("prepare", "Derive HR, pick theta, window, split and standardize");
  prepare->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic R-peak corpus");
  synth->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);

  auto* train = app.add_subcommand("train", "Train the model x task x seed grid");
  train->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  add_overrides(train);

  auto* evaluate = app.add_subcommand("evaluate", "Score trained runs and baselines on the test split");
  evaluate->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--runs", runs, "Runs directory")->required()->check(CLI::ExistingDirectory);
  add_overrides(evaluate);

  auto* report = app.add_subcommand("report", "Aggregate per-seed reports into mean and std");
  report->add_option("--runs", runs, "Runs directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(HRB_ERR_USAGE);
  }

  if (report->parsed()) {
    const hrb_status st = hrb_report(runs.c_str());
    if (st != HRB_OK) return report_failure(st);
    std::fprintf(stderr, "report written under %s\n", runs.c_str());
    return 0;
  }

  hrb_session* session = nullptr;
  hrb_status st = open_session(config, o, &session);
  if (st == HRB_OK) {
    if (synth->parsed()) {
      st = hrb_synth(session);
    } else if (prepare->parsed()) {
      hrb_prepare_summary summary{};
      st = hrb_prepare(session, &summary);
      if (st == HRB_OK)
        std::printf("theta=%g windows=%zu positive_windows=%zu positive_records=%zu records=%zu\n",
                    summary.theta, summary.windows, summary.positive_windows, summary.positive_records,
                    summary.records);
    } else if (train->parsed()) {
      st = hrb_train(session);
    } else if (evaluate->parsed()) {
      st = hrb_evaluate(session, runs.c_str());
    }
  }
  if (st != HRB_OK) {
    const int code = report_failure(st);
    hrb_session_close(session);
    return code;
  }
  hrb_session_close(session);
  return 0;
}
