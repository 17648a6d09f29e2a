// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors
//
// Independent reference implementations shared by the unit tests and the
// acceptance binary. Written for clarity, not speed.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autodiff.hpp"
#include "models.hpp"

namespace hrbench::oracle {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Mat to_eigen(const ad::Tensor& t) {
  return Eigen::Map<const Mat>(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                               static_cast<Eigen::Index>(t.cols()));
}

inline Mat param(const ad::ParameterStore& s, const std::string& name) { return to_eigen(s.get(name).value); }

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void randomize(ad::ParameterStore& s, std::mt19937_64& rng, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& p : s.all())
    for (auto& v : p.value.data()) v = u(rng);
}

inline models::SequenceBatch random_batch(std::mt19937_64& rng, std::size_t B, std::size_t T,
                                         bool with_gaps) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(B * T);
  for (auto& v : x) v = n(rng);
  auto batch = models::SequenceBatch::observed(B, T, x);
  if (with_gaps) {
    std::bernoulli_distribution miss(0.3);
    for (std::size_t b = 0; b < B; ++b) {
      double since = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t i = batch.at(b, t);
        batch.delta[i] = since;
        batch.mask[i] = (t > 0 && miss(rng)) ? 0.0 : 1.0;
        since = batch.mask[i] == 1.0 ? 1.0 : since + 1.0;
      }
    }
  }
  return batch;
}

// Plain GRU over z_t = tanh(W_z [x_t; 1] + b_z), no decay terms at all.
inline Eigen::RowVectorXd reference_gru(const ad::ParameterStore& s, const models::SequenceBatch& batch,
                                        std::size_t b, std::size_t H) {
  const Mat wz = param(s, "grud.w_z"), bz = param(s, "grud.b_z");
  const Mat wih = param(s, "grud.w_ih"), bih = param(s, "grud.b_ih");
  const Mat whh = param(s, "grud.w_hh"), bhh = param(s, "grud.b_hh");
  const auto Hi = static_cast<Eigen::Index>(H);
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(Hi);
  for (std::size_t t = 0; t < batch.steps; ++t) {
    const double x = batch.x[batch.at(b, t)];
    Eigen::RowVectorXd z = (x * wz.row(0) + wz.row(1) + bz.row(0)).array().tanh();
    const Eigen::RowVectorXd gi = z * wih + bih.row(0);
    const Eigen::RowVectorXd gg = h * whh + bhh.row(0);
    Eigen::RowVectorXd next(Hi);
    for (Eigen::Index k = 0; k < Hi; ++k) {
      const double r = sigm(gi(k) + gg(k));
      const double u = sigm(gi(Hi + k) + gg(Hi + k));
      const double c = std::tanh(gi(2 * Hi + k) + r * gg(2 * Hi + k));
      next(k) = (1 - u) * c + u * h(k);
    }
    h = next;
  }
  return h;
}

using Vec = std::vector<double>;

inline double brute_auroc(const Vec& p, const Vec& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        ++pairs;
        wins += p[i] > p[j] ? 1.0 : (p[i] == p[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

// Mean over positives of the precision among everything scored >= that positive.
inline double brute_ap(const Vec& p, const Vec& y) {
  double total = 0, npos = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (y[i] != 1) continue;
    ++npos;
    double tp = 0, pred = 0;
    for (std::size_t j = 0; j < p.size(); ++j)
      if (p[j] >= p[i]) {
        ++pred;
        tp += y[j];
      }
    total += tp / pred;
  }
  return total / npos;
}

inline double brute_ece(const Vec& p, const Vec& y, std::size_t bins) {
  double total = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) / bins, hi = static_cast<double>(b + 1) / bins;
    double n = 0, conf = 0, acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool in = p[i] >= lo && (b + 1 == bins ? p[i] <= hi : p[i] < hi);
      if (!in) continue;
      ++n;
      conf += p[i];
      acc += y[i];
    }
    if (n > 0) total += n / p.size() * std::abs(acc / n - conf / n);
  }
  return total;
}

inline double brute_f1(const Vec& p, const Vec& y, double tau) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    tp += p[i] >= tau && y[i] == 1;
    fp += p[i] >= tau && y[i] == 0;
    fn += p[i] < tau && y[i] == 1;
  }
  return tp + fp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

// Composite Simpson on each side of the indicator jump.
inline double crps_by_integration(double mu, double sigma, double y) {
  auto F = [&](double x) { return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0))); };
  auto simpson = [](auto f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
    return s * h / 3;
  };
  const double lo = std::min(mu - 10 * sigma, y), hi = std::max(mu + 10 * sigma, y);
  return simpson([&](double x) { return F(x) * F(x); }, lo, y, 4000) +
         simpson([&](double x) { return (1 - F(x)) * (1 - F(x)); }, y, hi, 4000);
}

inline Vec random_probs(std::mt19937_64& rng, std::size_t n, int grid) {
  std::uniform_int_distribution<int> u(0, grid);
  Vec p(n);
  for (auto& v : p) v = static_cast<double>(u(rng)) / grid;
  return p;
}

// Exhaustive sweep: every candidate, predicted positive iff p >= tau.
inline std::pair<double, double> brute_fbeta(const Vec& p, const Vec& y, double beta) {
  std::set<double> cands(p.begin(), p.end());
  cands.insert(0.0);
  cands.insert(1.0);
  double best_tau = 0.0, best_f = -1.0;
  for (double tau : cands) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool pred = p[i] >= tau;
      tp += pred && y[i] == 1;
      fp += pred && y[i] == 0;
      fn += !pred && y[i] == 1;
    }
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double rec = tp / (tp + fn);
    const double b2 = beta * beta;
    const double f = prec + rec > 0 ? (1 + b2) * prec * rec / (b2 * prec + rec) : 0.0;
    if (f >= best_f) best_f = f, best_tau = tau;  // ascending order, >= keeps the larger tau
  }
  return {best_tau, best_f};
}

}  // namespace hrbench::oracle
