// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "error.hpp"
#include "models.hpp"
#include "training.hpp"
#include "oracles.hpp"

using namespace hrbench;
using namespace hrbench::models;
using ad::Tensor;
using namespace hrbench::oracle;

namespace {

// Direct per-window GRU-D recurrence with scalar input (D = 1).
Eigen::RowVectorXd reference_grud(const ad::ParameterStore& s, const SequenceBatch& batch, std::size_t b,
                                  double x_bar, std::size_t H) {
  const Mat wgx = param(s, "grud.w_gamma_x"), wgh = param(s, "grud.w_gamma_h");
  const Mat wz = param(s, "grud.w_z"), bz = param(s, "grud.b_z");
  const Mat wih = param(s, "grud.w_ih"), bih = param(s, "grud.b_ih");
  const Mat whh = param(s, "grud.w_hh"), bhh = param(s, "grud.b_hh");
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(H));
  const auto Hi = static_cast<Eigen::Index>(H);
  for (std::size_t t = 0; t < batch.steps; ++t) {
    const std::size_t i = batch.at(b, t);
    const double x = batch.x[i], m = batch.mask[i], d = batch.delta[i];
    const double gx = std::exp(-std::max(0.0, d * wgx(0, 0)));
    Eigen::RowVectorXd gh(Hi);
    for (Eigen::Index k = 0; k < Hi; ++k) gh(k) = std::exp(-std::max(0.0, d * wgh(0, k)));
    const double x_hat = m * x + (1 - m) * (gx * x + (1 - gx) * x_bar);
    Eigen::RowVectorXd z = (x_hat * wz.row(0) + m * wz.row(1) + bz.row(0)).array().tanh();
    const Eigen::RowVectorXd hd = gh.cwiseProduct(h);
    const Eigen::RowVectorXd gi = z * wih + bih.row(0);
    const Eigen::RowVectorXd gg = hd * whh + bhh.row(0);
    Eigen::RowVectorXd next(Hi);
    for (Eigen::Index k = 0; k < Hi; ++k) {
      const double r = sigm(gi(k) + gg(k));
      const double u = sigm(gi(Hi + k) + gg(Hi + k));
      const double c = std::tanh(gi(2 * Hi + k) + r * gg(2 * Hi + k));
      next(k) = (1 - u) * c + u * hd(k);
    }
    h = next;
  }
  return h;
}

Mat layer_norm(const Mat& a, const Mat& g, const Mat& b) {
  Mat out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double mu = a.row(r).mean();
    const double var = (a.row(r).array() - mu).square().mean();
    out.row(r) = ((a.row(r).array() - mu) / std::sqrt(var + 1e-5)).matrix().cwiseProduct(g.row(0)) + b.row(0);
  }
  return out;
}

// Full-sequence encoder for one window, written against the textbook layout.
Eigen::RowVectorXd reference_transformer(const ad::ParameterStore& s, const TransformerConfig& c,
                                         const std::vector<double>& x) {
  const auto T = static_cast<Eigen::Index>(x.size());
  const auto d = static_cast<Eigen::Index>(c.d_model);
  const auto dk = d / static_cast<Eigen::Index>(c.heads);
  Mat pe(T, d);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index i = 0; i < d; ++i) {
      const double angle = static_cast<double>(t) / std::pow(10000.0, static_cast<double>(2 * (i / 2)) / d);
      pe(t, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  Mat h(T, d);
  const Mat w_in = param(s, "tf.w_in");
  for (Eigen::Index t = 0; t < T; ++t) h.row(t) = x[static_cast<std::size_t>(t)] * w_in.row(0) + pe.row(t);

  for (std::size_t l = 0; l < c.layers; ++l) {
    auto key = [&](const char* n) { return "tf.l" + std::to_string(l) + "." + n; };
    auto affine = [&](const Mat& in, const char* w, const char* b) {
      return Mat((in * param(s, key(w))).rowwise() + param(s, key(b)).row(0));
    };
    const Mat q = affine(h, "w_q", "b_q"), k = affine(h, "w_k", "b_k"), v = affine(h, "w_v", "b_v");
    Mat att(T, d);
    for (Eigen::Index hd = 0; hd < static_cast<Eigen::Index>(c.heads); ++hd) {
      Mat scores = q.middleCols(hd * dk, dk) * k.middleCols(hd * dk, dk).transpose() / std::sqrt(double(dk));
      for (Eigen::Index r = 0; r < T; ++r) {
        const double mx = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - mx).exp();
        scores.row(r) /= scores.row(r).sum();
      }
      att.middleCols(hd * dk, dk) = scores * v.middleCols(hd * dk, dk);
    }
    Mat mixed = affine(att, "w_o", "b_o") + h;
    if (c.layer_norm) mixed = layer_norm(mixed, param(s, key("ln1.gain")), param(s, key("ln1.bias")));
    Mat f = affine(mixed, "ffn.w1", "ffn.b1").cwiseMax(0.0);
    h = affine(f, "ffn.w2", "ffn.b2") + mixed;
    if (c.layer_norm) h = layer_norm(h, param(s, key("ln2.gain")), param(s, key("ln2.bias")));
  }
  return h.row(T - 1);
}

Eigen::RowVectorXd row_of(const Tensor& t, std::size_t r) {
  return to_eigen(t).row(static_cast<Eigen::Index>(r));
}

TransformerConfig small_tf(bool ln = true) {
  TransformerConfig c;
  c.d_model = 8;
  c.layers = 2;
  c.heads = 2;
  c.ffn_dim = 16;
  c.max_len = 64;
  c.layer_norm = ln;
  return c;
}

}  // namespace

TEST_CASE("GRU-D reduces to a plain GRU when fully observed") {
  std::mt19937_64 rng(1);
  GrudConfig cfg;
  cfg.hidden_dim = 6;
  cfg.train_mean = {0.3};
  ad::ParameterStore s;
  init_grud_params(s, cfg, 3);
  randomize(s, rng);
  const auto batch = random_batch(rng, 100, 20, false);
  ad::Tape tape;
  const auto& h = grud_forward(tape, cfg, s, batch).value();
  double worst = 0.0;
  for (std::size_t b = 0; b < 100; ++b)
    worst = std::max(worst, (row_of(h, b) - reference_gru(s, batch, b, 6)).cwiseAbs().maxCoeff());
  CHECK(worst < 1e-12);
}

TEST_CASE("GRU-D matches a direct recurrence with gaps") {
  std::mt19937_64 rng(2);
  GrudConfig cfg;
  cfg.hidden_dim = 5;
  cfg.train_mean = {-0.4};
  ad::ParameterStore s;
  init_grud_params(s, cfg, 4);
  randomize(s, rng, 0.8);
  const auto batch = random_batch(rng, 30, 15, true);
  ad::Tape tape;
  const auto& h = grud_forward(tape, cfg, s, batch).value();
  for (std::size_t b = 0; b < 30; ++b)
    CHECK((row_of(h, b) - reference_grud(s, batch, b, -0.4, 5)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("GRU-D imputation decays toward the training mean") {
  GrudConfig cfg;
  cfg.hidden_dim = 3;
  cfg.train_mean = {0.7};
  ad::ParameterStore s;
  init_grud_params(s, cfg, 0);
  s.get("grud.w_gamma_x").value[0] = 1.0;
  // Missing value 5.0 after a long gap behaves like an observation of x-bar
  // routed through the (1 - m) branch.
  auto gap = SequenceBatch::observed(1, 2, {0.1, 5.0});
  gap.mask[1] = 0.0;
  gap.delta[1] = 1e6;
  auto at_mean = gap;
  at_mean.x[1] = 0.7;
  ad::Tape t1, t2;
  const auto a = row_of(grud_forward(t1, cfg, s, gap).value(), 0);
  const auto b = row_of(grud_forward(t2, cfg, s, at_mean).value(), 0);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("GRU-D with zero parameters stays at the zero state") {
  GrudConfig cfg;
  cfg.hidden_dim = 4;
  ad::ParameterStore s;
  init_grud_params(s, cfg, 0);
  for (auto& p : s.all()) p.value.fill(0.0);
  std::mt19937_64 rng(3);
  const auto batch = random_batch(rng, 3, 10, true);
  ad::Tape tape;
  for (double v : grud_forward(tape, cfg, s, batch).value().data()) CHECK(v == 0.0);
}

TEST_CASE("GRU-D rejects negative delta") {
  GrudConfig cfg;
  cfg.hidden_dim = 2;
  ad::ParameterStore s;
  init_grud_params(s, cfg, 0);
  auto batch = SequenceBatch::observed(1, 2, {0.0, 1.0});
  batch.delta[1] = -1.0;
  ad::Tape tape;
  CHECK_THROWS_AS(grud_forward(tape, cfg, s, batch), Error);
}

TEST_CASE("sinusoidal positions at t = 0") {
  const auto pe = sinusoidal_positions(3, 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(pe.at(0, i) == (i % 2 == 0 ? 0.0 : 1.0));
  CHECK(pe.at(2, 0) == doctest::Approx(std::sin(2.0)));
  CHECK(pe.at(2, 3) == doctest::Approx(std::cos(2.0 / std::pow(10000.0, 2.0 / 8.0))));
}

TEST_CASE("transformer matches a reference encoder") {
  for (bool ln : {true, false}) {
    CAPTURE(ln);
    std::mt19937_64 rng(5);
    const auto cfg = small_tf(ln);
    ad::ParameterStore s;
    init_transformer_params(s, cfg, 11);
    randomize(s, rng);
    const auto batch = random_batch(rng, 4, 12, false);
    for (bool last_only : {true, false}) {
      ad::Tape tape;
      const auto& h = transformer_forward(tape, cfg, s, batch, {last_only, nullptr}).value();
      REQUIRE(h.rows() == 4);
      for (std::size_t b = 0; b < 4; ++b) {
        const std::vector<double> x(batch.x.begin() + static_cast<long>(b * 12),
                                    batch.x.begin() + static_cast<long>((b + 1) * 12));
        CHECK((row_of(h, b) - reference_transformer(s, cfg, x)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("attention rows sum to one and zeroed projections attend uniformly") {
  std::mt19937_64 rng(6);
  const auto cfg = small_tf();
  ad::ParameterStore s;
  init_transformer_params(s, cfg, 1);
  randomize(s, rng);
  const auto batch = random_batch(rng, 3, 10, false);
  AttentionProbe probe;
  ad::Tape tape;
  transformer_forward(tape, cfg, s, batch, {false, &probe});
  REQUIRE(probe.weights.size() == 3 * 2 * 2);
  for (const auto& w : probe.weights)
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < w.cols(); ++c) total += w.at(r, c);
      CHECK(std::abs(total - 1.0) < 1e-12);
    }

  for (std::size_t l = 0; l < cfg.layers; ++l)
    for (const char* n : {"w_q", "b_q", "w_k", "b_k"}) s.get("tf.l" + std::to_string(l) + "." + n).value.fill(0.0);
  AttentionProbe flat;
  ad::Tape t2;
  transformer_forward(t2, cfg, s, batch, {true, &flat});
  for (const auto& w : flat.weights)
    for (double v : w.data()) CHECK(v == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("transformer depends on order and is equivariant to batch order") {
  std::mt19937_64 rng(7);
  const auto cfg = small_tf();
  ad::ParameterStore s;
  init_transformer_params(s, cfg, 2);
  randomize(s, rng);
  const auto batch = random_batch(rng, 3, 10, false);
  auto reversed = batch;
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t t = 0; t < 10; ++t) reversed.x[batch.at(b, t)] = batch.x[batch.at(b, 9 - t)];
  auto swapped = batch;
  for (std::size_t t = 0; t < 10; ++t) std::swap(swapped.x[swapped.at(0, t)], swapped.x[swapped.at(2, t)]);

  ad::Tape t1, t2, t3;
  const auto a = transformer_forward(t1, cfg, s, batch).value();
  const auto r = transformer_forward(t2, cfg, s, reversed).value();
  const auto w = transformer_forward(t3, cfg, s, swapped).value();
  CHECK((row_of(a, 0) - row_of(r, 0)).cwiseAbs().maxCoeff() > 1e-6);
  CHECK((row_of(a, 0) - row_of(w, 2)).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((row_of(a, 1) - row_of(w, 1)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("transformer rejects contexts longer than max_len") {
  auto cfg = small_tf();
  cfg.max_len = 5;
  ad::ParameterStore s;
  init_transformer_params(s, cfg, 0);
  const auto batch = SequenceBatch::observed(1, 6, std::vector<double>(6, 0.0));
  ad::Tape tape;
  try {
    transformer_forward(tape, cfg, s, batch);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ContractViolation);
  }
}

TEST_CASE("models are deterministic given a seed") {
  ModelConfig mc;
  mc.kind = EncoderKind::transformer;
  mc.transformer = small_tf();
  Model a(mc, 9), b(mc, 9), c(mc, 10);
  for (std::size_t i = 0; i < a.params().all().size(); ++i) {
    const auto& pa = a.params().all()[i].value.data();
    const auto& pb = b.params().all()[i].value.data();
    CHECK(std::equal(pa.begin(), pa.end(), pb.begin()));
  }
  CHECK(a.params().get("tf.w_in").value[0] != c.params().get("tf.w_in").value[0]);
}

TEST_CASE("heads with zero weights expose their biases") {
  ad::ParameterStore s;
  init_head_params(s, 3, 0);
  for (const char* n : {"head.cls.w", "head.mu.w", "head.scale.w"}) s.get(n).value.fill(0.0);
  s.get("head.cls.b").value[0] = 0.25;
  s.get("head.mu.b").value[0] = -0.5;
  ad::Tape tape;
  const auto h = tape.constant(Tensor(2, 3, 1.7));
  auto out = heads_forward(tape, s, h);
  CHECK(out.logit.value().at(1, 0) == 0.25);
  CHECK(out.delta_mu.value().at(0, 0) == -0.5);
  CHECK(out.sigma_n.value().at(0, 0) == doctest::Approx(std::log(2.0) + 1e-4).epsilon(1e-14));
  CHECK(out.sigma_n.value().at(0, 0) == doctest::Approx(0.693247).epsilon(1e-6));

  s.get("head.scale.b").value[0] = -1000.0;
  ad::Tape t2;
  CHECK(heads_forward(t2, s, t2.constant(Tensor(1, 3, 0.0))).sigma_n.value().item() >= kSigmaFloor);

  const ingest::StandardizationStats st{70.0, 10.0};
  CHECK(st.denormalize(0.3) == doctest::Approx(73.0));
  CHECK(st.scale_to_bpm(0.5) == doctest::Approx(5.0));
}

TEST_CASE("baselines") {
  const auto zeros = baseline_always_negative(4);
  CHECK(zeros == std::vector<double>(4, 0.0));

  ingest::StandardizedWindow w;
  w.context = {70.0, 75.0, 80.0};
  w.fc_target = 85.0;
  CHECK(std::abs(w.fc_target - baseline_persistence(w)) == 5.0);

  // Random walk: persistence error is the one-step increment.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> step(0.0, 2.0);
  std::vector<ingest::StandardizedWindow> ws;
  double total_abs = 0.0, total = 0.0, total_sq = 0.0;
  for (int i = 0; i < 50; ++i) {
    ingest::StandardizedWindow x;
    double v = 80.0;
    for (int t = 0; t < 60; ++t) x.context.push_back(v += step(rng));
    const double inc = step(rng);
    x.fc_target = v + inc;
    total_abs += std::abs(inc);
    total += inc;
    total_sq += inc * inc;
    ws.push_back(x);
  }
  double mae = 0.0;
  for (const auto& x : ws) mae += std::abs(x.fc_target - baseline_persistence(x));
  CHECK(mae / 50 == doctest::Approx(total_abs / 50).epsilon(1e-12));
  const double m = total / 50;
  CHECK(persistence_scale(ws) == doctest::Approx(std::sqrt(total_sq / 50 - m * m)).epsilon(1e-9));
}

TEST_CASE("model config json round trip") {
  ModelConfig mc;
  mc.kind = EncoderKind::transformer;
  mc.transformer = small_tf(false);
  const auto back = ModelConfig::from_json(mc.to_json());
  CHECK(back.kind == EncoderKind::transformer);
  CHECK(back.transformer.d_model == 8);
  CHECK(back.transformer.layer_norm == false);
  CHECK(back.hidden_size() == 8);
}

TEST_CASE("full-model gradients match finite differences under both losses") {
  std::mt19937_64 rng(12);
  for (auto kind : {EncoderKind::grud, EncoderKind::transformer}) {
    ModelConfig mc;
    mc.kind = kind;
    mc.grud.hidden_dim = 4;
    mc.transformer = small_tf();
    Model model(mc, 21);
    randomize(model.params(), rng, 0.6);
    const auto batch = random_batch(rng, 3, 8, kind == EncoderKind::grud);
    const std::vector<double> labels{1.0, 0.0, 1.0};
    const std::vector<double> targets{0.4, -0.2, 1.1};
    for (auto task : {training::Task::classification, training::Task::forecasting}) {
      const std::string label = std::string(to_string(kind)) + "/" + training::to_string(task);
      CAPTURE(label);
      auto loss = [&](ad::Tape& tape) {
        const auto out = model.forward(tape, batch);
        if (task == training::Task::classification) return training::weighted_bce(out.logit, labels, 2.5);
        return training::gaussian_nll(out.delta_mu, out.sigma_n, targets);
      };
      const auto ptrs = model.params().pointers();
      // O(1) losses: central differences at h = 1e-5 carry ~1e-10 absolute
      // noise, so gradients below 1e-6 are compared in absolute terms.
      const auto r = ad::check_gradients(loss, ptrs, 1e-5, 1e-6);
      CAPTURE(r.worst_parameter);
      CAPTURE(r.worst_index);
      CAPTURE(r.analytic);
      CAPTURE(r.numeric);
      CHECK(r.max_relative_error < 1e-4);
    }
  }
}
