// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include "autodiff.hpp"
#include "error.hpp"

using namespace hrbench;
using namespace hrbench::ad;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// Independent central-difference check. Projects the op output onto a fixed
// random matrix so every output coordinate contributes to the scalar.
double max_fd_error(const std::function<Var(Tape&, std::vector<Var>&)>& op,
                    std::vector<Parameter>& inputs, std::mt19937_64& rng) {
  Tensor probe;
  auto loss = [&](Tape& tape) {
    std::vector<Var> vars;
    for (auto& p : inputs) vars.push_back(tape.parameter(p));
    Var out = op(tape, vars);
    if (probe.size() == 0) probe = random_tensor(rng, out.value().rows(), out.value().cols());
    return sum(mul(out, tape.constant(probe)));
  };
  for (auto& p : inputs) p.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  double worst = 0.0;
  const double h = 1e-6;
  for (auto& p : inputs) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double keep = p.value[i];
      p.value[i] = keep + h;
      Tape t1;
      const double up = loss(t1).value().item();
      p.value[i] = keep - h;
      Tape t2;
      const double dn = loss(t2).value().item();
      p.value[i] = keep;
      const double num = (up - dn) / (2 * h);
      const double ana = p.grad[i];
      worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6}));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("forward values of elementwise and reduction ops") {
  Tape t;
  Var a = t.constant(Tensor::matrix(2, 2, {1, -2, 3, 0.5}));
  Var b = t.constant(Tensor::matrix(2, 2, {2, 4, -1, 2}));
  CHECK((a + b).value().data()[1] == 2.0);
  CHECK((a - b).value().data()[2] == 4.0);
  CHECK((a * b).value().data()[0] == 2.0);
  CHECK((a / b).value().data()[1] == -0.5);
  CHECK(matmul(a, b).value().at(0, 0) == 1 * 2 + -2 * -1);
  CHECK(matmul(a, b).value().at(1, 1) == 3 * 4 + 0.5 * 2);
  CHECK(sum(a).value().item() == 2.5);
  CHECK(mean(a).value().item() == 0.625);
  CHECK(relu(a).value().data()[1] == 0.0);
  CHECK(transpose(a).value().at(0, 1) == 3.0);
  CHECK(softplus(a).value().data()[0] == doctest::Approx(std::log1p(std::exp(1.0))));
  CHECK(sigmoid(a).value().data()[3] == doctest::Approx(1.0 / (1.0 + std::exp(-0.5))));
  CHECK(slice(a, 1, 2, 0, 2).value().data()[1] == 0.5);
  CHECK(gather_rows(a, {1, 1, 0}).value().at(2, 1) == -2.0);
}

TEST_CASE("softmax rows are distributions and stable for large inputs") {
  Tape t;
  Var a = t.constant(Tensor::matrix(2, 3, {1000, 1001, 1002, -5, 0, 5}));
  const auto& s = softmax_rows(a).value();
  for (std::size_t r = 0; r < 2; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(std::isfinite(s.at(r, c)));
      total += s.at(r, c);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(s.at(0, 2) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0) + std::exp(-2.0))));
}

TEST_CASE("stable scalar helpers") {
  CHECK(stable_sigmoid(-800.0) >= 0.0);
  CHECK(stable_sigmoid(800.0) == 1.0);
  CHECK(stable_softplus(800.0) == 800.0);
  CHECK(stable_softplus(-800.0) >= 0.0);
  CHECK(stable_softplus(0.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("layer norm forward") {
  Tape t;
  Var a = t.constant(Tensor::matrix(1, 4, {1, 2, 3, 4}));
  Var g = t.constant(Tensor::row({1, 1, 2, 1}));
  Var b = t.constant(Tensor::row({0, 0, 0, 10}));
  const auto& y = layer_norm_rows(a, g, b, 0.0).value();
  const double sd = std::sqrt(1.25);
  CHECK(y.data()[0] == doctest::Approx(-1.5 / sd));
  CHECK(y.data()[2] == doctest::Approx(2 * 0.5 / sd));
  CHECK(y.data()[3] == doctest::Approx(10 + 1.5 / sd));
}

TEST_CASE("row-broadcast add") {
  Tape t;
  Var a = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var b = t.constant(Tensor::row({10, 20}));
  const auto& y = add(a, b).value();
  CHECK(y.at(1, 0) == 13.0);
  CHECK(y.at(1, 1) == 24.0);
}

TEST_CASE("shape mismatches raise Shape errors") {
  Tape t;
  Var a = t.constant(Tensor(2, 3));
  Var b = t.constant(Tensor(2, 2));
  auto kind = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  CHECK(kind([&] { matmul(a, b); }) == ErrorKind::Shape);
  CHECK(kind([&] { mul(a, b); }) == ErrorKind::Shape);
  CHECK(kind([&] { slice(a, 0, 3, 0, 1); }) == ErrorKind::Shape);
}

TEST_CASE("every op matches central differences") {
  std::mt19937_64 rng(42);
  auto params = [&](std::initializer_list<std::pair<std::size_t, std::size_t>> shapes, double lo = -1.0,
                    double hi = 1.0) {
    std::vector<Parameter> ps;
    int k = 0;
    for (auto [r, c] : shapes) ps.emplace_back("p" + std::to_string(k++), random_tensor(rng, r, c, lo, hi));
    return ps;
  };
  using Op = std::function<Var(Tape&, std::vector<Var>&)>;
  struct Case {
    const char* name;
    Op op;
    std::vector<Parameter> in;
  };
  std::vector<Case> cases;
  cases.push_back({"matmul", [](Tape&, auto& v) { return matmul(v[0], v[1]); }, params({{3, 4}, {4, 2}})});
  cases.push_back({"add", [](Tape&, auto& v) { return add(v[0], v[1]); }, params({{3, 4}, {3, 4}})});
  cases.push_back({"add_bias", [](Tape&, auto& v) { return add(v[0], v[1]); }, params({{3, 4}, {1, 4}})});
  cases.push_back({"sub", [](Tape&, auto& v) { return sub(v[0], v[1]); }, params({{2, 3}, {2, 3}})});
  cases.push_back({"mul", [](Tape&, auto& v) { return mul(v[0], v[1]); }, params({{2, 3}, {2, 3}})});
  cases.push_back({"div", [](Tape&, auto& v) { return div(v[0], v[1]); }, params({{2, 3}, {2, 3}}, 0.5, 2.0)});
  cases.push_back({"scale_shift", [](Tape&, auto& v) { return shift(scale(v[0], -2.5), 3.0); },
                   params({{2, 3}})});
  cases.push_back({"tanh", [](Tape&, auto& v) { return tanh(v[0]); }, params({{3, 3}})});
  cases.push_back({"sigmoid", [](Tape&, auto& v) { return sigmoid(v[0]); }, params({{3, 3}}, -4, 4)});
  cases.push_back({"relu", [](Tape&, auto& v) { return relu(v[0]); }, params({{3, 3}})});
  cases.push_back({"exp", [](Tape&, auto& v) { return exp(v[0]); }, params({{3, 3}})});
  cases.push_back({"log", [](Tape&, auto& v) { return log(v[0]); }, params({{3, 3}}, 0.2, 3.0)});
  cases.push_back({"softplus", [](Tape&, auto& v) { return softplus(v[0]); }, params({{3, 3}}, -5, 5)});
  cases.push_back({"softmax_rows", [](Tape&, auto& v) { return softmax_rows(v[0]); }, params({{3, 5}}, -3, 3)});
  cases.push_back({"concat_cols",
                   [](Tape&, auto& v) {
                     const std::vector<Var> p{v[0], v[1]};
                     return concat_cols(p);
                   },
                   params({{2, 3}, {2, 1}})});
  cases.push_back({"concat_rows",
                   [](Tape&, auto& v) {
                     const std::vector<Var> p{v[0], v[1]};
                     return concat_rows(p);
                   },
                   params({{1, 3}, {2, 3}})});
  cases.push_back({"slice", [](Tape&, auto& v) { return slice(v[0], 1, 3, 1, 4); }, params({{4, 5}})});
  cases.push_back({"gather_rows", [](Tape&, auto& v) { return gather_rows(v[0], {2, 0, 2}); }, params({{3, 2}})});
  cases.push_back({"transpose", [](Tape&, auto& v) { return transpose(v[0]); }, params({{2, 3}})});
  cases.push_back({"sum", [](Tape&, auto& v) { return sum(v[0]); }, params({{2, 3}})});
  cases.push_back({"mean", [](Tape&, auto& v) { return mean(v[0]); }, params({{2, 3}})});
  cases.push_back({"layer_norm", [](Tape&, auto& v) { return layer_norm_rows(v[0], v[1], v[2]); },
                   params({{3, 5}, {1, 5}, {1, 5}})});
  cases.push_back({"reuse", [](Tape&, auto& v) { return mul(tanh(v[0]), v[0]) + v[0]; }, params({{2, 2}})});

  for (auto& c : cases) {
    CAPTURE(c.name);
    CHECK(max_fd_error(c.op, c.in, rng) < 1e-6);
  }
}

TEST_CASE("backward is linear in the loss") {
  std::mt19937_64 rng(1);
  Parameter w("w", random_tensor(rng, 3, 3));
  const Tensor x = random_tensor(rng, 2, 3);
  auto grad_of = [&](double c) {
    w.zero_grad();
    Tape t;
    Var l = sum(tanh(matmul(t.constant(x), t.parameter(w))));
    t.backward(scale(l, c));
    return w.grad;
  };
  const Tensor g1 = grad_of(1.0);
  const Tensor g3 = grad_of(-3.0);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g3[i] == doctest::Approx(-3.0 * g1[i]).epsilon(1e-13));
}

TEST_CASE("gradients accumulate across backward calls until zeroed") {
  Parameter w("w", Tensor::row({1.0, 2.0}));
  for (int k = 0; k < 2; ++k) {
    Tape t;
    t.backward(sum(t.parameter(w)));
  }
  CHECK(w.grad[0] == 2.0);
  w.zero_grad();
  CHECK(w.grad[1] == 0.0);
}

TEST_CASE("check_gradients agrees on a small network") {
  std::mt19937_64 rng(9);
  ParameterStore store;
  store.add("w1", random_tensor(rng, 3, 4));
  store.add("b1", random_tensor(rng, 1, 4));
  store.add("w2", random_tensor(rng, 4, 1));
  const Tensor x = random_tensor(rng, 5, 3);
  auto loss = [&](Tape& t) {
    Var h = tanh(add(matmul(t.constant(x), t.parameter(store.get("w1"))), t.parameter(store.get("b1"))));
    return mean(softplus(matmul(h, t.parameter(store.get("w2")))));
  };
  const auto ptrs = store.pointers();
  const auto r = check_gradients(loss, ptrs);
  CHECK(r.coordinates == store.scalar_count());
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("checkpoint round trip is exact") {
  std::mt19937_64 rng(4);
  ParameterStore a;
  a.add("w", random_tensor(rng, 3, 2));
  a.add("b", random_tensor(rng, 1, 2));
  const auto path = std::filesystem::temp_directory_path() / "hrbench_ckpt_test.json";
  save_checkpoint(path, a, {{"kind", "demo"}});

  ParameterStore b;
  b.add("w", Tensor(3, 2));
  b.add("b", Tensor(1, 2));
  const auto cfg = load_checkpoint(path, b);
  CHECK(cfg["kind"] == "demo");
  for (std::size_t i = 0; i < 6; ++i) CHECK(b.get("w").value[i] == a.get("w").value[i]);
  CHECK(b.get("b").value[1] == a.get("b").value[1]);

  ParameterStore wrong;
  wrong.add("w", Tensor(2, 3));
  wrong.add("b", Tensor(1, 2));
  CHECK_THROWS_AS(load_checkpoint(path, wrong), Error);
  std::filesystem::remove(path);
}
