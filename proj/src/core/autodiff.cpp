// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include "autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "error.hpp"

namespace hrbench::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}
MutMap view(Tensor& t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  fail(ErrorKind::Shape,
       fmt::format("{}: incompatible shapes {} and {}", op, a.shape_string(), b.shape_string()));
}

void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2) fail(ErrorKind::Shape, fmt::format("{}: expected rank-2 operand, got {}", op, a.shape_string()));
}

Tape& tape_of(Var a) {
  require(a.tape() != nullptr, ErrorKind::ContractViolation, "operation on an unbound Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  require(a.tape() != nullptr && a.tape() == b.tape(), ErrorKind::ContractViolation,
          "operands live on different tapes");
  return *a.tape();
}

// Elementwise unary op; `deriv(x, y)` is dy/dx given input x and output y.
template <class Fwd, class Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape(), std::vector<double>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  const auto ia = a.id();
  return tape.record(std::move(y), {ia},
                     [ia, deriv](Tape& t, const Tensor& out, const Tensor& g) {
                       if (!t.requires_grad(ia)) return;
                       const Tensor& xv = t.value(ia);
                       Tensor& ga = t.grad(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(xv[i], out[i]);
                     });
}

}  // namespace

// --- Tensor --------------------------------------------------------------------

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const auto n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  if (n != data_.size())
    fail(ErrorKind::Shape,
         fmt::format("tensor data length {} does not match shape {}", data_.size(), shape_string()));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::row(std::vector<double> data) {
  const auto n = data.size();
  return Tensor({1, n}, std::move(data));
}

Tensor Tensor::column(std::vector<double> data) {
  const auto n = data.size();
  return Tensor({n, 1}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) fail(ErrorKind::Shape, "rows() on tensor of shape " + shape_string());
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) fail(ErrorKind::Shape, "cols() on tensor of shape " + shape_string());
  return shape_[1];
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) s += (i ? "," : "") + std::to_string(shape_[i]);
  return s + "]";
}

double Tensor::item() const {
  require(size() == 1, ErrorKind::Shape, "item() on tensor of shape " + shape_string());
  return data_[0];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

// --- ParameterStore ----------------------------------------------------------------

Parameter& ParameterStore::add(std::string name, Tensor init) {
  require(!contains(name), ErrorKind::InvalidInput, "duplicate parameter '" + name + "'");
  return params_.emplace_back(std::move(name), std::move(init));
}

Parameter& ParameterStore::get(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  fail(ErrorKind::InvalidInput, "unknown parameter '" + std::string(name) + "'");
}

const Parameter& ParameterStore::get(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  fail(ErrorKind::InvalidInput, "unknown parameter '" + std::string(name) + "'");
}

bool ParameterStore::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p.name == name; });
}

std::vector<Parameter*> ParameterStore::pointers() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

// --- Tape ------------------------------------------------------------------------

const Tensor& Var::value() const {
  require(tape_ != nullptr, ErrorKind::ContractViolation, "value() on an unbound Var");
  return tape_->value(id_);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& param) {
  nodes_.push_back(Node{param.value, {}, {}, {}, &param, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  const bool needs =
      std::any_of(inputs.begin(), inputs.end(), [&](std::size_t i) { return nodes_[i].requires_grad; });
  Node node{std::move(value), {}, std::move(inputs), {}, nullptr, needs};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size() || !n.grad.same_shape(n.value))
    n.grad = Tensor(n.value.shape(), std::vector<double>(n.value.size(), 0.0));
  return n.grad;
}

void Tape::backward(Var loss) {
  require(loss.tape() == this, ErrorKind::ContractViolation, "loss was not produced on this tape");
  const std::size_t root = loss.id();
  require(nodes_[root].value.size() == 1, ErrorKind::ContractViolation,
          "backward() needs a scalar loss, got shape " + nodes_[root].value.shape_string());
  for (auto& n : nodes_) n.grad = Tensor();
  grad(root)[0] = 1.0;
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.value, n.grad);
    if (n.param != nullptr) {
      auto& pg = n.param->grad;
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    }
  }
}

// --- ops ----------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  require_matrix("matmul", x);
  require_matrix("matmul", w);
  if (x.cols() != w.rows()) shape_error("matmul", x, w);
  Tensor y(x.rows(), w.cols());
  view(y).noalias() = view(x) * view(w);
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(y), {ia, ib}, [ia, ib](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(ia)) view(t.grad(ia)).noalias() += view(g) * view(t.value(ib)).transpose();
    if (t.requires_grad(ib)) view(t.grad(ib)).noalias() += view(t.value(ia)).transpose() * view(g);
  });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  require_matrix("add", x);
  require_matrix("add", z);
  if (x.same_shape(z)) {
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += z[i];
    const auto ia = a.id(), ib = b.id();
    return tape.record(std::move(y), {ia, ib}, [ia, ib](Tape& t, const Tensor&, const Tensor& g) {
      for (auto id : {ia, ib}) {
        if (!t.requires_grad(id)) continue;
        Tensor& gi = t.grad(id);
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
      }
    });
  }
  // (m x n) + (1 x n), in either argument order
  if (x.rows() == 1 && z.rows() != 1 && x.cols() == z.cols()) return add(b, a);
  if (z.rows() != 1 || z.cols() != x.cols()) shape_error("add", x, z);
  Tensor y = x;
  const std::size_t m = x.rows(), n = x.cols();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) y[r * n + c] += z[c];
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(y), {ia, ib}, [ia, ib, m, n](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  if (!x.same_shape(z)) shape_error("sub", x, z);
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= z[i];
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(y), {ia, ib}, [ia, ib](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  if (!x.same_shape(z)) shape_error("mul", x, z);
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= z[i];
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(y), {ia, ib}, [ia, ib](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad(ia);
      const Tensor& zv = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * zv[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      const Tensor& xv = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xv[i];
    }
  });
}

Var div(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  if (!x.same_shape(z)) shape_error("div", x, z);
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= z[i];
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(y), {ia, ib}, [ia, ib](Tape& t, const Tensor& out, const Tensor& g) {
    const Tensor& zv = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / zv[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * out[i] / zv[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var shift(Var a, double offset) {
  return unary(a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softplus(Var a) {
  return unary(a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Var softmax_rows(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  require_matrix("softmax_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y(m, n);
  for (std::size_t r = 0; r < m; ++r) {
    const double* xr = &x[r * n];
    double* yr = &y[r * n];
    const double mx = *std::max_element(xr, xr + n);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) total += (yr[c] = std::exp(xr[c] - mx));
    for (std::size_t c = 0; c < n; ++c) yr[c] /= total;
  }
  const auto ia = a.id();
  return tape.record(std::move(y), {ia}, [ia, m, n](Tape& t, const Tensor& out, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < m; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += g[r * n + c] * out[r * n + c];
      for (std::size_t c = 0; c < n; ++c) ga[r * n + c] += out[r * n + c] * (g[r * n + c] - dot);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::Shape, "concat_cols: no operands");
  Tape& tape = tape_of(parts.front());
  const std::size_t m = parts.front().value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> ids, widths;
  for (const auto& p : parts) {
    tape_of(parts.front(), p);
    const Tensor& v = p.value();
    if (v.rows() != m) shape_error("concat_cols", parts.front().value(), v);
    ids.push_back(p.id());
    widths.push_back(v.cols());
    total += v.cols();
  }
  Tensor y(m, total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < m; ++r)
      std::copy_n(&v[r * v.cols()], v.cols(), &y[r * total + offset]);
    offset += v.cols();
  }
  return tape.record(std::move(y), ids, [ids, widths, m, total](Tape& t, const Tensor&, const Tensor& g) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) {
        Tensor& gk = t.grad(ids[k]);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) gk[r * widths[k] + c] += g[r * total + offset + c];
      }
      offset += widths[k];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::Shape, "concat_rows: no operands");
  Tape& tape = tape_of(parts.front());
  const std::size_t n = parts.front().value().cols();
  std::size_t total = 0;
  std::vector<std::size_t> ids, sizes;
  for (const auto& p : parts) {
    tape_of(parts.front(), p);
    const Tensor& v = p.value();
    if (v.cols() != n) shape_error("concat_rows", parts.front().value(), v);
    ids.push_back(p.id());
    sizes.push_back(v.size());
    total += v.rows();
  }
  Tensor y(total, n);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.data().begin(), v.data().end(), y.data().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += v.size();
  }
  return tape.record(std::move(y), ids, [ids, sizes](Tape& t, const Tensor&, const Tensor& g) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) {
        Tensor& gk = t.grad(ids[k]);
        for (std::size_t i = 0; i < sizes[k]; ++i) gk[i] += g[offset + i];
      }
      offset += sizes[k];
    }
  });
}

Var slice(Var a, std::size_t row_begin, std::size_t row_end, std::size_t col_begin,
          std::size_t col_end) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  require_matrix("slice", x);
  if (row_begin >= row_end || row_end > x.rows() || col_begin >= col_end || col_end > x.cols())
    fail(ErrorKind::Shape, fmt::format("slice [{}:{}, {}:{}] out of range for {}", row_begin,
                                       row_end, col_begin, col_end, x.shape_string()));
  const std::size_t m = row_end - row_begin, n = col_end - col_begin, stride = x.cols();
  Tensor y(m, n);
  for (std::size_t r = 0; r < m; ++r)
    std::copy_n(&x[(row_begin + r) * stride + col_begin], n, &y[r * n]);
  const auto ia = a.id();
  return tape.record(std::move(y), {ia},
                     [ia, row_begin, col_begin, m, n, stride](Tape& t, const Tensor&, const Tensor& g) {
                       if (!t.requires_grad(ia)) return;
                       Tensor& ga = t.grad(ia);
                       for (std::size_t r = 0; r < m; ++r)
                         for (std::size_t c = 0; c < n; ++c)
                           ga[(row_begin + r) * stride + col_begin + c] += g[r * n + c];
                     });
}

Var gather_rows(Var a, std::vector<std::size_t> rows) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  require_matrix("gather_rows", x);
  require(!rows.empty(), ErrorKind::Shape, "gather_rows: empty row list");
  const std::size_t n = x.cols();
  Tensor y(rows.size(), n);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= x.rows())
      fail(ErrorKind::Shape, fmt::format("gather_rows: row {} out of range for {}", rows[k], x.shape_string()));
    std::copy_n(&x[rows[k] * n], n, &y[k * n]);
  }
  const auto ia = a.id();
  return tape.record(std::move(y), {ia}, [ia, rows = std::move(rows), n](Tape& t, const Tensor&, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad(ia);
    for (std::size_t k = 0; k < rows.size(); ++k)
      for (std::size_t c = 0; c < n; ++c) ga[rows[k] * n + c] += g[k * n + c];
  });
}

Var transpose(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  require_matrix("transpose", x);
  Tensor y(x.cols(), x.rows());
  view(y) = view(x).transpose();
  const auto ia = a.id();
  return tape.record(std::move(y), {ia}, [ia](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(ia)) view(t.grad(ia)) += view(g).transpose();
  });
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  double total = 0.0;
  for (double v : x.data()) total += v;
  const auto ia = a.id();
  return tape.record(Tensor::scalar(total), {ia}, [ia](Tape& t, const Tensor&, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  require(n > 0, ErrorKind::Shape, "mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var layer_norm_rows(Var a, Var gain, Var bias, double eps) {
  Tape& tape = tape_of(a, gain);
  tape_of(a, bias);
  const Tensor& x = a.value();
  require_matrix("layer_norm_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.value().rows() != 1 || gain.value().cols() != n) shape_error("layer_norm_rows", x, gain.value());
  if (!bias.value().same_shape(gain.value())) shape_error("layer_norm_rows", x, bias.value());

  Tensor xhat(m, n);
  std::vector<double> inv_std(m);
  for (std::size_t r = 0; r < m; ++r) {
    const double* xr = &x[r * n];
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += xr[c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) xhat[r * n + c] = (xr[c] - mu) * inv_std[r];
  }
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor y(m, n);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) y[r * n + c] = xhat[r * n + c] * gv[c] + bv[c];

  const auto ia = a.id(), ig = gain.id(), ib = bias.id();
  return tape.record(
      std::move(y), {ia, ig, ib},
      [ia, ig, ib, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& gv = t.value(ig);
        if (t.requires_grad(ia)) {
          Tensor& ga = t.grad(ia);
          const double nn = static_cast<double>(n);
          for (std::size_t r = 0; r < m; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
              const double d = g[r * n + c] * gv[c];
              s1 += d;
              s2 += d * xhat[r * n + c];
            }
            for (std::size_t c = 0; c < n; ++c) {
              const double d = g[r * n + c] * gv[c];
              ga[r * n + c] += inv_std[r] / nn * (nn * d - s1 - xhat[r * n + c] * s2);
            }
          }
        }
        if (t.requires_grad(ig)) {
          Tensor& gg = t.grad(ig);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) gg[c] += g[r * n + c] * xhat[r * n + c];
        }
        if (t.requires_grad(ib)) {
          Tensor& gb = t.grad(ib);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
        }
      });
}

// --- verification ----------------------------------------------------------------

GradCheckResult check_gradients(const std::function<Var(Tape&)>& loss_fn,
                                std::span<Parameter* const> params, double epsilon,
                                double floor) {
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss_fn(tape));
  }
  auto evaluate = [&]() {
    Tape tape;
    return loss_fn(tape).value().item();
  };

  GradCheckResult result;
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + epsilon;
      const double up = evaluate();
      p->value[i] = saved - epsilon;
      const double down = evaluate();
      p->value[i] = saved;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.coordinates;
      if (result.worst_parameter.empty() || rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = p->name;
        result.worst_index = i;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

// --- checkpoints -----------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const nlohmann::ordered_json& config) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write checkpoint " + path.string());
  out << "{\n  \"config\": " << config.dump() << ",\n  \"params\": {";
  bool first = true;
  for (const auto& p : params.all()) {
    out << (first ? "\n" : ",\n") << "    " << nlohmann::json(p.name).dump() << ": {\"shape\": [";
    first = false;
    for (std::size_t i = 0; i < p.value.shape().size(); ++i) out << (i ? ", " : "") << p.value.shape()[i];
    out << "], \"data\": [";
    for (std::size_t i = 0; i < p.value.size(); ++i) out << (i ? ", " : "") << fmt::format("{:.17g}", p.value[i]);
    out << "]}";
  }
  out << "\n  }\n}\n";
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, ParameterStore& params) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    const auto& stored = j.at("params");
    require(stored.size() == params.all().size(), ErrorKind::InvalidInput,
            "checkpoint parameter count does not match the model");
    for (auto& p : params.all()) {
      const auto& entry = stored.at(p.name);
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      require(shape == p.value.shape(), ErrorKind::Shape,
              "checkpoint shape mismatch for '" + p.name + "'");
      auto data = entry.at("data").get<std::vector<double>>();
      p.value = Tensor(shape, std::move(data));
      p.zero_grad();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
  return j.at("config");
}

}  // namespace hrbench::ad
