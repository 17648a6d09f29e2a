// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors
//
// Define-by-run reverse-mode differentiation over dense row-major matrices.
// A Tape is built fresh for every forward pass; nodes are appended in
// evaluation order, so reverse index order is a valid backward schedule.

#pragma once

#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace hrbench::ad {

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor(1, 1, value); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor row(std::vector<double> data);
  static Tensor column(std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_string() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const;

  void fill(double value);

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) { zero_grad(); }
  void zero_grad() { grad = Tensor(value.shape(), std::vector<double>(value.size(), 0.0)); }
};

/// Named parameters with stable addresses and insertion-ordered iteration.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor init);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }
  std::vector<Parameter*> pointers();
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::deque<Parameter> params_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter; backward() adds into parameter.grad.
  Var parameter(Parameter& param);

  /// Reverse sweep from a scalar loss. Gradients accumulate into every
  /// parameter bound on this tape; unreachable ones receive nothing.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, allocated (zeroed) on first use.
  Tensor& grad(std::size_t id);
  std::size_t size() const { return nodes_.size(); }

  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// --- forward ops -----------------------------------------------------------
// All operands are rank-2. Shapes must match exactly, except add() which also
// accepts an (m x n) + (1 x n) row-broadcast bias.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double factor);
Var shift(Var a, double offset);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
Var softmax_rows(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice(Var a, std::size_t row_begin, std::size_t row_end, std::size_t col_begin,
          std::size_t col_end);
Var gather_rows(Var a, std::vector<std::size_t> rows);
Var transpose(Var a);
Var sum(Var a);
Var mean(Var a);
/// Per-row normalization followed by (1 x n) gain and bias.
Var layer_norm_rows(Var a, Var gain, Var bias, double eps = 1e-5);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator+(Var a, double c) { return shift(a, c); }
inline Var operator+(double c, Var a) { return shift(a, c); }
inline Var operator-(double c, Var a) { return shift(scale(a, -1.0), c); }
inline Var operator-(Var a) { return scale(a, -1.0); }

// Plain scalar helpers shared with non-tape code.
double stable_sigmoid(double x);
double stable_softplus(double x);

// --- verification ----------------------------------------------------------

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares backward() against central differences for every coordinate of
/// every parameter. Relative error is |a - n| / max(|a|, |n|, floor); the
/// floor keeps coordinates whose true gradient is ~0 from comparing
/// difference-quotient roundoff against itself.
GradCheckResult check_gradients(const std::function<Var(Tape&)>& loss_fn,
                                std::span<Parameter* const> params, double epsilon = 1e-4,
                                double floor = 1e-8);

// --- checkpoints -------------------------------------------------------------

/// JSON `{"config": ..., "params": {name: {"shape": [...], "data": [...]}}}`
/// with every value printed to 17 significant digits.
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const nlohmann::ordered_json& config);
/// Loads values into an existing store; names and shapes must match.
nlohmann::json load_checkpoint(const std::filesystem::path& path, ParameterStore& params);

}  // namespace hrbench::ad
