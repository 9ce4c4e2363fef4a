// SPDX-License-Identifier: Apache-2.0
//
// Dense 64-bit numeric kernel: vectors, row-major matrices, linear layers and
// MLP stacks with hand-written backward passes, softmax cross-entropy, SGD and
// a central-difference gradient checker.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "uvtranse/rng.hpp"

namespace uvt {

using Vector = std::vector<double>;

class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Tensor2 identity(std::size_t n);
  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(double value);

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A named view of one parameter array and its gradient buffer.
struct ParamRef {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<double> value;
  std::span<double> grad;
};

/// Affine map y = W x + b. The bias is optional (empty when disabled).
struct LinearLayer {
  Tensor2 weight;
  Vector bias;
  Tensor2 grad_weight;
  Vector grad_bias;

  LinearLayer() = default;
  LinearLayer(std::size_t in, std::size_t out, bool with_bias = true);

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
  bool has_bias() const { return !bias.empty(); }

  /// Uniform in +-sqrt(6 / (in + out)), bias zero.
  void init_glorot(Rng& rng);
  void zero_grad();

  Vector forward(std::span<const double> x) const;
  /// Accumulates dL/dW and dL/db for input `x`, returns dL/dx.
  Vector backward(std::span<const double> x, std::span<const double> upstream);

  void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

Vector linear_forward(const LinearLayer& layer, std::span<const double> x);
Vector relu(std::span<const double> x);

/// Numerically stable softmax (max-subtracted). Throws DomainError on empty input.
Vector softmax(std::span<const double> logits);

struct CrossEntropy {
  double loss = 0.0;
  Vector grad_logits;
};

/// loss = -log softmax(logits)[target]; grad = softmax(logits) - onehot(target).
CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t target);

/// Activations cached by Mlp::forward for one input.
struct MlpTrace {
  std::vector<Vector> inputs;  // input to each layer
  std::vector<Vector> pre;     // pre-activation output of each layer
  bool empty() const { return inputs.empty(); }
};

/// Stack of linear layers. ReLU follows every hidden layer; the last layer is
/// linear unless `relu_output` is set. `relu_hidden = false` turns the stack
/// into a composition of affine maps.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<std::size_t>& dims, bool relu_hidden = true, bool relu_output = false);

  std::size_t in() const { return layers_.front().in(); }
  std::size_t out() const { return layers_.back().out(); }
  bool empty() const { return layers_.empty(); }

  std::vector<LinearLayer>& layers() { return layers_; }
  const std::vector<LinearLayer>& layers() const { return layers_; }

  void init_glorot(Rng& rng);
  void zero_grad();

  Vector forward(std::span<const double> x, MlpTrace* trace = nullptr) const;
  /// Throws StateError when `trace` does not come from a forward pass of this net.
  Vector backward(const MlpTrace& trace, std::span<const double> upstream);

  void collect(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  bool activated(std::size_t layer) const;

  std::vector<LinearLayer> layers_;
  bool relu_hidden_ = true;
  bool relu_output_ = false;
};

/// p <- p - lr * g for every parameter, then zeroes the gradients.
/// Throws TrainingError naming the parameter if any gradient is non-finite.
void sgd_step(std::span<const ParamRef> params, double lr);
void zero_grads(std::span<const ParamRef> params);
std::size_t parameter_count(std::span<const ParamRef> params);

struct GradReport {
  double max_rel_error = 0.0;
  std::string param_name;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Objective evaluated at the current parameter values. When `backprop` is
/// true it must also leave the exact gradient in the ParamRef grad buffers
/// (zeroed beforehand by the checker).
using Objective = std::function<double(bool backprop)>;

/// Compares analytic gradients against central differences with step `h` on a
/// seeded random subset of `samples` scalar parameters (all of them when the
/// model is smaller). Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradReport gradient_check(std::span<const ParamRef> params, const Objective& objective,
                          std::uint64_t seed, std::size_t samples = 128, double h = 1e-5);

// Small vector helpers shared by the model code.
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
Vector concat(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> a);
std::size_t argmax(std::span<const double> a);

}  // namespace uvt
