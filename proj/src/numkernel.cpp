// SPDX-License-Identifier: Apache-2.0
#include "uvtranse/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uvtranse/errors.hpp"

namespace uvt {

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor2 t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Tensor2::from_rows: ragged rows");
    std::copy(row.begin(), row.end(), t.row(i++).begin());
  }
  return t;
}

void Tensor2::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

LinearLayer::LinearLayer(std::size_t in, std::size_t out, bool with_bias)
    : weight(out, in), grad_weight(out, in) {
  if (with_bias) {
    bias.assign(out, 0.0);
    grad_bias.assign(out, 0.0);
  }
}

void LinearLayer::init_glorot(Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in() + out()));
  for (double& w : weight.data()) w = rng.uniform(-limit, limit);
  std::fill(bias.begin(), bias.end(), 0.0);
}

void LinearLayer::zero_grad() {
  grad_weight.fill(0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
}

Vector LinearLayer::forward(std::span<const double> x) const {
  if (x.size() != in()) {
    throw ShapeError("linear_forward: input has " + std::to_string(x.size()) +
                     " entries, layer expects " + std::to_string(in()));
  }
  Vector y(out());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto w = weight.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * x[j];
    y[i] = has_bias() ? acc + bias[i] : acc;
  }
  return y;
}

Vector LinearLayer::backward(std::span<const double> x, std::span<const double> upstream) {
  if (x.size() != in() || upstream.size() != out()) {
    throw ShapeError("LinearLayer::backward: shape mismatch");
  }
  Vector dx(in(), 0.0);
  for (std::size_t i = 0; i < out(); ++i) {
    const double g = upstream[i];
    if (g == 0.0) continue;
    auto gw = grad_weight.row(i);
    const auto w = weight.row(i);
    for (std::size_t j = 0; j < gw.size(); ++j) {
      gw[j] += g * x[j];
      dx[j] += g * w[j];
    }
    if (has_bias()) grad_bias[i] += g;
  }
  return dx;
}

void LinearLayer::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", {weight.rows(), weight.cols()}, weight.data(), grad_weight.data()});
  if (has_bias()) out.push_back({prefix + ".bias", {bias.size()}, bias, grad_bias});
}

Vector linear_forward(const LinearLayer& layer, std::span<const double> x) { return layer.forward(x); }

Vector relu(std::span<const double> x) {
  Vector y(x.begin(), x.end());
  for (double& v : y) v = v > 0.0 ? v : 0.0;
  return y;
}

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) throw DomainError("softmax: empty input");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) {
    throw IndexError("softmax_cross_entropy: target " + std::to_string(target) +
                     " out of range for " + std::to_string(logits.size()) + " classes");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double log_z = m + std::log(z);
  CrossEntropy ce;
  ce.loss = log_z - logits[target];
  ce.grad_logits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) ce.grad_logits[i] = std::exp(logits[i] - log_z);
  ce.grad_logits[target] -= 1.0;
  return ce;
}

Mlp::Mlp(const std::vector<std::size_t>& dims, bool relu_hidden, bool relu_output)
    : relu_hidden_(relu_hidden), relu_output_(relu_output) {
  if (dims.size() < 2) throw ShapeError("Mlp needs at least an input and an output size");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (dims[i] == 0 || dims[i + 1] == 0) throw ShapeError("Mlp: zero-sized layer");
    layers_.emplace_back(dims[i], dims[i + 1]);
  }
}

bool Mlp::activated(std::size_t layer) const {
  return layer + 1 == layers_.size() ? relu_output_ : relu_hidden_;
}

void Mlp::init_glorot(Rng& rng) {
  for (auto& l : layers_) l.init_glorot(rng);
}

void Mlp::zero_grad() {
  for (auto& l : layers_) l.zero_grad();
}

Vector Mlp::forward(std::span<const double> x, MlpTrace* trace) const {
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  Vector h(x.begin(), x.end());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Vector pre = layers_[i].forward(h);
    Vector next = activated(i) ? relu(pre) : pre;
    if (trace) {
      trace->inputs.push_back(std::move(h));
      trace->pre.push_back(std::move(pre));
    }
    h = std::move(next);
  }
  return h;
}

Vector Mlp::backward(const MlpTrace& trace, std::span<const double> upstream) {
  if (trace.empty() || trace.inputs.size() != layers_.size()) {
    throw StateError("Mlp::backward called without a matching forward pass");
  }
  Vector g(upstream.begin(), upstream.end());
  for (std::size_t k = layers_.size(); k-- > 0;) {
    if (activated(k)) {
      const Vector& pre = trace.pre[k];
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (pre[i] <= 0.0) g[i] = 0.0;
      }
    }
    g = layers_[k].backward(trace.inputs[k], g);
  }
  return g;
}

void Mlp::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(prefix + "." + std::to_string(i), out);
  }
}

void sgd_step(std::span<const ParamRef> params, double lr) {
  if (!(lr > 0.0)) throw DomainError("sgd_step: learning rate must be positive");
  for (const auto& p : params) {
    if (p.value.size() != p.grad.size()) throw ShapeError("sgd_step: shape mismatch in " + p.name);
    if (!all_finite(p.grad)) throw TrainingError("non-finite gradient in parameter " + p.name);
  }
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      p.value[i] -= lr * p.grad[i];
      p.grad[i] = 0.0;
    }
  }
}

void zero_grads(std::span<const ParamRef> params) {
  for (const auto& p : params) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

std::size_t parameter_count(std::span<const ParamRef> params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

GradReport gradient_check(std::span<const ParamRef> params, const Objective& objective,
                          std::uint64_t seed, std::size_t samples, double h) {
  zero_grads(params);
  objective(true);

  // Flat index of every scalar parameter, then a seeded subset.
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].value.size(); ++i) all.emplace_back(p, i);
  }
  Rng rng(seed);
  if (all.size() > samples) {
    // Partial Fisher-Yates: the first `samples` entries form the subset.
    for (std::size_t i = 0; i < samples; ++i) {
      const std::size_t j = i + rng.below(all.size() - i);
      std::swap(all[i], all[j]);
    }
    all.resize(samples);
  }

  GradReport report;
  for (const auto& [p, i] : all) {
    const double analytic = params[p].grad[i];
    double& v = params[p].value[i];
    const double saved = v;
    v = saved + h;
    const double plus = objective(false);
    v = saved - h;
    const double minus = objective(false);
    v = saved;
    const double numeric = (plus - minus) / (2.0 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic - numeric) / denom;
    ++report.checked;
    if (rel > report.max_rel_error || report.param_name.empty()) {
      report.max_rel_error = rel;
      report.param_name = params[p].name + "[" + std::to_string(i) + "]";
      report.analytic = analytic;
      report.numeric = numeric;
    }
  }
  zero_grads(params);
  return report;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

Vector concat(std::span<const double> a, std::span<const double> b) {
  Vector out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

std::size_t argmax(std::span<const double> a) {
  if (a.empty()) throw DomainError("argmax: empty input");
  return static_cast<std::size_t>(std::max_element(a.begin(), a.end()) - a.begin());
}

}  // namespace uvt
