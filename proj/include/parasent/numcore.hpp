#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "parasent/matrix.hpp"

namespace parasent {

using Rng = std::mt19937_64;

inline constexpr double kDefaultLeakySlope = 0.01;

// ---------------------------------------------------------------------------
// Activations

template <class T>
T leaky_relu(T x, double slope = kDefaultLeakySlope) {
  return x >= T{0} ? x : static_cast<T>(slope * x);
}

template <class T>
T leaky_relu_grad(T x, double slope = kDefaultLeakySlope) {
  return x >= T{0} ? T{1} : static_cast<T>(slope);
}

// Branches on sign so exp() never overflows.
template <class T>
T sigmoid(T x) {
  if (x >= T{0}) {
    return static_cast<T>(1.0 / (1.0 + std::exp(-double(x))));
  }
  const double e = std::exp(double(x));
  return static_cast<T>(e / (1.0 + e));
}

// Derivative expressed through the sigmoid output y.
template <class T>
T sigmoid_grad_from_output(T y) {
  return y * (T{1} - y);
}

// ---------------------------------------------------------------------------
// Initialization

template <class T = float>
BasicMatrix<T> uniform_init(std::size_t rows, std::size_t cols, double low, double high,
                            Rng& rng) {
  if (!(low < high)) throw std::invalid_argument("uniform_init: low must be < high");
  std::uniform_real_distribution<double> dist(low, high);
  BasicMatrix<T> m(rows, cols);
  for (auto& v : m.values()) v = static_cast<T>(dist(rng));
  return m;
}

template <class T = float>
BasicMatrix<T> uniform_init(std::size_t rows, std::size_t cols, double low, double high,
                            std::uint64_t seed) {
  Rng rng(seed);
  return uniform_init<T>(rows, cols, low, high, rng);
}

inline double xavier_bound(std::size_t rows, std::size_t cols) {
  return std::sqrt(6.0 / double(rows + cols));
}

// Glorot uniform.
template <class T = float>
BasicMatrix<T> xavier_init(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("xavier_init: empty shape");
  const double b = xavier_bound(rows, cols);
  return uniform_init<T>(rows, cols, -b, b, rng);
}

template <class T = float>
BasicMatrix<T> xavier_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  return xavier_init<T>(rows, cols, rng);
}

// ---------------------------------------------------------------------------
// Parameters and Adam

template <class T>
using Gradients = std::vector<BasicMatrix<T>>;

// Named parameters plus Adam moments. Indices are stable once added.
template <class T>
class ParameterSet {
 public:
  std::size_t add(std::string name, BasicMatrix<T> value) {
    if (find(name)) throw std::invalid_argument("duplicate parameter: " + name);
    names_.push_back(std::move(name));
    first_.emplace_back(value.rows(), value.cols());
    second_.emplace_back(value.rows(), value.cols());
    values_.push_back(std::move(value));
    return values_.size() - 1;
  }

  std::size_t size() const { return values_.size(); }
  BasicMatrix<T>& operator[](std::size_t i) { return values_[i]; }
  const BasicMatrix<T>& operator[](std::size_t i) const { return values_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    return std::nullopt;
  }
  BasicMatrix<T>& at(const std::string& name) {
    auto i = find(name);
    if (!i) throw std::out_of_range("no parameter named " + name);
    return values_[*i];
  }
  const BasicMatrix<T>& at(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->at(name);
  }

  const BasicMatrix<T>& first_moment(std::size_t i) const { return first_[i]; }
  const BasicMatrix<T>& second_moment(std::size_t i) const { return second_[i]; }
  std::uint64_t step() const { return step_; }

  Gradients<T> zero_gradients() const {
    Gradients<T> g;
    g.reserve(values_.size());
    for (const auto& v : values_) g.emplace_back(v.rows(), v.cols());
    return g;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  // Values only; optimizer state starts fresh in the new precision.
  template <class U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (std::size_t i = 0; i < values_.size(); ++i)
      out.add(names_[i], values_[i].template cast<U>());
    return out;
  }

  // Optimizer access.
  BasicMatrix<T>& first_moment_mut(std::size_t i) { return first_[i]; }
  BasicMatrix<T>& second_moment_mut(std::size_t i) { return second_[i]; }
  std::uint64_t advance_step() { return ++step_; }

 private:
  std::vector<std::string> names_;
  std::vector<BasicMatrix<T>> values_;
  std::vector<BasicMatrix<T>> first_;
  std::vector<BasicMatrix<T>> second_;
  std::uint64_t step_ = 0;
};

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam; moment arithmetic in double.
template <class T>
void adam_step(ParameterSet<T>& params, const Gradients<T>& grads, const AdamConfig& cfg) {
  if (grads.size() != params.size())
    throw std::invalid_argument("adam_step: gradient count does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].same_shape(params[i]))
      throw std::invalid_argument(
          "adam_step: gradient shape " + shape_string(grads[i].rows(), grads[i].cols()) +
          " does not match parameter " + params.name(i) + " " +
          shape_string(params[i].rows(), params[i].cols()));
  }
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("adam_step: lr must be > 0");

  const double t = double(params.advance_step());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i];
    auto& m = params.first_moment_mut(i);
    auto& v = params.second_moment_mut(i);
    const auto& g = grads[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      const double mk = cfg.beta1 * double(m[k]) + (1.0 - cfg.beta1) * gk;
      const double vk = cfg.beta2 * double(v[k]) + (1.0 - cfg.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      if (mk == 0.0) continue;
      const double update = cfg.learning_rate * (mk / c1) / (std::sqrt(vk / c2) + cfg.epsilon);
      w[k] = static_cast<T>(double(w[k]) - update);
    }
  }
}

// ---------------------------------------------------------------------------
// Variational dropout

// One mask per sequence, applied unchanged at every time step.
template <class T>
struct DropoutMask {
  std::vector<T> scale;  // each entry is 0 or 1/keep_prob
  double keep_prob = 1.0;

  static DropoutMask ones(std::size_t n) { return {std::vector<T>(n, T{1}), 1.0}; }
};

template <class T = float>
DropoutMask<T> make_variational_mask(std::size_t n, double keep_prob, Rng& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0))
    throw std::invalid_argument("keep_prob must be in (0, 1]");
  if (keep_prob == 1.0) return DropoutMask<T>::ones(n);
  std::bernoulli_distribution keep(keep_prob);
  DropoutMask<T> mask{std::vector<T>(n), keep_prob};
  const T kept = static_cast<T>(1.0 / keep_prob);
  for (auto& s : mask.scale) s = keep(rng) ? kept : T{0};
  return mask;
}

template <class T = float>
DropoutMask<T> make_variational_mask(std::size_t n, double keep_prob, std::uint64_t seed) {
  Rng rng(seed);
  return make_variational_mask<T>(n, keep_prob, rng);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checker

// Evaluates the loss at the given parameters; fills grads when non-null.
using Objective = std::function<double(ParameterSet<double>&, Gradients<double>*)>;

struct GradCheckOptions {
  double epsilon = 1e-6;
  std::size_t max_coords_per_param = 200;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

double relative_error(double analytic, double numeric);

// Central differences on a deterministic sample of coordinates per parameter.
// When analytic_override is given it replaces the gradient computed by f,
// which lets tests inject faults.
GradCheckResult gradient_check(const Objective& f, ParameterSet<double>& params,
                               const GradCheckOptions& opts = {},
                               const Gradients<double>* analytic_override = nullptr);

}  // namespace parasent
