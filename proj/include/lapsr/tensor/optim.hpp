#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/tensor/tensor.hpp"

namespace lapsr {

template <class T>
struct NamedTensor {
  std::string name;
  Tensor<T> value;
};

namespace detail {

template <class T>
void check_step_args(const std::vector<NamedTensor<T>>& params, const std::vector<NamedTensor<T>>& bound) {
  if (params.size() != bound.size())
    throw ConfigError("optimizer bound to " + std::to_string(bound.size()) + " parameters, got " +
                      std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != bound[i].name || params[i].value.shape() != bound[i].value.shape())
      throw ConfigError("optimizer state does not match parameter '" + params[i].name + "'");
    if (!params[i].value.has_grad())
      throw AutogradError("missing gradient for parameter '" + params[i].name + "'");
  }
}

}  // namespace detail

// Classic SGD with momentum and L2 weight decay:
//   v <- momentum * v + grad + weight_decay * param
//   param <- param - lr * v
template <class T>
class SgdMomentum {
 public:
  struct Options {
    double learning_rate = 1e-5;
    double momentum = 0.9;
    double weight_decay = 1e-4;
  };

  SgdMomentum(const std::vector<NamedTensor<T>>& params, Options options) : options_(options) {
    if (!(options.learning_rate > 0)) throw ConfigError("learning rate must be > 0");
    if (!(options.momentum >= 0 && options.momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(options.weight_decay >= 0)) throw ConfigError("weight decay must be >= 0");
    velocity_.reserve(params.size());
    for (const auto& p : params) velocity_.push_back({p.name, Tensor<T>(p.value.shape())});
  }

  void set_learning_rate(double lr) {
    if (!(lr > 0)) throw ConfigError("learning rate must be > 0");
    options_.learning_rate = lr;
  }
  const Options& options() const { return options_; }

  std::vector<NamedTensor<T>>& velocity() { return velocity_; }
  const std::vector<NamedTensor<T>>& velocity() const { return velocity_; }
  std::vector<NamedTensor<T>>& state() { return velocity_; }

  // Applies one update to every parameter and clears their gradients. All
  // gradients are validated before any parameter is touched.
  void step(std::vector<NamedTensor<T>>& params) {
    detail::check_step_args(params, velocity_);
    const T mu = static_cast<T>(options_.momentum);
    const T wd = static_cast<T>(options_.weight_decay);
    const T lr = static_cast<T>(options_.learning_rate);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params[i].value.data();
      auto g = params[i].value.grad();
      auto v = velocity_[i].value.data();
      for (std::size_t j = 0; j < p.size(); ++j) {
        v[j] = mu * v[j] + g[j] + wd * p[j];
        p[j] -= lr * v[j];
      }
      params[i].value.clear_grad();
    }
  }

 private:
  Options options_;
  std::vector<NamedTensor<T>> velocity_;
};

// Adam with L2 weight decay folded into the gradient:
//   g <- grad + weight_decay * param
//   m <- beta1 * m + (1 - beta1) * g
//   v <- beta2 * v + (1 - beta2) * g^2
//   param <- param - lr * m_hat / (sqrt(v_hat) + epsilon)
// with the usual bias corrections m_hat = m / (1 - beta1^t), v_hat = v / (1 - beta2^t).
template <class T>
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
  };

  Adam(const std::vector<NamedTensor<T>>& params, Options options) : options_(options) {
    if (!(options.learning_rate > 0)) throw ConfigError("learning rate must be > 0");
    if (!(options.beta1 >= 0 && options.beta1 < 1)) throw ConfigError("beta1 must lie in [0, 1)");
    if (!(options.beta2 >= 0 && options.beta2 < 1)) throw ConfigError("beta2 must lie in [0, 1)");
    if (!(options.epsilon > 0)) throw ConfigError("adam epsilon must be > 0");
    if (!(options.weight_decay >= 0)) throw ConfigError("weight decay must be >= 0");
    moments_.reserve(2 * params.size());
    for (const auto& p : params) moments_.push_back({"m/" + p.name, Tensor<T>(p.value.shape())});
    for (const auto& p : params) moments_.push_back({"v/" + p.name, Tensor<T>(p.value.shape())});
  }

  void set_learning_rate(double lr) {
    if (!(lr > 0)) throw ConfigError("learning rate must be > 0");
    options_.learning_rate = lr;
  }
  const Options& options() const { return options_; }

  // First moments for every parameter, then second moments.
  std::vector<NamedTensor<T>>& state() { return moments_; }
  std::uint64_t steps() const { return steps_; }
  void set_steps(std::uint64_t t) { steps_ = t; }

  void step(std::vector<NamedTensor<T>>& params) {
    const std::size_t n = moments_.size() / 2;
    std::vector<NamedTensor<T>> bound;
    bound.reserve(n);
    for (std::size_t i = 0; i < n; ++i) bound.push_back({moments_[i].name.substr(2), moments_[i].value});
    detail::check_step_args(params, bound);

    ++steps_;
    const double t = static_cast<double>(steps_);
    const T b1 = static_cast<T>(options_.beta1), b2 = static_cast<T>(options_.beta2);
    const T wd = static_cast<T>(options_.weight_decay), eps = static_cast<T>(options_.epsilon);
    const T c1 = static_cast<T>(1 - std::pow(options_.beta1, t));
    const T c2 = static_cast<T>(1 - std::pow(options_.beta2, t));
    const T lr = static_cast<T>(options_.learning_rate);
    for (std::size_t i = 0; i < n; ++i) {
      auto p = params[i].value.data();
      auto g = params[i].value.grad();
      auto m = moments_[i].value.data();
      auto v = moments_[n + i].value.data();
      for (std::size_t j = 0; j < p.size(); ++j) {
        const T gj = g[j] + wd * p[j];
        m[j] = b1 * m[j] + (1 - b1) * gj;
        v[j] = b2 * v[j] + (1 - b2) * gj * gj;
        p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
      }
      params[i].value.clear_grad();
    }
  }

 private:
  Options options_;
  std::vector<NamedTensor<T>> moments_;
  std::uint64_t steps_ = 0;
};

}  // namespace lapsr
