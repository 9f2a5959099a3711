#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lapsr/loss/loss.hpp"
#include "lapsr/model/lapsrn.hpp"
#include "lapsr/rng.hpp"
#include "lapsr/tensor/ops.hpp"

namespace lapsr {

// Central-difference verification of reverse-mode gradients.
//
// A case is a generic callable `fn(const std::vector<Tensor<T>>&) -> scalar`
// usable at both precisions. The numeric side always runs in double, so the
// float analytic gradient is compared against an accurate reference.
namespace gradcheck {

template <class To, class From>
Tensor<To> convert(const Tensor<From>& t) {
  Tensor<To> out(t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) out.data()[i] = static_cast<To>(t.data()[i]);
  return out;
}

inline Tensor<double> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(s);
  for (double& v : t.data()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-300});
  return std::abs(analytic - numeric) / denom;
}

// Directional derivative along a random direction over every input flagged
// in `differentiable`: analytic (precision T) vs central difference (double).
template <class T, class Fn>
double directional_error(const Fn& fn, std::vector<Tensor<double>> point, const std::vector<bool>& differentiable,
                         Rng& rng, double h) {
  // Evaluate both sides at the same point, representable in T.
  for (auto& t : point) t = convert<double>(convert<T>(t));

  std::vector<Tensor<T>> inputs;
  for (std::size_t i = 0; i < point.size(); ++i) {
    inputs.push_back(convert<T>(point[i]));
    if (differentiable[i]) inputs.back().set_requires_grad(true);
  }
  fn(inputs).backward();

  double analytic = 0.0;
  std::vector<Tensor<double>> plus, minus;
  for (std::size_t i = 0; i < point.size(); ++i) {
    if (!differentiable[i]) {
      plus.push_back(point[i]);
      minus.push_back(point[i]);
      continue;
    }
    Tensor<double> dir(point[i].shape());
    for (double& v : dir.data()) v = rng.normal();
    const auto g = inputs[i].grad();
    for (std::size_t j = 0; j < dir.numel(); ++j) analytic += static_cast<double>(g[j]) * dir.data()[j];
    Tensor<double> p = point[i].clone(), m = point[i].clone();
    for (std::size_t j = 0; j < dir.numel(); ++j) {
      p.data()[j] += h * dir.data()[j];
      m.data()[j] -= h * dir.data()[j];
    }
    plus.push_back(p);
    minus.push_back(m);
  }
  const double numeric = (fn(plus).item() - fn(minus).item()) / (2.0 * h);
  return relative_error(analytic, numeric);
}

struct Result {
  std::string name;
  std::size_t instances = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return instances > 0 && max_error <= tolerance; }
};

struct Options {
  std::size_t instances = 20;
  std::uint64_t seed = 1234;
  double tol_float = 1e-3;
  double tol_double = 1e-6;
  double h = 1e-6;
};

// A named case: draws a random point and says which inputs are varied.
struct Case {
  std::string name;
  std::function<std::vector<Tensor<double>>(Rng&)> make_point;
  std::vector<bool> differentiable;
  std::function<double(const std::vector<Tensor<double>>&, Rng&, double, bool)> run;
  double h = 0.0;  // overrides Options::h when > 0
};

template <class Fn>
Case make_case(std::string name, std::function<std::vector<Tensor<double>>(Rng&)> make_point,
               std::vector<bool> differentiable, Fn fn) {
  Case c{std::move(name), std::move(make_point), differentiable, {}};
  c.run = [fn, differentiable](const std::vector<Tensor<double>>& point, Rng& rng, double h, bool in_float) {
    return in_float ? directional_error<float>(fn, point, differentiable, rng, h)
                    : directional_error<double>(fn, point, differentiable, rng, h);
  };
  return c;
}

inline std::vector<Result> run_cases(const std::vector<Case>& cases, const Options& opt) {
  std::vector<Result> results;
  for (const bool in_float : {true, false}) {
    for (std::size_t k = 0; k < cases.size(); ++k) {
      Result r{cases[k].name + (in_float ? " [float]" : " [double]"), 0, 0.0, in_float ? opt.tol_float : opt.tol_double};
      Rng rng(mix_seed(opt.seed, k));
      for (std::size_t i = 0; i < opt.instances; ++i) {
        const auto point = cases[k].make_point(rng);
        r.max_error = std::max(r.max_error, cases[k].run(point, rng, cases[k].h > 0 ? cases[k].h : opt.h, in_float));
        ++r.instances;
      }
      results.push_back(r);
    }
  }
  return results;
}

// Small pyramid used for whole-network checks.
inline ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.scale = 4;
  cfg.convs_per_level = 2;
  cfg.feature_channels = 4;
  cfg.image_channels = 3;
  return cfg;
}

// Full objective as a function of (parameters..., lr image, targets...).
struct NetworkLoss {
  ModelConfig config;
  LossConfig loss;

  template <class T>
  Tensor<T> operator()(const std::vector<Tensor<T>>& in) const {
    const auto layout = parameter_layout(config);
    ModelParams<T> params{config, {}};
    for (std::size_t i = 0; i < layout.size(); ++i) params.tensors.push_back({layout[i].first, in[i]});
    const Tensor<T>& x = in[layout.size()];
    PyramidTarget<T> targets;
    for (std::size_t i = layout.size() + 1; i < in.size(); ++i) targets.images.push_back(in[i]);
    return total_loss(forward(params, x), targets, loss).total;
  }
};

// Random point for NetworkLoss: He/bilinear-initialised weights perturbed by
// noise, random biases, a random input batch and random targets.
inline std::vector<Tensor<double>> network_point(const ModelConfig& cfg, Shape input, Rng& rng) {
  std::vector<Tensor<double>> point;
  const auto base = build_model<double>(cfg, rng.next_u64());
  for (const auto& t : base.tensors) {
    Tensor<double> v = t.value.detach();
    for (double& x : v.data()) x += 0.05 * rng.normal();
    point.push_back(v);
  }
  point.push_back(random_tensor(input, rng, 0.0, 1.0));
  for (std::uint32_t s = 1; s <= cfg.levels(); ++s)
    point.push_back(random_tensor(Shape{input.n, input.c, input.h << s, input.w << s}, rng, 0.0, 1.0));
  return point;
}

inline std::vector<bool> network_mask(const ModelConfig& cfg) {
  std::vector<bool> mask(parameter_layout(cfg).size(), true);
  mask.push_back(false);
  for (std::uint32_t s = 0; s < cfg.levels(); ++s) mask.push_back(false);
  return mask;
}

// Every differentiable op plus the full pyramid objective.
inline std::vector<Case> standard_cases() {
  std::vector<Case> cases;
  const double eps = 1e-3;

  // Non-scalar outputs are reduced with a fixed random weighting (last input).
  cases.push_back(make_case(
      "conv2d",
      [](Rng& r) {
        return std::vector{random_tensor({2, 3, 6, 5}, r), random_tensor({4, 3, 3, 3}, r),
                           random_tensor({1, 1, 1, 4}, r), random_tensor({2, 4, 6, 5}, r)};
      },
      {true, true, true, false},
      []<class T>(const std::vector<Tensor<T>>& in) { return dot(conv2d(in[0], in[1], in[2], 1, 1), in[3]); }));
  cases.push_back(make_case(
      "conv2d stride 2",
      [](Rng& r) {
        return std::vector{random_tensor({1, 2, 7, 7}, r), random_tensor({3, 2, 3, 3}, r),
                           random_tensor({1, 1, 1, 3}, r), random_tensor({1, 3, 4, 4}, r)};
      },
      {true, true, true, false},
      []<class T>(const std::vector<Tensor<T>>& in) { return dot(conv2d(in[0], in[1], in[2], 2, 1), in[3]); }));
  cases.push_back(make_case(
      "conv_transpose2d",
      [](Rng& r) {
        return std::vector{random_tensor({2, 3, 4, 5}, r), random_tensor({3, 2, 4, 4}, r),
                           random_tensor({1, 1, 1, 2}, r), random_tensor({2, 2, 8, 10}, r)};
      },
      {true, true, true, false},
      []<class T>(const std::vector<Tensor<T>>& in) { return dot(conv_transpose2d(in[0], in[1], in[2], 2, 1), in[3]); }));
  cases.push_back(make_case(
      "leaky_relu", [](Rng& r) { return std::vector{random_tensor({2, 3, 4, 4}, r), random_tensor({2, 3, 4, 4}, r)}; },
      {true, false}, []<class T>(const std::vector<Tensor<T>>& in) { return dot(leaky_relu(in[0], T(0.2)), in[1]); }));
  cases.push_back(make_case(
      "add",
      [](Rng& r) {
        return std::vector{random_tensor({1, 2, 3, 3}, r), random_tensor({1, 2, 3, 3}, r), random_tensor({1, 2, 3, 3}, r)};
      },
      {true, true, false}, []<class T>(const std::vector<Tensor<T>>& in) { return dot(add(in[0], in[1]), in[2]); }));
  cases.push_back(make_case(
      "sub",
      [](Rng& r) {
        return std::vector{random_tensor({1, 2, 3, 3}, r), random_tensor({1, 2, 3, 3}, r), random_tensor({1, 2, 3, 3}, r)};
      },
      {true, true, false}, []<class T>(const std::vector<Tensor<T>>& in) { return dot(sub(in[0], in[1]), in[2]); }));
  cases.push_back(make_case(
      "scalar_mul", [](Rng& r) { return std::vector{random_tensor({1, 2, 3, 3}, r), random_tensor({1, 2, 3, 3}, r)}; },
      {true, false}, []<class T>(const std::vector<Tensor<T>>& in) { return dot(scalar_mul(in[0], T(-1.7)), in[1]); }));
  cases.push_back(make_case(
      "abs_diff",
      [](Rng& r) {
        return std::vector{random_tensor({1, 2, 4, 4}, r), random_tensor({1, 2, 4, 4}, r), random_tensor({1, 2, 4, 4}, r)};
      },
      {true, true, false}, []<class T>(const std::vector<Tensor<T>>& in) { return dot(abs_diff(in[0], in[1]), in[2]); }));
  cases.push_back(make_case(
      "charbonnier_map", [](Rng& r) { return std::vector{random_tensor({1, 2, 4, 4}, r), random_tensor({1, 2, 4, 4}, r)}; },
      {true, false},
      [eps]<class T>(const std::vector<Tensor<T>>& in) { return dot(charbonnier_map(in[0], T(eps)), in[1]); }));
  cases.push_back(make_case(
      "reduce_sum", [](Rng& r) { return std::vector{random_tensor({2, 1, 3, 3}, r)}; }, {true},
      []<class T>(const std::vector<Tensor<T>>& in) { return scalar_mul(reduce_sum(in[0]), T(1.3)); }));
  cases.push_back(make_case(
      "reduce_mean", [](Rng& r) { return std::vector{random_tensor({2, 1, 3, 3}, r)}; }, {true},
      []<class T>(const std::vector<Tensor<T>>& in) { return scalar_mul(reduce_mean(in[0]), T(1.3)); }));
  cases.push_back(make_case(
      "crop", [](Rng& r) { return std::vector{random_tensor({1, 2, 5, 6}, r), random_tensor({1, 2, 3, 2}, r)}; },
      {true, false}, []<class T>(const std::vector<Tensor<T>>& in) { return dot(crop(in[0], 1, 3, 3, 2), in[1]); }));
  cases.push_back(make_case(
      "dot", [](Rng& r) { return std::vector{random_tensor({1, 2, 3, 3}, r), random_tensor({1, 2, 3, 3}, r)}; },
      {true, true}, []<class T>(const std::vector<Tensor<T>>& in) { return dot(in[0], in[1]); }));
  cases.push_back(make_case(
      "charbonnier_loss", [](Rng& r) { return std::vector{random_tensor({2, 3, 5, 5}, r), random_tensor({2, 3, 5, 5}, r)}; },
      {true, false}, [eps]<class T>(const std::vector<Tensor<T>>& in) { return charbonnier_loss(in[0], in[1], eps); }));
  cases.push_back(make_case(
      "gdl_loss", [](Rng& r) { return std::vector{random_tensor({2, 3, 5, 5}, r), random_tensor({2, 3, 5, 5}, r)}; },
      {true, false}, [eps]<class T>(const std::vector<Tensor<T>>& in) { return gdl_loss(in[1], in[0], eps); }));

  const ModelConfig net = tiny_model_config();
  const Shape input{1, 3, 8, 8};
  cases.push_back(make_case(
      "total_loss (full network)", [net, input](Rng& r) { return network_point(net, input, r); }, network_mask(net),
      NetworkLoss{net, LossConfig{}}));
  // Thousands of leaky-ReLU and |x| kinks: a shorter stencil rarely straddles one.
  cases.back().h = 1e-7;
  return cases;
}

}  // namespace gradcheck
}  // namespace lapsr
