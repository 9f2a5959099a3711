#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/model/lapsrn.hpp"
#include "lapsr/tensor/ops.hpp"

namespace lapsr {

struct LossConfig {
  double epsilon = 1e-3;
  double lambda_gdl = 0.1;

  void validate() const {
    if (!(epsilon > 0)) throw ConfigError("loss epsilon must be > 0");
    if (!(lambda_gdl >= 0)) throw ConfigError("lambda_gdl must be >= 0");
  }
};

// Ground truth per pyramid level, finest last.
template <class T>
struct PyramidTarget {
  std::vector<Tensor<T>> images;
};

// Sum over all elements of sqrt((pred - target)^2 + eps^2).
template <class T>
Tensor<T> charbonnier_loss(const Tensor<T>& pred, const Tensor<T>& target, double eps) {
  detail::require_same_shape(pred.shape(), target.shape(), "charbonnier_loss");
  return reduce_sum(charbonnier_map(sub(pred, target), static_cast<T>(eps)));
}

// Number of vertical plus horizontal neighbour pairs in a tensor of this shape.
inline std::size_t gdl_term_count(const Shape& s) {
  return s.n * s.c * ((s.h - 1) * s.w + s.h * (s.w - 1));
}

// Gradient difference loss: Charbonnier penalty on the mismatch between the
// absolute vertical and horizontal neighbour differences of both images.
// Only pairs with both pixels inside the image contribute.
template <class T>
Tensor<T> gdl_loss(const Tensor<T>& pred, const Tensor<T>& target, double eps) {
  detail::require_same_shape(pred.shape(), target.shape(), "gdl_loss");
  const Shape& s = pred.shape();
  if (s.h < 2 || s.w < 2) throw ShapeError("gdl_loss: spatial dims must be >= 2, got " + s.str());
  const T e = static_cast<T>(eps);
  auto vertical = [&](const Tensor<T>& x) {
    return abs_diff(crop(x, 1, 0, s.h - 1, s.w), crop(x, 0, 0, s.h - 1, s.w));
  };
  auto horizontal = [&](const Tensor<T>& x) {
    return abs_diff(crop(x, 0, 0, s.h, s.w - 1), crop(x, 0, 1, s.h, s.w - 1));
  };
  return reduce_sum(std::vector{charbonnier_map(sub(vertical(target), vertical(pred)), e),
                                charbonnier_map(sub(horizontal(target), horizontal(pred)), e)});
}

template <class T>
struct LossTerms {
  Tensor<T> total;
  double charbonnier = 0;  // batch-averaged data term
  double gdl = 0;          // batch-averaged, unweighted GDL
};

// (1/N) * sum over samples and levels of charbonnier + lambda * gdl. The batch
// is summed over its full tensor, which equals the per-sample sum. With
// lambda == 0 the GDL branch is not evaluated at all.
template <class T>
LossTerms<T> total_loss(const PyramidOutput<T>& outputs, const PyramidTarget<T>& targets,
                        const LossConfig& config) {
  config.validate();
  if (outputs.images.size() != targets.images.size())
    throw ShapeError("total_loss: " + std::to_string(outputs.images.size()) + " predicted levels vs " +
                     std::to_string(targets.images.size()) + " target levels");
  if (outputs.images.empty()) throw ShapeError("total_loss: no pyramid levels");
  const std::size_t batch = outputs.images.front().shape().n;
  if (batch == 0) throw ShapeError("total_loss: empty batch");

  LossTerms<T> terms;
  Tensor<T> sum;
  bool first = true;
  auto accumulate = [&](const Tensor<T>& t) {
    sum = first ? t : add(sum, t);
    first = false;
  };
  for (std::size_t s = 0; s < outputs.images.size(); ++s) {
    const Tensor<T>& pred = outputs.images[s];
    const Tensor<T>& target = targets.images[s];
    if (pred.shape().n != batch) throw ShapeError("total_loss: inconsistent batch size across levels");
    const Tensor<T> data = charbonnier_loss(pred, target, config.epsilon);
    terms.charbonnier += static_cast<double>(data.item());
    accumulate(data);
    if (config.lambda_gdl != 0) {
      const Tensor<T> edge = gdl_loss(target, pred, config.epsilon);
      terms.gdl += static_cast<double>(edge.item());
      accumulate(scalar_mul(edge, static_cast<T>(config.lambda_gdl)));
    }
  }
  terms.total = scalar_mul(sum, static_cast<T>(1.0 / static_cast<double>(batch)));
  terms.charbonnier /= static_cast<double>(batch);
  terms.gdl /= static_cast<double>(batch);
  return terms;
}

}  // namespace lapsr
