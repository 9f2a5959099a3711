// Compares Charbonnier and gradient-difference loss on a vertical step edge
// reconstructed with increasing blur.

#include <cmath>
#include <cstdio>

#include "lapsr/loss/loss.hpp"

using namespace lapsr;

namespace {

// One-channel 1x1x16x16 plane with a step at column 8, smoothed by a logistic
// ramp of the given width (0 is a hard step).
Tensor<double> edge(double width) {
  Tensor<double> t(Shape{1, 1, 16, 16});
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      const double d = static_cast<double>(x) - 7.5;
      t.at(0, 0, y, x) = width == 0 ? (d > 0 ? 1.0 : 0.0) : 1 / (1 + std::exp(-d / width));
    }
  return t;
}

}  // namespace

int main() {
  const auto target = edge(0);
  const double eps = 1e-3;
  std::printf("%8s %12s %12s %12s\n", "blur", "charbonnier", "gdl", "total");
  for (double w : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0}) {
    const auto pred = edge(w);
    const auto terms = total_loss(PyramidOutput<double>{{pred}}, PyramidTarget<double>{{target}}, LossConfig{eps, 0.1});
    std::printf("%8.2f %12.5f %12.5f %12.5f\n", w, terms.charbonnier, terms.gdl, terms.total.item());
  }
  std::printf("floor: charbonnier %g, gdl %g\n", 256 * eps, static_cast<double>(gdl_term_count({1, 1, 16, 16})) * eps);
}
