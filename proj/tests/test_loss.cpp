#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "lapsr/loss/loss.hpp"
#include "lapsr/rng.hpp"
#include "lapsr/tensor/optim.hpp"

using namespace lapsr;

namespace {

template <class T>
Tensor<T> random(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<T> t(s);
  for (T& v : t.data()) v = static_cast<T>(rng.uniform());
  return t;
}

// Columns of a 1x1x4x4 plane.
Tensor<double> columns(double a, double b, double c, double d) {
  Tensor<double> t(Shape{1, 1, 4, 4});
  for (std::size_t i = 0; i < 4; ++i) {
    t.at(0, 0, i, 0) = a;
    t.at(0, 0, i, 1) = b;
    t.at(0, 0, i, 2) = c;
    t.at(0, 0, i, 3) = d;
  }
  return t;
}

constexpr double kDyadicEps = 1.0 / 1024;  // exact in binary, so P * eps is exact too

}  // namespace

TEST(Charbonnier, PerfectPredictionIsElementCountTimesEpsilon) {
  const auto x = random<double>({2, 3, 5, 7}, 1);
  EXPECT_EQ(charbonnier_loss(x, x, kDyadicEps).item(), 210 * kDyadicEps);
  const auto xf = random<float>({2, 3, 5, 7}, 1);
  EXPECT_EQ(charbonnier_loss(xf, xf, kDyadicEps).item(), static_cast<float>(210 * kDyadicEps));
}

// With eps = 1e-3 the floor is the correctly rounded product of the element
// count and the stored epsilon, in either precision.
TEST(Charbonnier, DefaultEpsilonFloorIsExact) {
  for (Shape s : {Shape{1, 3, 16, 16}, Shape{2, 3, 5, 7}, Shape{4, 3, 64, 64}}) {
    const auto x = random<double>(s, 2);
    EXPECT_EQ(charbonnier_loss(x, x, 1e-3).item(), static_cast<double>(s.numel()) * 1e-3) << s.str();
    const auto xf = random<float>(s, 2);
    EXPECT_EQ(charbonnier_loss(xf, xf, 1e-3).item(),
              static_cast<float>(static_cast<double>(s.numel()) * static_cast<double>(1e-3f)))
        << s.str();
  }
}

TEST(Charbonnier, MatchesDirectSum) {
  const auto p = random<double>({1, 2, 3, 4}, 3), t = random<double>({1, 2, 3, 4}, 4);
  double want = 0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    const double d = p.data()[i] - t.data()[i];
    want += std::sqrt(d * d + 1e-6);
  }
  EXPECT_NEAR(charbonnier_loss(p, t, 1e-3).item(), want, 1e-13);
}

TEST(Charbonnier, RejectsShapeMismatch) {
  EXPECT_THROW(charbonnier_loss(Tensor<float>({1, 1, 2, 2}), Tensor<float>({1, 1, 2, 3}), 1e-3), ShapeError);
}

TEST(Gdl, TermCount) {
  EXPECT_EQ(gdl_term_count({2, 3, 5, 7}), 2u * 3 * (4 * 7 + 5 * 6));
  EXPECT_EQ(gdl_term_count({1, 1, 2, 2}), 4u);
}

TEST(Gdl, PerfectPredictionIsTermCountTimesEpsilon) {
  const auto x = random<double>({2, 3, 5, 7}, 5);
  EXPECT_EQ(gdl_loss(x, x, kDyadicEps).item(), 348 * kDyadicEps);
  const auto xf = random<float>({2, 3, 5, 7}, 5);
  EXPECT_EQ(gdl_loss(xf, xf, kDyadicEps).item(), static_cast<float>(348 * kDyadicEps));
}

TEST(Gdl, DefaultEpsilonFloorIsExact) {
  for (Shape s : {Shape{1, 3, 16, 16}, Shape{2, 3, 5, 7}, Shape{4, 3, 64, 64}}) {
    const auto x = random<double>(s, 3);
    EXPECT_EQ(gdl_loss(x, x, 1e-3).item(), static_cast<double>(gdl_term_count(s)) * 1e-3) << s.str();
  }
}

TEST(Gdl, HandComputedTwoByTwo) {
  // Target steps by one between columns, prediction is flat: both vertical
  // pairs and both horizontal pairs contribute once.
  const Tensor<double> target(Shape{1, 1, 2, 2}, {0, 1, 0, 1});
  const Tensor<double> pred(Shape{1, 1, 2, 2}, 0.5);
  const double eps = 1e-3;
  EXPECT_NEAR(gdl_loss(target, pred, eps).item(), 2 * std::sqrt(1 + eps * eps) + 2 * eps, 1e-9);
}

TEST(Gdl, InvariantUnderSignFlipOfBothImages) {
  const auto t = random<double>({1, 2, 6, 5}, 6), p = random<double>({1, 2, 6, 5}, 7);
  Tensor<double> nt = t.clone(), np = p.clone();
  for (double& v : nt.data()) v = 1 - v;
  for (double& v : np.data()) v = 1 - v;
  EXPECT_NEAR(gdl_loss(t, p, 1e-3).item(), gdl_loss(nt, np, 1e-3).item(), 1e-12);
}

TEST(Gdl, SharperEdgeInTheRightPlaceScoresLower) {
  const auto target = columns(0, 0, 1, 1);
  double last = gdl_loss(target, columns(0.5, 0.5, 0.5, 0.5), 1e-3).item();
  for (double a : {0.1, 0.25, 0.4, 0.5}) {
    const double now = gdl_loss(target, columns(0.5 - a, 0.5 - a, 0.5 + a, 0.5 + a), 1e-3).item();
    EXPECT_LT(now, last) << "edge amplitude " << a;
    last = now;
  }
  EXPECT_GT(gdl_loss(target, columns(0, 1, 1, 1), 1e-3).item(), gdl_loss(target, columns(0, 0, 1, 1), 1e-3).item());
}

TEST(Gdl, RejectsDegeneratePlanes) {
  EXPECT_THROW(gdl_loss(Tensor<float>({1, 1, 1, 4}), Tensor<float>({1, 1, 1, 4}), 1e-3), ShapeError);
}

TEST(TotalLoss, DefaultsMatchBestConfiguration) {
  const LossConfig c;
  EXPECT_EQ(c.epsilon, 1e-3);
  EXPECT_EQ(c.lambda_gdl, 0.1);
}

TEST(TotalLoss, FloorForPerfectPyramid) {
  const Shape s1{2, 3, 4, 4}, s2{2, 3, 8, 8};
  PyramidOutput<double> out{{random<double>(s1, 8), random<double>(s2, 9)}};
  PyramidTarget<double> tgt{{out.images[0].clone(), out.images[1].clone()}};
  const LossConfig cfg{kDyadicEps, 0.5};
  const auto terms = total_loss(out, tgt, cfg);
  const double per_sample =
      (s1.numel() + s2.numel() + 0.5 * (gdl_term_count(s1) + gdl_term_count(s2))) * kDyadicEps / 2;
  EXPECT_EQ(terms.total.item(), per_sample);
}

TEST(TotalLoss, AveragesOverTheBatch) {
  const auto a = random<double>({1, 3, 6, 6}, 10), b = random<double>({1, 3, 6, 6}, 11);
  Tensor<double> a2({2, 3, 6, 6}), b2({2, 3, 6, 6});
  for (std::size_t i = 0; i < 2 * a.numel(); ++i) {
    a2.data()[i] = a.data()[i % a.numel()];
    b2.data()[i] = b.data()[i % b.numel()];
  }
  const LossConfig cfg;
  EXPECT_NEAR(total_loss(PyramidOutput<double>{{a2}}, PyramidTarget<double>{{b2}}, cfg).total.item(),
              total_loss(PyramidOutput<double>{{a}}, PyramidTarget<double>{{b}}, cfg).total.item(), 1e-12);
}

TEST(TotalLoss, ReportsItsTerms) {
  const auto p = random<double>({1, 3, 6, 6}, 12), t = random<double>({1, 3, 6, 6}, 13);
  const auto terms = total_loss(PyramidOutput<double>{{p}}, PyramidTarget<double>{{t}}, LossConfig{1e-3, 0.25});
  EXPECT_EQ(terms.charbonnier, charbonnier_loss(p, t, 1e-3).item());
  EXPECT_EQ(terms.gdl, gdl_loss(t, p, 1e-3).item());
  EXPECT_NEAR(terms.total.item(), terms.charbonnier + 0.25 * terms.gdl, 1e-12);
}

// Plain Charbonnier objective built by hand, used as the lambda = 0 reference.
template <class T>
Tensor<T> plain_objective(const PyramidOutput<T>& out, const PyramidTarget<T>& tgt) {
  Tensor<T> sum = charbonnier_loss(out.images[0], tgt.images[0], 1e-3);
  for (std::size_t s = 1; s < out.images.size(); ++s) sum = add(sum, charbonnier_loss(out.images[s], tgt.images[s], 1e-3));
  return scalar_mul(sum, static_cast<T>(1.0 / static_cast<double>(out.images[0].shape().n)));
}

TEST(TotalLoss, ZeroLambdaEqualsPlainCharbonnierBitwise) {
  // Same SGD trajectory on a pair of free "prediction" tensors under both objectives.
  auto run = [](bool plain) {
    std::vector<NamedTensor<float>> params{{"a", random<float>({2, 3, 4, 4}, 14)}, {"b", random<float>({2, 3, 8, 8}, 15)}};
    for (auto& p : params) p.value.set_requires_grad();
    const PyramidTarget<float> tgt{{random<float>({2, 3, 4, 4}, 16), random<float>({2, 3, 8, 8}, 17)}};
    SgdMomentum<float> opt(params, {1e-2, 0.9, 1e-4});
    std::vector<float> trace;
    for (int it = 0; it < 5; ++it) {
      const PyramidOutput<float> out{{params[0].value, params[1].value}};
      const Tensor<float> loss = plain ? plain_objective(out, tgt) : total_loss(out, tgt, LossConfig{1e-3, 0.0}).total;
      trace.push_back(loss.item());
      loss.backward();
      opt.step(params);
    }
    for (const auto& p : params) trace.insert(trace.end(), p.value.data().begin(), p.value.data().end());
    return trace;
  };
  const auto a = run(false), b = run(true);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]) << "index " << i;
}

TEST(TotalLoss, GradientIsFiniteAtPerfectPrediction) {
  auto p = random<double>({1, 3, 5, 5}, 18).set_requires_grad();
  const auto t = p.clone();
  auto loss = total_loss(PyramidOutput<double>{{p}}, PyramidTarget<double>{{t}}, LossConfig{}).total;
  loss.backward();
  for (double g : p.grad()) ASSERT_TRUE(std::isfinite(g));
}

TEST(TotalLoss, RejectsLevelMismatch) {
  const PyramidOutput<float> out{{Tensor<float>({1, 3, 4, 4}), Tensor<float>({1, 3, 8, 8})}};
  const PyramidTarget<float> tgt{{Tensor<float>({1, 3, 4, 4})}};
  EXPECT_THROW(total_loss(out, tgt, LossConfig{}), ShapeError);
  EXPECT_THROW(total_loss(PyramidOutput<float>{}, PyramidTarget<float>{}, LossConfig{}), ShapeError);
}

TEST(TotalLoss, RejectsBadConfig) {
  const PyramidOutput<float> out{{Tensor<float>({1, 3, 4, 4})}};
  const PyramidTarget<float> tgt{{Tensor<float>({1, 3, 4, 4})}};
  EXPECT_THROW(total_loss(out, tgt, LossConfig{0.0, 0.1}), ConfigError);
  EXPECT_THROW(total_loss(out, tgt, LossConfig{1e-3, -0.1}), ConfigError);
}
