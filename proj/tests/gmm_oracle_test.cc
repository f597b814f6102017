//
// Copyright 2026 The DPDM Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "dpdm/gmm_oracle.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.h"

#include "dpdm/rng.h"

namespace dpdm {
namespace {

std::vector<Point2> Points(const std::vector<LabeledSample>& s) {
  std::vector<Point2> p;
  p.reserve(s.size());
  for (const auto& e : s) p.push_back(e.point);
  return p;
}

TEST(GmmSpecTest, DefaultLayoutMatchesDefinition) {
  const GmmSpec spec = GmmSpec::Default9();
  ASSERT_EQ(spec.num_components(), 9);
  EXPECT_DOUBLE_EQ(spec.component_std, 0.04);
  double total = 0.0;
  for (double w : spec.weights) total += w;
  EXPECT_NEAR(total, 1.0, 1e-12);
  const double a = 1.0 / std::sqrt(2.0);
  EXPECT_DOUBLE_EQ(spec.means[0].x, -a);
  EXPECT_DOUBLE_EQ(spec.means[4].x, 0.0);
  EXPECT_DOUBLE_EQ(spec.means[8].x, a);
  // Nearest modes are 12.5 component standard deviations apart.
  double min_gap = 1e9;
  for (int i = 0; i < 9; ++i) {
    for (int j = i + 1; j < 9; ++j) {
      min_gap = std::min(min_gap, (spec.means[i] - spec.means[j]).Norm());
    }
  }
  EXPECT_NEAR(min_gap / spec.component_std, 12.5, 1e-12);
}

TEST(GmmSpecTest, ValidateRejectsBadWeights) {
  GmmSpec spec = GmmSpec::Default9();
  spec.weights[0] += 1e-6;
  EXPECT_THROW(spec.Validate(), std::invalid_argument);
  spec = GmmSpec::Default9();
  spec.weights[0] = 0.0;
  spec.weights[1] = 2.0 / 9.0;
  EXPECT_THROW(spec.Validate(), std::invalid_argument);
  spec = GmmSpec::Default9();
  spec.component_std = 0.0;
  EXPECT_THROW(spec.Validate(), std::invalid_argument);
}

TEST(SampleDataTest, EmptyAndDeterministic) {
  const GmmSpec spec = GmmSpec::Default9();
  EXPECT_TRUE(SampleData(spec, 0, 1).empty());
  const auto a = SampleData(spec, 100, 7);
  const auto b = SampleData(spec, 100, 7);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].point, b[i].point);
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_LT((a[i].point - spec.means[a[i].label]).Norm(), 8 * spec.component_std);
  }
}

TEST(SampleDataTest, VicinityFractionsMatchDiskMass) {
  const GmmSpec spec = GmmSpec::Default9();
  const auto pts = Points(SampleData(spec, 1000000, 3));
  // 1 - exp(-1/2) = 0.3935, and 86.5% at h = 2.
  EXPECT_NEAR(HVicinity(spec, pts, 1.0), 0.3935, 0.003);
  EXPECT_NEAR(HVicinity(spec, pts, 2.0), 0.8647, 0.003);
  EXPECT_NEAR(HVicinity(spec, pts, 3.0), 0.989, 0.002);
  EXPECT_GE(HVicinity(spec, pts, 4.0), 0.9995);
  for (double h : {1.0, 2.0, 3.0}) {
    const double p = GaussianDiskMass(h);
    const double se = std::sqrt(p * (1 - p) / pts.size());
    EXPECT_NEAR(HVicinity(spec, pts, h), p, 3 * se) << "h=" << h;
  }
}

TEST(PerturbedDensityTest, StandardNormalAtMean) {
  const GmmSpec g = GmmSpec::SingleGaussian({0, 0}, 1.0);
  EXPECT_NEAR(PerturbedDensity(g, {0, 0}, 0.0), 1.0 / (2 * std::numbers::pi), 1e-15);
}

TEST(PerturbedDensityTest, MatchesNumericalConvolution) {
  const GmmSpec spec = GmmSpec::Default9();
  const double sigma = 0.1;
  const double conv = testing::Quadrature2D(
      [&](double y1, double y2) {
        return testing::DataDensity(spec, y1, y2) *
               testing::IsoGauss2(-y1, -y2, sigma * sigma);
      },
      -1.3, 1.3, 1300);
  EXPECT_NEAR(PerturbedDensity(spec, {0, 0}, sigma) / conv, 1.0, 1e-6);
}

TEST(PerturbedDensityTest, FarTailUnderflowsGracefully) {
  const GmmSpec spec = GmmSpec::Default9();
  const double p = PerturbedDensity(spec, {50, -50}, 0.01);
  EXPECT_GE(p, 0.0);
  EXPECT_LT(p, 1e-30);
  EXPECT_TRUE(std::isfinite(LogPerturbedDensity(spec, {50, -50}, 0.01)));
}

TEST(PerturbedDensityTest, IntegratesToOne) {
  const GmmSpec spec = GmmSpec::Default9();
  for (double sigma : {0.0, 0.05, 0.2, 0.5}) {
    const double mass = testing::Quadrature2D(
        [&](double x, double y) { return PerturbedDensity(spec, {x, y}, sigma); },
        -3, 3, 1200);
    EXPECT_NEAR(mass, 1.0, 1e-3) << "sigma=" << sigma;
  }
}

TEST(AnalyticScoreTest, ZeroAtOriginBySymmetry) {
  const GmmSpec spec = GmmSpec::Default9();
  for (double sigma : {0.0, 0.01, 1.0, 80.0}) {
    const Point2 s = AnalyticScore(spec, {0, 0}, sigma);
    EXPECT_NEAR(s.x, 0.0, 1e-9);
    EXPECT_NEAR(s.y, 0.0, 1e-9);
    const Point2 d = IdealDenoiser(spec, {0, 0}, sigma);
    EXPECT_NEAR(d.x, 0.0, 1e-12);
    EXPECT_NEAR(d.y, 0.0, 1e-12);
  }
}

TEST(AnalyticScoreTest, SingleGaussianClosedForm) {
  const Point2 mu{0.3, -1.2};
  const double s0 = 0.7;
  const GmmSpec g = GmmSpec::SingleGaussian(mu, s0);
  for (double sigma : {0.0, 0.4, 3.0}) {
    const Point2 x{1.1, 0.2};
    const Point2 expected = (1.0 / (s0 * s0 + sigma * sigma)) * (mu - x);
    const Point2 s = AnalyticScore(g, x, sigma);
    EXPECT_NEAR(s.x, expected.x, 1e-14);
    EXPECT_NEAR(s.y, expected.y, 1e-14);
    const Point2 d = IdealDenoiser(g, x, sigma);
    const Point2 post = testing::GaussianPosteriorMean(mu, s0, x, sigma);
    EXPECT_NEAR(d.x, post.x, 1e-14);
    EXPECT_NEAR(d.y, post.y, 1e-14);
  }
}

// Central differences of log p; `order` 2 uses the three-point stencil with
// step 1e-5, order 4 the five-point stencil (truncation O(h^4)).
double FdScoreError(const GmmSpec& spec, Point2 x, double sigma, int order) {
  auto f = [&](double dx, double dy) {
    return LogPerturbedDensity(spec, {x.x + dx, x.y + dy}, sigma);
  };
  double gx, gy;
  if (order == 2) {
    const double h = 1e-5;
    gx = (f(h, 0) - f(-h, 0)) / (2 * h);
    gy = (f(0, h) - f(0, -h)) / (2 * h);
  } else {
    const double h = 2e-4;
    gx = (-f(2 * h, 0) + 8 * f(h, 0) - 8 * f(-h, 0) + f(-2 * h, 0)) / (12 * h);
    gy = (-f(0, 2 * h) + 8 * f(0, h) - 8 * f(0, -h) + f(0, -2 * h)) / (12 * h);
  }
  const Point2 s = AnalyticScore(spec, x, sigma);
  return std::max(std::abs(s.x - gx), std::abs(s.y - gy));
}

TEST(AnalyticScoreTest, MatchesFiniteDifferences) {
  const GmmSpec spec = GmmSpec::Default9();
  EXPECT_LT(FdScoreError(spec, {0.3, -0.2}, 0.5, 2), 1e-6);
  CounterRng rng(11, StreamTag::kMonteCarlo);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Point2 x{2 * rng.Uniform() - 1, 2 * rng.Uniform() - 1};
    const double sigma =
        std::exp(std::log(0.002) + rng.Uniform() * (std::log(80.0) - std::log(0.002)));
    worst = std::max(worst, FdScoreError(spec, x, sigma, 4));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(IdealDenoiserTest, IdentityWithScore) {
  const GmmSpec spec = GmmSpec::Default9();
  CounterRng rng(5, StreamTag::kMonteCarlo);
  for (int i = 0; i < 200; ++i) {
    const Point2 x{2 * rng.Uniform() - 1, 2 * rng.Uniform() - 1};
    const double sigma = 5 * rng.Uniform();
    const Point2 lhs = IdealDenoiser(spec, x, sigma) - x;
    const Point2 rhs = (sigma * sigma) * AnalyticScore(spec, x, sigma);
    EXPECT_NEAR(lhs.x, rhs.x, 1e-12);
    EXPECT_NEAR(lhs.y, rhs.y, 1e-12);
  }
  EXPECT_EQ(IdealDenoiser(spec, {0.123, -0.4}, 0.0), (Point2{0.123, -0.4}) +
                0.0 * AnalyticScore(spec, {0.123, -0.4}, 0.0));
}

TEST(IdealDenoiserTest, ZeroNoiseReturnsInput) {
  const GmmSpec spec = GmmSpec::Default9();
  const Point2 x{0.42, 0.17};
  EXPECT_EQ(IdealDenoiser(spec, x, 0.0), x);
}

TEST(IdealDenoiserTest, JacobianMatchesFiniteDifferences) {
  const GmmSpec spec = GmmSpec::Default9();
  for (double sigma : {0.02, 0.2, 1.0}) {
    const Point2 x{0.2, -0.31};
    const Mat2 j = IdealDenoiserJacobian(spec, x, sigma);
    const double h = 1e-6;
    for (int c = 0; c < 2; ++c) {
      Point2 e{c == 0 ? h : 0.0, c == 1 ? h : 0.0};
      const Point2 d = (1 / (2 * h)) * (IdealDenoiser(spec, x + e, sigma) -
                                        IdealDenoiser(spec, x - e, sigma));
      EXPECT_NEAR(j(0, c), d.x, 1e-6);
      EXPECT_NEAR(j(1, c), d.y, 1e-6);
    }
  }
}

TEST(HVicinityTest, CentersAreInsideAndEmptyThrows) {
  const GmmSpec spec = GmmSpec::Default9();
  EXPECT_DOUBLE_EQ(HVicinity(spec, spec.means, 1.0), 1.0);
  EXPECT_THROW(HVicinity(spec, std::vector<Point2>{}, 1.0), std::invalid_argument);
  // Strict inequality on the boundary.
  const std::vector<Point2> edge = {spec.means[0] + Point2{spec.component_std, 0}};
  EXPECT_DOUBLE_EQ(HVicinity(spec, edge, 1.0), 0.0);
}

}  // namespace
}  // namespace dpdm
