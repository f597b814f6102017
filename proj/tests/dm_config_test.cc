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

#include "dpdm/dm_config.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "gtest/gtest.h"

namespace dpdm {
namespace {

constexpr DmKind kAllKinds[] = {DmKind::kVp, DmKind::kVe, DmKind::kVPred,
                                DmKind::kEdm};

TEST(DmConfigTest, DefaultsAreValid) {
  for (DmKind kind : kAllKinds) {
    const DmConfig cfg = DmConfig::Make(kind);
    EXPECT_NO_THROW(cfg.Validate()) << DmKindName(kind);
    EXPECT_EQ(ParseDmKind(DmKindName(kind)), kind);
  }
  const DmConfig edm = DmConfig::Make(DmKind::kEdm);
  EXPECT_DOUBLE_EQ(edm.sigma_data, std::sqrt(1.0 / 3.0));
  EXPECT_THROW(ParseDmKind("ddpm"), std::invalid_argument);
}

TEST(DmConfigTest, ValidateRejectsInconsistentConstants) {
  DmConfig cfg = DmConfig::Make(DmKind::kVe);
  cfg.sigma_min = 100.0;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
  cfg = DmConfig::Make(DmKind::kEdm);
  cfg.p_std = 0.0;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
  cfg = DmConfig::Make(DmKind::kVPred);
  cfg.eps_max = 1.0;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
}

TEST(DmConfigTest, VPredRangeCoversSamplerRange) {
  const DmConfig cfg = DmConfig::Make(DmKind::kVPred);
  EXPECT_NEAR(VPredSigma(cfg.eps_min), std::exp(-6.5), 1e-12);
  EXPECT_NEAR(VPredSigma(cfg.eps_max), std::exp(4.5), 1e-9);
  EXPECT_LT(VPredSigma(cfg.eps_min), 0.002);
  EXPECT_GT(VPredSigma(cfg.eps_max), 80.0);
}

TEST(PreconditionTest, EdmAtSigmaData) {
  const DmConfig cfg = DmConfig::Make(DmKind::kEdm);
  const Preconditioning p = Precondition(cfg, std::sqrt(1.0 / 3.0));
  EXPECT_NEAR(p.c_skip, 0.5, 1e-15);
}

TEST(PreconditionTest, VeIsIdentityScaling) {
  const DmConfig cfg = DmConfig::Make(DmKind::kVe);
  for (double sigma : {0.002, 0.7, 80.0}) {
    const Preconditioning p = Precondition(cfg, sigma);
    EXPECT_EQ(p.c_skip, 1.0);
    EXPECT_EQ(p.c_out, sigma);
    EXPECT_EQ(p.c_in, 1.0);
    EXPECT_NEAR(p.c_noise, std::log(0.5 * sigma), 1e-15);
  }
}

TEST(PreconditionTest, VpNoiseConditioningAtEndOfTime) {
  const DmConfig cfg = DmConfig::Make(DmKind::kVp);
  const double sigma1 = std::sqrt(std::exp(0.5 * 19.9 + 0.1) - 1.0);
  EXPECT_NEAR(sigma1, 152.17, 0.01);
  EXPECT_NEAR(VpSigma(cfg, 1.0), sigma1, 1e-10);
  const Preconditioning p = Precondition(cfg, sigma1);
  EXPECT_NEAR(p.c_noise, 999.0, 1e-3);
  EXPECT_EQ(p.c_skip, 1.0);
  EXPECT_EQ(p.c_out, -sigma1);
  EXPECT_NEAR(p.c_in, 1.0 / std::sqrt(sigma1 * sigma1 + 1.0), 1e-15);
}

TEST(PreconditionTest, RejectsNonPositiveSigma) {
  for (DmKind kind : kAllKinds) {
    const DmConfig cfg = DmConfig::Make(kind);
    EXPECT_THROW(Precondition(cfg, 0.0), std::domain_error);
    EXPECT_THROW(Precondition(cfg, -1.0), std::domain_error);
    EXPECT_THROW(LossWeight(cfg, 0.0), std::domain_error);
  }
}

TEST(PreconditionTest, FiniteOverSamplerRange) {
  CounterRng rng(1, StreamTag::kMonteCarlo);
  for (DmKind kind : kAllKinds) {
    const DmConfig cfg = DmConfig::Make(kind);
    for (int i = 0; i < 1000; ++i) {
      const double sigma =
          std::exp(std::log(0.002) + rng.Uniform() * std::log(80.0 / 0.002));
      const Preconditioning p = Precondition(cfg, sigma);
      EXPECT_TRUE(std::isfinite(p.c_skip) && std::isfinite(p.c_out) &&
                  std::isfinite(p.c_in) && std::isfinite(p.c_noise))
          << DmKindName(kind) << " sigma=" << sigma;
      if (kind == DmKind::kEdm) {
        EXPECT_NEAR(p.c_in * std::sqrt(sigma * sigma + cfg.sigma_data * cfg.sigma_data),
                    1.0, 1e-12);
      }
    }
  }
}

TEST(TimeInverseTest, RoundTrips) {
  const DmConfig vp = DmConfig::Make(DmKind::kVp);
  const DmConfig vpred = DmConfig::Make(DmKind::kVPred);
  for (int i = 0; i <= 1000; ++i) {
    const double u = i / 1000.0;
    const double t_vp = vp.eps_t + u * (1.0 - vp.eps_t);
    EXPECT_NEAR(VpTime(vp, VpSigma(vp, t_vp)), t_vp, 1e-9);
    const double t_vpred = vpred.eps_min + u * (vpred.eps_max - vpred.eps_min);
    EXPECT_NEAR(VPredTime(VPredSigma(t_vpred)), t_vpred, 1e-9);
  }
}

RawNetworkFn ZeroNet() {
  return [](Point2, double, int) { return Point2{0, 0}; };
}

TEST(DenoiseTest, ZeroNetworkGivesSkipScaling) {
  for (DmKind kind : kAllKinds) {
    const DmConfig cfg = DmConfig::Make(kind);
    const Point2 x{0.3, -2.0};
    for (double sigma : {0.01, 1.0, 30.0}) {
      const Point2 d = Denoise(cfg, ZeroNet(), x, sigma);
      const double c_skip = Precondition(cfg, sigma).c_skip;
      EXPECT_DOUBLE_EQ(d.x, c_skip * x.x);
      EXPECT_DOUBLE_EQ(d.y, c_skip * x.y);
    }
  }
  const Point2 d = Denoise(DmConfig::Make(DmKind::kVPred), ZeroNet(), {1, 1}, 1.0);
  EXPECT_DOUBLE_EQ(d.x, 0.5);
  EXPECT_DOUBLE_EQ(d.y, 0.5);
  const Point2 far = Denoise(DmConfig::Make(DmKind::kEdm), ZeroNet(), {1, 1}, 1e8);
  EXPECT_LT(std::abs(far.x), 1e-15);
}

TEST(DenoiseTest, ForwardsScaledInputNoiseAndLabel) {
  const DmConfig cfg = DmConfig::Make(DmKind::kEdm);
  const double sigma = 0.9;
  const Preconditioning p = Precondition(cfg, sigma);
  Point2 seen_x;
  double seen_noise = 0;
  int seen_label = -99;
  const RawNetworkFn net = [&](Point2 x, double c_noise, int label) {
    seen_x = x;
    seen_noise = c_noise;
    seen_label = label;
    return Point2{1, 2};
  };
  const Point2 d = Denoise(cfg, net, {2, 4}, sigma, 3);
  EXPECT_DOUBLE_EQ(seen_x.x, 2 * p.c_in);
  EXPECT_DOUBLE_EQ(seen_noise, p.c_noise);
  EXPECT_EQ(seen_label, 3);
  EXPECT_DOUBLE_EQ(d.y, p.c_skip * 4 + p.c_out * 2);
  Denoise(cfg, net, {2, 4}, sigma);
  EXPECT_EQ(seen_label, kNullLabel);
}

TEST(LossWeightTest, TableValues) {
  EXPECT_DOUBLE_EQ(LossWeight(DmConfig::Make(DmKind::kVp), 2.0), 0.25);
  EXPECT_DOUBLE_EQ(LossWeight(DmConfig::Make(DmKind::kVe), 2.0), 0.25);
  EXPECT_NEAR(LossWeight(DmConfig::Make(DmKind::kEdm), std::sqrt(1.0 / 3.0)), 6.0,
              1e-12);
  EXPECT_DOUBLE_EQ(LossWeight(DmConfig::Make(DmKind::kVPred), 1.0), 2.0);
}

TEST(LossWeightTest, ImportanceWeightsRelativeToEdm) {
  const DmConfig edm = DmConfig::Make(DmKind::kEdm);
  const double sd2 = edm.sigma_data * edm.sigma_data;
  CounterRng rng(4, StreamTag::kMonteCarlo);
  for (int i = 0; i < 2000; ++i) {
    const double sigma = SampleTrainingSigma(edm, rng);
    const double s2 = sigma * sigma;
    const double expected[] = {sd2 / (s2 + sd2), sd2 / (s2 + sd2),
                               sd2 * (s2 + 1) / (s2 + sd2), 1.0};
    for (int k = 0; k < 4; ++k) {
      const DmConfig cfg = DmConfig::Make(kAllKinds[k]);
      const double ratio = LossWeight(cfg, sigma) / LossWeight(edm, sigma);
      EXPECT_NEAR(ratio / expected[k], 1.0, 1e-12);
      EXPECT_NEAR(ImportanceWeightVsEdm(cfg, sigma) / expected[k], 1.0, 1e-12);
    }
  }
}

TEST(SampleTrainingSigmaTest, VeLogUniform) {
  const DmConfig cfg = DmConfig::Make(DmKind::kVe);
  CounterRng rng(8, StreamTag::kMonteCarlo);
  const int n = 100000;
  std::vector<double> u(n);
  const double lo = std::log(0.002), hi = std::log(80.0);
  for (double& v : u) v = (std::log(SampleTrainingSigma(cfg, rng)) - lo) / (hi - lo);
  std::sort(u.begin(), u.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    ks = std::max({ks, std::abs(u[i] - double(i) / n), std::abs(u[i] - double(i + 1) / n)});
  }
  EXPECT_LT(ks, 0.01);
  EXPECT_GE(u.front(), 0.0);
  EXPECT_LE(u.back(), 1.0);
}

TEST(SampleTrainingSigmaTest, EdmLogNormalMean) {
  const DmConfig cfg = DmConfig::Make(DmKind::kEdm);
  CounterRng rng(9, StreamTag::kMonteCarlo);
  double sum = 0, sum2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double l = std::log(SampleTrainingSigma(cfg, rng));
    sum += l;
    sum2 += l * l;
  }
  EXPECT_NEAR(sum / n, -1.2, 0.02);
  EXPECT_NEAR(std::sqrt(sum2 / n - (sum / n) * (sum / n)), 1.2, 0.02);
}

TEST(SampleTrainingSigmaTest, BoundedForVpAndVPred) {
  const DmConfig vpred = DmConfig::Make(DmKind::kVPred);
  const DmConfig vp = DmConfig::Make(DmKind::kVp);
  CounterRng rng(10, StreamTag::kMonteCarlo);
  for (int i = 0; i < 10000; ++i) {
    const double s = SampleTrainingSigma(vpred, rng);
    EXPECT_GE(s, VPredSigma(vpred.eps_min));
    EXPECT_LE(s, VPredSigma(vpred.eps_max));
    const double v = SampleTrainingSigma(vp, rng);
    EXPECT_GE(v, VpSigma(vp, vp.eps_t));
    EXPECT_LE(v, VpSigma(vp, 1.0));
  }
}

}  // namespace
}  // namespace dpdm
