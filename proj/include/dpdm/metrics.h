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

#ifndef DPDM_METRICS_H_
#define DPDM_METRICS_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dpdm/denoiser.h"
#include "dpdm/dm_config.h"
#include "dpdm/gmm_oracle.h"
#include "dpdm/types.h"

namespace dpdm {

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

struct ComplexityPoint {
  double sigma = 0.0;
  McEstimate jf;
};

struct ComplexityReport {
  std::vector<ComplexityPoint> per_sigma;
  std::optional<McEstimate> end_to_end;
};

// dD/dx at (x, sigma).
using JacobianFn = std::function<Mat2(Point2, double)>;

// Central differences with step rel_step * max(1, |x_c|) per coordinate.
JacobianFn FiniteDifferenceJacobian(std::function<Point2(Point2, double)> fn,
                                    double rel_step = 1e-4);

// E_{x ~ p(x; sigma)} ||dD/dx||_F^2, with p(x; sigma) the data mixture
// convolved with N(0, sigma^2 I). Throws std::invalid_argument for n_mc < 2.
McEstimate JacobianFrobeniusDenoiser(const JacobianFn& jacobian,
                                     const GmmSpec& data, double sigma,
                                     int64_t n_mc, uint64_t seed);

// A map from initial sampler states to outputs, evaluated in bulk.
struct SamplerMap {
  std::function<std::vector<Point2>(std::span<const Point2>)> run;
  bool deterministic = true;
};

// E_{z ~ N(0, I)} ||d/dz S(input_scale * z)||_F^2 by central differences.
// Throws std::invalid_argument for a stochastic map or n_mc < 2.
McEstimate JacobianFrobeniusEndToEnd(const SamplerMap& map, double input_scale,
                                     int64_t n_mc, uint64_t seed,
                                     double rel_step = 1e-4);

// Gradient of one element's K-draw loss for noise reseed r.
using GradientDraw = std::function<Eigen::VectorXd(uint64_t reseed, int K)>;
using LossDrawFn = std::function<double(uint64_t reseed, int K)>;

GradientDraw MakeGradientDraw(const DenoiserParams& params, const DmConfig& cfg,
                              const LabeledSample& x, uint64_t seed);
LossDrawFn MakeLossDraw(const DenoiserParams& params, const DmConfig& cfg,
                        const LabeledSample& x, uint64_t seed);

struct VarianceRow {
  int K = 0;
  double mean_variance = 0.0;
  std::vector<double> bin_edges;  // 51 edges, log-spaced
  std::vector<int64_t> counts;    // 50 bins
};

struct VarianceReport {
  std::vector<VarianceRow> rows;
};

inline constexpr int kVarianceHistogramBins = 50;

// Per-parameter gradient variance under noise resampling, for each K.
// Requires strictly increasing K values and n_reseeds >= 100.
VarianceReport GradientVarianceExperiment(const GradientDraw& draw,
                                          std::span<const int> k_values,
                                          int n_reseeds);

VarianceReport GradientVarianceExperiment(const DenoiserParams& params,
                                          const DmConfig& cfg,
                                          const LabeledSample& x,
                                          std::span<const int> k_values,
                                          int n_reseeds, uint64_t seed);

// Unbiased sample variance of the K-draw loss. Throws std::invalid_argument
// for n_reseeds < 2.
double LossVariance(const LossDrawFn& draw, int K, int n_reseeds);
double LossVariance(const DenoiserParams& params, const DmConfig& cfg,
                    const LabeledSample& x, int K, int n_reseeds,
                    uint64_t seed);

// Least-squares slope of log(y) against log(x).
double LogLogSlope(std::span<const double> x, std::span<const double> y);

}  // namespace dpdm

#endif  // DPDM_METRICS_H_
