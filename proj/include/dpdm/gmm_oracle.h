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

#ifndef DPDM_GMM_ORACLE_H_
#define DPDM_GMM_ORACLE_H_

#include <cstdint>
#include <span>
#include <vector>

#include "dpdm/types.h"

namespace dpdm {

// Isotropic 2D Gaussian mixture. Every component shares the standard
// deviation `component_std`.
struct GmmSpec {
  std::vector<Point2> means;
  double component_std = 0.0;
  std::vector<double> weights;

  // Nine modes on a rotated square lattice with spacing a/2 = 1/(2*sqrt(2)),
  // sigma0 = 1/25, uniform weights.
  static GmmSpec Default9();
  // One component with weight 1.
  static GmmSpec SingleGaussian(Point2 mean, double std_dev);

  int num_components() const { return static_cast<int>(means.size()); }

  // Throws std::invalid_argument on an ill-formed spec.
  void Validate() const;
};

// Draws n samples: component k ~ weights, point ~ N(mu_k, sigma0^2 I), and the
// label is k.
std::vector<LabeledSample> SampleData(const GmmSpec& spec, int64_t n,
                                      uint64_t seed);

// log p(x; sigma) with p(x; sigma) = sum_k w_k N(x; mu_k, (sigma0^2+sigma^2) I).
double LogPerturbedDensity(const GmmSpec& spec, Point2 x, double sigma);
double PerturbedDensity(const GmmSpec& spec, Point2 x, double sigma);

// Posterior responsibilities of each component given a noisy observation,
// computed with log-sum-exp.
std::vector<double> Responsibilities(const GmmSpec& spec, Point2 x,
                                     double sigma);

// grad_x log p(x; sigma).
Point2 AnalyticScore(const GmmSpec& spec, Point2 x, double sigma);

// Bayes-optimal denoiser E[x0 | x0 + n = x], n ~ N(0, sigma^2 I).
Point2 IdealDenoiser(const GmmSpec& spec, Point2 x, double sigma);

// Exact Jacobian of IdealDenoiser with respect to x.
Mat2 IdealDenoiserJacobian(const GmmSpec& spec, Point2 x, double sigma);

// Fraction of samples with ||x - mu_k|| < h * sigma0 for some k. Throws
// std::invalid_argument for an empty sample list.
double HVicinity(const GmmSpec& spec, std::span<const Point2> samples,
                 double h);

// 1 - exp(-h^2 / 2): mass of an isotropic 2D Gaussian inside radius h std devs.
double GaussianDiskMass(double h);

}  // namespace dpdm

#endif  // DPDM_GMM_ORACLE_H_
