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

#ifndef DPDM_ACCOUNTANT_H_
#define DPDM_ACCOUNTANT_H_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace dpdm {

// (alpha, epsilon(alpha)) pairs with strictly increasing orders.
struct RdpPoint {
  double order;
  double epsilon;
};
using RdpCurve = std::vector<RdpPoint>;

struct DpBudget {
  double epsilon = 0.0;
  double delta = 0.0;
  // Order at which the minimum was attained; 0 when not applicable.
  double order = 0.0;
};

// How an RDP curve is turned into (epsilon, delta)-DP.
//   kClassic: eps = rdp(a) + log(1/delta) / (a - 1)
//   kRefined: eps = rdp(a) + log((a - 1) / a) - (log(delta) + log(a)) / (a - 1)
// The refined rule is what common DP-SGD libraries report and is never larger
// than the classic one for a >= 2.
enum class Conversion { kClassic, kRefined };

std::string_view ConversionName(Conversion c);
Conversion ParseConversion(std::string_view name);

// {2, 3, ..., 64, 128, 256}.
std::vector<double> DefaultOrders();

// alpha / (2 sigma^2). Throws std::domain_error unless alpha > 1, sigma > 0.
double RdpGaussian(double alpha, double sigma);

// Integer-order RDP bound of the Poisson-subsampled Gaussian mechanism with
// unit sensitivity:
//   (1/(a-1)) log sum_{j=0}^{a} C(a,j) (1-q)^{a-j} q^j exp(j(j-1)/(2 sigma^2)).
// Throws std::domain_error for non-integer or < 2 alpha, q outside [0, 1] or
// sigma <= 0.
double RdpSubsampledGaussian(double alpha, double q, double sigma);

// Per-step RDP curve over the given orders.
RdpCurve SubsampledGaussianCurve(double q, double sigma,
                                 std::span<const double> orders);

// Multiplies every epsilon by T. Throws std::invalid_argument for T < 0.
RdpCurve Compose(const RdpCurve& per_step, int64_t steps);

// Minimum over the curve; ties resolve to the smaller order. Throws
// std::invalid_argument for an empty curve or delta outside (0, 1).
DpBudget ToDp(const RdpCurve& curve, double delta,
              Conversion conversion = Conversion::kRefined);

// Convenience: compose `steps` releases and convert.
DpBudget ComputeEpsilon(double sigma, double q, int64_t steps, double delta,
                        Conversion conversion = Conversion::kRefined,
                        std::span<const double> orders = {});

struct CalibrationOptions {
  double sigma_lo = 0.3;
  double sigma_hi = 500.0;
  double relative_tolerance = 1e-4;
  Conversion conversion = Conversion::kRefined;
};

// Smallest sigma in [sigma_lo, sigma_hi] (to relative tolerance) whose
// composed epsilon is <= target.epsilon. Returns sigma_lo when it already
// satisfies the target (e.g. steps == 0). Throws std::runtime_error when even
// sigma_hi misses the target.
double CalibrateSigma(const DpBudget& target, double q, int64_t steps,
                      const CalibrationOptions& options = {},
                      std::span<const double> orders = {});

}  // namespace dpdm

#endif  // DPDM_ACCOUNTANT_H_
