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

#include "dpdm/accountant.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dpdm {
namespace {

double LogAddExp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double LogBinomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

std::string_view ConversionName(Conversion c) {
  return c == Conversion::kClassic ? "classic" : "refined";
}

Conversion ParseConversion(std::string_view name) {
  if (name == "classic") return Conversion::kClassic;
  if (name == "refined") return Conversion::kRefined;
  throw std::invalid_argument("unknown conversion: " + std::string(name));
}

std::vector<double> DefaultOrders() {
  std::vector<double> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  orders.push_back(128);
  orders.push_back(256);
  return orders;
}

double RdpGaussian(double alpha, double sigma) {
  if (!(alpha > 1.0) || !(sigma > 0.0)) {
    throw std::domain_error("RDP Gaussian requires alpha > 1 and sigma > 0");
  }
  return alpha / (2.0 * sigma * sigma);
}

double RdpSubsampledGaussian(double alpha, double q, double sigma) {
  if (!(alpha >= 2.0) || alpha != std::floor(alpha) || alpha > 1e6) {
    throw std::domain_error("subsampled Gaussian RDP needs an integer order >= 2");
  }
  if (!(q >= 0.0 && q <= 1.0)) throw std::domain_error("q must lie in [0, 1]");
  if (!(sigma > 0.0)) throw std::domain_error("sigma must be > 0");
  if (q == 0.0) return 0.0;
  if (q == 1.0) return RdpGaussian(alpha, sigma);

  const int a = static_cast<int>(alpha);
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  double log_sum = -std::numeric_limits<double>::infinity();
  for (int j = 0; j <= a; ++j) {
    const double term = LogBinomial(a, j) + (a - j) * log_1mq + j * log_q +
                        j * (j - 1.0) / (2.0 * sigma * sigma);
    log_sum = LogAddExp(log_sum, term);
  }
  return std::max(0.0, log_sum / (alpha - 1.0));
}

RdpCurve SubsampledGaussianCurve(double q, double sigma,
                                 std::span<const double> orders) {
  RdpCurve curve;
  curve.reserve(orders.size());
  for (double a : orders) curve.push_back({a, RdpSubsampledGaussian(a, q, sigma)});
  return curve;
}

RdpCurve Compose(const RdpCurve& per_step, int64_t steps) {
  if (steps < 0) throw std::invalid_argument("step count must be >= 0");
  RdpCurve out = per_step;
  for (RdpPoint& p : out) p.epsilon *= static_cast<double>(steps);
  return out;
}

DpBudget ToDp(const RdpCurve& curve, double delta, Conversion conversion) {
  if (curve.empty()) throw std::invalid_argument("empty RDP curve");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0, 1)");
  }
  DpBudget best{std::numeric_limits<double>::infinity(), delta, 0.0};
  for (const RdpPoint& p : curve) {
    const double a = p.order;
    double eps;
    if (conversion == Conversion::kClassic) {
      eps = p.epsilon + std::log(1.0 / delta) / (a - 1.0);
    } else {
      eps = p.epsilon + std::log1p(-1.0 / a) -
            (std::log(delta) + std::log(a)) / (a - 1.0);
    }
    if (eps < best.epsilon) {
      best.epsilon = eps;
      best.order = a;
    }
  }
  best.epsilon = std::max(0.0, best.epsilon);
  return best;
}

DpBudget ComputeEpsilon(double sigma, double q, int64_t steps, double delta,
                        Conversion conversion, std::span<const double> orders) {
  const std::vector<double> defaults = DefaultOrders();
  if (orders.empty()) orders = defaults;
  if (steps < 0) throw std::invalid_argument("steps must be nonnegative");
  // Nothing is released, so nothing leaks; the conversion's slack is moot.
  if (steps == 0 || q == 0.0) return DpBudget{0.0, delta, 0.0};
  return ToDp(Compose(SubsampledGaussianCurve(q, sigma, orders), steps), delta,
              conversion);
}

double CalibrateSigma(const DpBudget& target, double q, int64_t steps,
                      const CalibrationOptions& options,
                      std::span<const double> orders) {
  auto eps_at = [&](double sigma) {
    return ComputeEpsilon(sigma, q, steps, target.delta, options.conversion,
                          orders)
        .epsilon;
  };
  double lo = options.sigma_lo;
  double hi = options.sigma_hi;
  if (eps_at(lo) <= target.epsilon) return lo;
  const double eps_hi = eps_at(hi);
  if (eps_hi > target.epsilon) {
    std::ostringstream msg;
    msg << "cannot reach epsilon=" << target.epsilon << " (delta=" << target.delta
        << ", q=" << q << ", steps=" << steps << ") with sigma <= " << hi
        << "; epsilon there is " << eps_hi;
    throw std::runtime_error(msg.str());
  }
  while (hi - lo > options.relative_tolerance * lo) {
    const double mid = 0.5 * (lo + hi);
    if (eps_at(mid) > target.epsilon) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

}  // namespace dpdm
