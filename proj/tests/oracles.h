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

#ifndef DPDM_TESTS_ORACLES_H_
#define DPDM_TESTS_ORACLES_H_

// Independent reference computations used only by tests. Nothing here calls
// into the code paths being checked.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "dpdm/gmm_oracle.h"

namespace dpdm::testing {

// Trapezoid rule over [lo, hi]^2 with `n` intervals per axis.
inline double Quadrature2D(const std::function<double(double, double)>& f,
                           double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double wx = (i == 0 || i == n) ? 0.5 : 1.0;
    const double x = lo + i * h;
    for (int j = 0; j <= n; ++j) {
      const double wy = (j == 0 || j == n) ? 0.5 : 1.0;
      total += wx * wy * f(x, lo + j * h);
    }
  }
  return total * h * h;
}

// Trapezoid rule over [lo, hi].
inline double Quadrature1D(const std::function<double(double)>& f, double lo,
                           double hi, int n) {
  const double h = (hi - lo) / n;
  double total = 0.5 * (f(lo) + f(hi));
  for (int i = 1; i < n; ++i) total += f(lo + i * h);
  return total * h;
}

// Order-alpha Renyi divergence between the Poisson-subsampled Gaussian mixture
// (1-q) N(0, s^2) + q N(1, s^2) and N(0, s^2), by quadrature in log space.
inline double SubsampledRdpQuadrature(int alpha, double q, double s) {
  const double log_q = std::log(q), log_1mq = std::log1p(-q);
  auto log_integrand = [&](double x) {
    const double t = (2 * x - 1) / (2 * s * s);
    const double a = log_1mq, b = log_q + t;
    const double log_ratio = std::max(a, b) + std::log1p(std::exp(-std::abs(a - b)));
    return -0.5 * x * x / (s * s) + alpha * log_ratio;
  };
  // Upper bound on the log integrand; keeps the exponentials in range.
  const double shift = std::max(0.0, alpha * (alpha - 1.0) / (2 * s * s));
  const double lo = -60 * s, hi = std::max(60 * s, alpha + 40 * s);
  const double integral = Quadrature1D(
      [&](double x) { return std::exp(log_integrand(x) - shift); }, lo, hi, 400000);
  return (std::log(integral / (std::sqrt(2 * std::numbers::pi) * s)) + shift) / (alpha - 1);
}

inline double IsoGauss2(double dx, double dy, double var) {
  return std::exp(-0.5 * (dx * dx + dy * dy) / var) /
         (2.0 * std::numbers::pi * var);
}

// Clean data density, written from the mixture definition.
inline double DataDensity(const GmmSpec& spec, double x, double y) {
  double p = 0.0;
  const double var = spec.component_std * spec.component_std;
  for (size_t k = 0; k < spec.means.size(); ++k) {
    p += spec.weights[k] *
         IsoGauss2(x - spec.means[k].x, y - spec.means[k].y, var);
  }
  return p;
}

// Closed-form probability-flow solution for a single isotropic Gaussian
// N(mu, s0^2 I): x(sigma) = mu + (x0 - mu) sqrt((s0^2 + sigma^2)/(s0^2 + sigma0^2)).
inline Point2 GaussianFlow(Point2 mu, double s0, Point2 x_start,
                           double sigma_start, double sigma_end) {
  const double f = std::sqrt((s0 * s0 + sigma_end * sigma_end) /
                             (s0 * s0 + sigma_start * sigma_start));
  return mu + f * (x_start - mu);
}

// Posterior mean for a single Gaussian component.
inline Point2 GaussianPosteriorMean(Point2 mu, double s0, Point2 x, double sigma) {
  return mu + (s0 * s0 / (s0 * s0 + sigma * sigma)) * (x - mu);
}

}  // namespace dpdm::testing

#endif  // DPDM_TESTS_ORACLES_H_
