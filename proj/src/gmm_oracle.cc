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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "dpdm/rng.h"

namespace dpdm {
namespace {

// Per-component log N(x; mu_k, var I) + log w_k.
void ComponentLogJoint(const GmmSpec& spec, Point2 x, double var,
                       std::vector<double>& out) {
  out.resize(spec.means.size());
  const double log_norm = -std::log(2.0 * std::numbers::pi * var);
  for (size_t k = 0; k < spec.means.size(); ++k) {
    const double d2 = (x - spec.means[k]).SquaredNorm();
    out[k] = std::log(spec.weights[k]) + log_norm - 0.5 * d2 / var;
  }
}

double LogSumExp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double e : v) s += std::exp(e - m);
  return m + std::log(s);
}

void CheckSigma(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("noise level must be finite and >= 0, got " +
                                std::to_string(sigma));
  }
}

}  // namespace

GmmSpec GmmSpec::Default9() {
  const double a = 1.0 / std::numbers::sqrt2;
  GmmSpec spec;
  spec.means = {{-a, 0.0},          {-a / 2.0, a / 2.0}, {0.0, a},
                {-a / 2.0, -a / 2.0}, {0.0, 0.0},        {a / 2.0, a / 2.0},
                {0.0, -a},          {a / 2.0, -a / 2.0}, {a, 0.0}};
  spec.component_std = 1.0 / 25.0;
  spec.weights.assign(9, 1.0 / 9.0);
  return spec;
}

GmmSpec GmmSpec::SingleGaussian(Point2 mean, double std_dev) {
  return GmmSpec{{mean}, std_dev, {1.0}};
}

void GmmSpec::Validate() const {
  if (means.empty()) throw std::invalid_argument("GMM has no components");
  if (means.size() != weights.size()) {
    throw std::invalid_argument("GMM means/weights length mismatch");
  }
  if (!(component_std > 0.0) || !std::isfinite(component_std)) {
    throw std::invalid_argument("GMM component_std must be positive");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("GMM weights must be > 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("GMM weights must sum to 1");
  }
  for (const Point2& m : means) {
    if (!m.IsFinite()) throw std::invalid_argument("GMM mean not finite");
  }
}

std::vector<LabeledSample> SampleData(const GmmSpec& spec, int64_t n,
                                      uint64_t seed) {
  spec.Validate();
  std::vector<double> cdf(spec.weights.size());
  double acc = 0.0;
  for (size_t k = 0; k < cdf.size(); ++k) cdf[k] = (acc += spec.weights[k]);
  cdf.back() = 1.0;

  std::vector<LabeledSample> out;
  out.reserve(static_cast<size_t>(std::max<int64_t>(n, 0)));
  for (int64_t i = 0; i < n; ++i) {
    CounterRng rng(seed, StreamTag::kData, {static_cast<uint64_t>(i)});
    const double u = rng.Uniform();
    const int k = static_cast<int>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const double zx = rng.Normal();
    const double zy = rng.Normal();
    out.push_back({spec.means[k] + spec.component_std * Point2{zx, zy}, k});
  }
  return out;
}

double LogPerturbedDensity(const GmmSpec& spec, Point2 x, double sigma) {
  CheckSigma(sigma);
  const double var = spec.component_std * spec.component_std + sigma * sigma;
  std::vector<double> terms;
  ComponentLogJoint(spec, x, var, terms);
  return LogSumExp(terms);
}

double PerturbedDensity(const GmmSpec& spec, Point2 x, double sigma) {
  return std::exp(LogPerturbedDensity(spec, x, sigma));
}

std::vector<double> Responsibilities(const GmmSpec& spec, Point2 x,
                                     double sigma) {
  CheckSigma(sigma);
  const double var = spec.component_std * spec.component_std + sigma * sigma;
  std::vector<double> terms;
  ComponentLogJoint(spec, x, var, terms);
  const double lse = LogSumExp(terms);
  for (double& t : terms) t = std::exp(t - lse);
  return terms;
}

Point2 AnalyticScore(const GmmSpec& spec, Point2 x, double sigma) {
  const std::vector<double> r = Responsibilities(spec, x, sigma);
  const double var = spec.component_std * spec.component_std + sigma * sigma;
  Point2 mean_mu;
  for (size_t k = 0; k < r.size(); ++k) mean_mu += r[k] * spec.means[k];
  return (1.0 / var) * (mean_mu - x);
}

Point2 IdealDenoiser(const GmmSpec& spec, Point2 x, double sigma) {
  return x + (sigma * sigma) * AnalyticScore(spec, x, sigma);
}

Mat2 IdealDenoiserJacobian(const GmmSpec& spec, Point2 x, double sigma) {
  // D(x) = a x + (1 - a) E_r[mu], so J = a I + (sigma^2 / v^2) Cov_r[mu].
  const std::vector<double> r = Responsibilities(spec, x, sigma);
  const double s0sq = spec.component_std * spec.component_std;
  const double var = s0sq + sigma * sigma;
  Point2 mean_mu;
  for (size_t k = 0; k < r.size(); ++k) mean_mu += r[k] * spec.means[k];
  double cxx = 0.0, cxy = 0.0, cyy = 0.0;
  for (size_t k = 0; k < r.size(); ++k) {
    const Point2 d = spec.means[k] - mean_mu;
    cxx += r[k] * d.x * d.x;
    cxy += r[k] * d.x * d.y;
    cyy += r[k] * d.y * d.y;
  }
  const double a = s0sq / var;
  const double c = sigma * sigma / (var * var);
  Mat2 j;
  j(0, 0) = a + c * cxx;
  j(0, 1) = c * cxy;
  j(1, 0) = c * cxy;
  j(1, 1) = a + c * cyy;
  return j;
}

double HVicinity(const GmmSpec& spec, std::span<const Point2> samples,
                 double h) {
  if (samples.empty()) {
    throw std::invalid_argument("h-vicinity of an empty sample set");
  }
  const double radius2 = (h * spec.component_std) * (h * spec.component_std);
  int64_t inside = 0;
  for (const Point2& p : samples) {
    for (const Point2& mu : spec.means) {
      if ((p - mu).SquaredNorm() < radius2) {
        ++inside;
        break;
      }
    }
  }
  return static_cast<double>(inside) / static_cast<double>(samples.size());
}

double GaussianDiskMass(double h) { return -std::expm1(-0.5 * h * h); }

}  // namespace dpdm
