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

#include "dpdm/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dpdm/rng.h"

namespace dpdm {
namespace {

McEstimate MeanAndStdError(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double var = ss / (v.size() - 1);
  return {mean, std::sqrt(var / v.size())};
}

double FdStep(double v, double rel_step) {
  return rel_step * std::max(1.0, std::abs(v));
}

}  // namespace

JacobianFn FiniteDifferenceJacobian(std::function<Point2(Point2, double)> fn,
                                    double rel_step) {
  return [fn = std::move(fn), rel_step](Point2 x, double sigma) {
    Mat2 j;
    for (int c = 0; c < 2; ++c) {
      const double h = FdStep(c == 0 ? x.x : x.y, rel_step);
      Point2 xp = x, xm = x;
      (c == 0 ? xp.x : xp.y) += h;
      (c == 0 ? xm.x : xm.y) -= h;
      const Point2 diff = (1.0 / (2.0 * h)) * (fn(xp, sigma) - fn(xm, sigma));
      j(0, c) = diff.x;
      j(1, c) = diff.y;
    }
    return j;
  };
}

McEstimate JacobianFrobeniusDenoiser(const JacobianFn& jacobian,
                                     const GmmSpec& data, double sigma,
                                     int64_t n_mc, uint64_t seed) {
  if (n_mc < 2) throw std::invalid_argument("need at least two Monte-Carlo draws");
  const std::vector<LabeledSample> clean = SampleData(data, n_mc, seed);
  std::vector<double> values(n_mc);
  for (int64_t i = 0; i < n_mc; ++i) {
    CounterRng rng(seed, StreamTag::kMonteCarlo, {static_cast<uint64_t>(i)});
    const double zx = rng.Normal();
    const double zy = rng.Normal();
    const Point2 x = clean[i].point + sigma * Point2{zx, zy};
    values[i] = jacobian(x, sigma).SquaredFrobenius();
  }
  return MeanAndStdError(values);
}

McEstimate JacobianFrobeniusEndToEnd(const SamplerMap& map, double input_scale,
                                     int64_t n_mc, uint64_t seed,
                                     double rel_step) {
  if (!map.deterministic) {
    throw std::invalid_argument(
        "end-to-end Jacobian is undefined for a stochastic sampler");
  }
  if (n_mc < 2) throw std::invalid_argument("need at least two Monte-Carlo draws");
  // Inputs laid out as [z + h e_x, z - h e_x, z + h e_y, z - h e_y] per draw.
  std::vector<Point2> inputs;
  std::vector<Point2> steps;
  inputs.reserve(4 * n_mc);
  for (int64_t i = 0; i < n_mc; ++i) {
    CounterRng rng(seed, StreamTag::kMonteCarlo, {static_cast<uint64_t>(i)});
    const double zx = rng.Normal();
    const double zy = rng.Normal();
    const Point2 z{zx, zy};
    const double hx = FdStep(z.x, rel_step);
    const double hy = FdStep(z.y, rel_step);
    steps.push_back({hx, hy});
    inputs.push_back(input_scale * (z + Point2{hx, 0.0}));
    inputs.push_back(input_scale * (z - Point2{hx, 0.0}));
    inputs.push_back(input_scale * (z + Point2{0.0, hy}));
    inputs.push_back(input_scale * (z - Point2{0.0, hy}));
  }
  const std::vector<Point2> out = map.run(inputs);
  if (out.size() != inputs.size()) {
    throw std::runtime_error("sampler map returned the wrong number of points");
  }
  std::vector<double> values(n_mc);
  for (int64_t i = 0; i < n_mc; ++i) {
    const Point2 dx = (1.0 / (2.0 * steps[i].x)) * (out[4 * i] - out[4 * i + 1]);
    const Point2 dy =
        (1.0 / (2.0 * steps[i].y)) * (out[4 * i + 2] - out[4 * i + 3]);
    values[i] = dx.SquaredNorm() + dy.SquaredNorm();
  }
  return MeanAndStdError(values);
}

GradientDraw MakeGradientDraw(const DenoiserParams& params, const DmConfig& cfg,
                              const LabeledSample& x, uint64_t seed) {
  return [&params, &cfg, x, seed](uint64_t reseed, int K) {
    const uint64_t id = 0;
    PerSampleResult r = PerSampleLossAndGrads(
        params, cfg, std::span<const LabeledSample>(&x, 1),
        std::span<const uint64_t>(&id, 1), K, NoiseKey{seed, reseed});
    return Eigen::VectorXd(r.grads.row(0).transpose());
  };
}

LossDrawFn MakeLossDraw(const DenoiserParams& params, const DmConfig& cfg,
                        const LabeledSample& x, uint64_t seed) {
  return [&params, &cfg, x, seed](uint64_t reseed, int K) {
    const uint64_t id = 0;
    return PerSampleLosses(params, cfg, std::span<const LabeledSample>(&x, 1),
                           std::span<const uint64_t>(&id, 1), K,
                           NoiseKey{seed, reseed})[0];
  };
}

VarianceReport GradientVarianceExperiment(const GradientDraw& draw,
                                          std::span<const int> k_values,
                                          int n_reseeds) {
  if (n_reseeds < 100) {
    throw std::invalid_argument("gradient variance needs >= 100 reseeds");
  }
  for (size_t i = 0; i < k_values.size(); ++i) {
    if (k_values[i] < 1 || (i > 0 && k_values[i] <= k_values[i - 1])) {
      throw std::invalid_argument("K values must be positive and increasing");
    }
  }
  VarianceReport report;
  std::vector<Eigen::VectorXd> variances;
  for (int K : k_values) {
    // Welford over reseeds, per parameter.
    Eigen::VectorXd mean, m2;
    for (int r = 0; r < n_reseeds; ++r) {
      const Eigen::VectorXd g = draw(static_cast<uint64_t>(r), K);
      if (r == 0) {
        mean = Eigen::VectorXd::Zero(g.size());
        m2 = Eigen::VectorXd::Zero(g.size());
      }
      const Eigen::VectorXd delta = g - mean;
      mean += delta / (r + 1.0);
      m2.array() += delta.array() * (g - mean).array();
    }
    variances.push_back(m2 / (n_reseeds - 1.0));
    VarianceRow row;
    row.K = K;
    row.mean_variance = variances.back().mean();
    report.rows.push_back(row);
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& v : variances) {
    for (double x : v) {
      if (x > 0.0) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    }
  }
  if (!(hi > 0.0)) lo = hi = 1.0;
  if (hi == lo) hi = lo * 10.0;
  const double llo = std::log(lo), lhi = std::log(hi);
  for (size_t k = 0; k < variances.size(); ++k) {
    VarianceRow& row = report.rows[k];
    row.bin_edges.resize(kVarianceHistogramBins + 1);
    for (int b = 0; b <= kVarianceHistogramBins; ++b) {
      row.bin_edges[b] = std::exp(llo + (lhi - llo) * b / kVarianceHistogramBins);
    }
    row.counts.assign(kVarianceHistogramBins, 0);
    for (double x : variances[k]) {
      if (!(x > 0.0)) continue;
      int b = static_cast<int>((std::log(x) - llo) / (lhi - llo) *
                               kVarianceHistogramBins);
      b = std::clamp(b, 0, kVarianceHistogramBins - 1);
      ++row.counts[b];
    }
  }
  return report;
}

VarianceReport GradientVarianceExperiment(const DenoiserParams& params,
                                          const DmConfig& cfg,
                                          const LabeledSample& x,
                                          std::span<const int> k_values,
                                          int n_reseeds, uint64_t seed) {
  return GradientVarianceExperiment(MakeGradientDraw(params, cfg, x, seed),
                                    k_values, n_reseeds);
}

double LossVariance(const LossDrawFn& draw, int K, int n_reseeds) {
  if (n_reseeds < 2) throw std::invalid_argument("loss variance needs >= 2 reseeds");
  double mean = 0.0, m2 = 0.0;
  for (int r = 0; r < n_reseeds; ++r) {
    const double v = draw(static_cast<uint64_t>(r), K);
    const double delta = v - mean;
    mean += delta / (r + 1.0);
    m2 += delta * (v - mean);
  }
  return m2 / (n_reseeds - 1.0);
}

double LossVariance(const DenoiserParams& params, const DmConfig& cfg,
                    const LabeledSample& x, int K, int n_reseeds,
                    uint64_t seed) {
  return LossVariance(MakeLossDraw(params, cfg, x, seed), K, n_reseeds);
}

double LogLogSlope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("slope needs >= 2 matching points");
  }
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace dpdm
