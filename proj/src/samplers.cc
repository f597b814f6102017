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

#include "dpdm/samplers.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "dpdm/parallel.h"

namespace dpdm {
namespace {

Point2 PathNoise(uint64_t seed, uint64_t particle, uint64_t step) {
  CounterRng rng(seed, StreamTag::kSamplerPath, {particle, step});
  const double zx = rng.Normal();
  const double zy = rng.Normal();
  return {zx, zy};
}

// Runs body(offset, chunk) over particle chunks.
void ForEachChunk(std::vector<Point2>& particles, const SamplerOptions& options,
                  const std::function<void(int64_t, std::span<Point2>)>& body) {
  const int64_t n = static_cast<int64_t>(particles.size());
  const int64_t cs = std::max(1, options.chunk_size);
  const int64_t chunks = (n + cs - 1) / cs;
  ParallelFor(chunks, options.threads, [&](int64_t c) {
    const int64_t begin = c * cs;
    const int64_t len = std::min(cs, n - begin);
    body(begin, std::span<Point2>(particles.data() + begin, len));
  });
}

}  // namespace

BatchDenoiser Pointwise(std::function<Point2(Point2, double)> fn) {
  return [fn = std::move(fn)](std::span<const Point2> x, double sigma,
                              std::span<Point2> out) {
    for (size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i], sigma);
  };
}

BatchDenoiser OracleDenoiser(const GmmSpec& spec, int label) {
  spec.Validate();
  if (label == kNullLabel) {
    return Pointwise([spec](Point2 x, double sigma) {
      return IdealDenoiser(spec, x, sigma);
    });
  }
  if (label < 0 || label >= spec.num_components()) {
    throw std::invalid_argument("oracle label out of range");
  }
  const GmmSpec component =
      GmmSpec::SingleGaussian(spec.means[label], spec.component_std);
  return Pointwise([component](Point2 x, double sigma) {
    return IdealDenoiser(component, x, sigma);
  });
}

BatchDenoiser NetworkDenoiser(const DenoiserParams& params, const DmConfig& cfg,
                              int label) {
  return [&params, &cfg, label](std::span<const Point2> x, double sigma,
                                std::span<Point2> out) {
    ForwardBatch(params, cfg, x, sigma, label, out);
  };
}

void ChurnSpec::Validate() const {
  if (!(s_churn >= 0.0 && s_min >= 0.0 && s_max >= s_min && s_noise > 0.0)) {
    throw std::invalid_argument(
        "churn spec needs s_churn >= 0, 0 <= s_min <= s_max, s_noise > 0");
  }
}

std::vector<double> Schedule(const ScheduleSpec& spec) {
  if (spec.steps < 2) throw std::invalid_argument("schedule needs M >= 2");
  if (!(spec.sigma_min > 0.0 && spec.sigma_min < spec.sigma_max)) {
    throw std::invalid_argument("schedule needs 0 < sigma_min < sigma_max");
  }
  if (!(spec.rho > 0.0)) throw std::invalid_argument("schedule needs rho > 0");
  const double hi = std::pow(spec.sigma_max, 1.0 / spec.rho);
  const double lo = std::pow(spec.sigma_min, 1.0 / spec.rho);
  std::vector<double> s(spec.steps);
  for (int i = 0; i < spec.steps; ++i) {
    s[i] = std::pow(hi + i / (spec.steps - 1.0) * (lo - hi), spec.rho);
  }
  s.front() = spec.sigma_max;
  s.back() = spec.sigma_min;
  return s;
}

Point2 ScoreFromDenoiser(const std::function<Point2(Point2, double)>& denoiser,
                         Point2 x, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("score needs sigma > 0");
  return (1.0 / (sigma * sigma)) * (denoiser(x, sigma) - x);
}

BatchDenoiser GuidedDenoiser(BatchDenoiser conditional,
                             BatchDenoiser unconditional, double scale) {
  return [cond = std::move(conditional), uncond = std::move(unconditional),
          scale](std::span<const Point2> x, double sigma, std::span<Point2> out) {
    std::vector<Point2> u(x.size());
    cond(x, sigma, out);
    uncond(x, sigma, u);
    for (size_t i = 0; i < x.size(); ++i) {
      out[i] = (1.0 - scale) * u[i] + scale * out[i];
    }
  };
}

Point2 DdimStep(Point2 x, Point2 d, double sigma_n, double sigma_next,
                bool stochastic, Point2 z) {
  const double ratio = (sigma_next - sigma_n) / sigma_n;
  if (!stochastic) return x + ratio * (x - d);
  return x + (2.0 * ratio) * (x - d) +
         std::sqrt(2.0 * (sigma_n - sigma_next) * sigma_n) * z;
}

double ChurnGamma(double sigma_i, int steps, const ChurnSpec& churn) {
  if (sigma_i >= churn.s_min && sigma_i <= churn.s_max) {
    return std::min(churn.s_churn / steps, std::sqrt(2.0) - 1.0);
  }
  return 0.0;
}

std::vector<Point2> InitialParticles(int64_t n, double sigma, uint64_t seed) {
  std::vector<Point2> x(static_cast<size_t>(std::max<int64_t>(n, 0)));
  for (int64_t i = 0; i < n; ++i) {
    CounterRng rng(seed, StreamTag::kSamplerInit, {static_cast<uint64_t>(i)});
    const double zx = rng.Normal();
    const double zy = rng.Normal();
    x[i] = sigma * Point2{zx, zy};
  }
  return x;
}

std::vector<Point2> DdimFromInitial(const BatchDenoiser& denoiser,
                                    const ScheduleSpec& schedule,
                                    bool stochastic, std::span<const Point2> x0,
                                    const SamplerOptions& options) {
  const std::vector<double> sigmas = Schedule(schedule);
  const int m = schedule.steps;
  std::vector<Point2> particles(x0.begin(), x0.end());
  ForEachChunk(particles, options, [&](int64_t offset, std::span<Point2> x) {
    std::vector<Point2> d(x.size());
    for (int n = 0; n + 1 < m; ++n) {
      denoiser(x, sigmas[n], d);
      for (size_t i = 0; i < x.size(); ++i) {
        const Point2 z =
            stochastic ? PathNoise(options.seed, offset + i, n) : Point2{};
        x[i] = DdimStep(x[i], d[i], sigmas[n], sigmas[n + 1], stochastic, z);
      }
    }
    denoiser(x, sigmas[m - 1], d);
    std::copy(d.begin(), d.end(), x.begin());
  });
  return particles;
}

std::vector<Point2> DdimSample(const BatchDenoiser& denoiser,
                               const ScheduleSpec& schedule, bool stochastic,
                               int64_t n, const SamplerOptions& options) {
  if (n < 1) throw std::invalid_argument("need at least one particle");
  const std::vector<Point2> x0 =
      InitialParticles(n, schedule.sigma_max, options.seed);
  return DdimFromInitial(denoiser, schedule, stochastic, x0, options);
}

std::vector<Point2> ChurnFromInitial(const BatchDenoiser& denoiser,
                                     const ScheduleSpec& schedule,
                                     const ChurnSpec& churn,
                                     std::span<const Point2> x0,
                                     const SamplerOptions& options,
                                     SamplerStats* stats) {
  churn.Validate();
  std::vector<double> sigmas = Schedule(schedule);
  sigmas.push_back(0.0);
  const int m = schedule.steps;
  std::atomic<int64_t> clamps{0};
  std::vector<Point2> particles(x0.begin(), x0.end());
  ForEachChunk(particles, options, [&](int64_t offset, std::span<Point2> x) {
    std::vector<Point2> d(x.size()), f(x.size()), x_hat(x.size());
    for (int n = 0; n < m; ++n) {
      const double gamma = ChurnGamma(sigmas[n], m, churn);
      const double sigma_hat = (1.0 + gamma) * sigmas[n];
      const double inflate = std::sqrt(sigma_hat * sigma_hat - sigmas[n] * sigmas[n]);
      for (size_t i = 0; i < x.size(); ++i) {
        x_hat[i] = x[i];
        if (gamma > 0.0) {
          const Point2 z = churn.s_noise * PathNoise(options.seed, offset + i, n);
          x_hat[i] += inflate * z;
        }
      }
      double eval_sigma = sigma_hat;
      if (eval_sigma > schedule.sigma_max) {
        eval_sigma = schedule.sigma_max;
        clamps += static_cast<int64_t>(x.size());
      }
      denoiser(x_hat, eval_sigma, d);
      const double h = sigmas[n + 1] - sigma_hat;
      for (size_t i = 0; i < x.size(); ++i) {
        f[i] = (1.0 / sigma_hat) * (x_hat[i] - d[i]);
        x[i] = x_hat[i] + h * f[i];
      }
      if (sigmas[n + 1] != 0.0) {
        denoiser(x, sigmas[n + 1], d);
        for (size_t i = 0; i < x.size(); ++i) {
          const Point2 f_next = (1.0 / sigmas[n + 1]) * (x[i] - d[i]);
          x[i] = x_hat[i] + (0.5 * h) * (f[i] + f_next);
        }
      }
    }
  });
  if (stats) stats->sigma_clamps += clamps.load();
  return particles;
}

std::vector<Point2> ChurnSample(const BatchDenoiser& denoiser,
                                const ScheduleSpec& schedule,
                                const ChurnSpec& churn, int64_t n,
                                const SamplerOptions& options,
                                SamplerStats* stats) {
  if (n < 1) throw std::invalid_argument("need at least one particle");
  const std::vector<Point2> x0 =
      InitialParticles(n, schedule.sigma_max, options.seed);
  return ChurnFromInitial(denoiser, schedule, churn, x0, options, stats);
}

}  // namespace dpdm
