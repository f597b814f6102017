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

#ifndef DPDM_SAMPLERS_H_
#define DPDM_SAMPLERS_H_

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "dpdm/denoiser.h"
#include "dpdm/gmm_oracle.h"
#include "dpdm/rng.h"
#include "dpdm/types.h"

namespace dpdm {

// Evaluates D(x_i; sigma) for every particle at a shared noise level. Must be
// safe to call concurrently.
using BatchDenoiser = std::function<void(std::span<const Point2> x,
                                         double sigma, std::span<Point2> out)>;

// Lifts a pointwise denoiser.
BatchDenoiser Pointwise(std::function<Point2(Point2, double)> fn);

// Ideal denoiser of a mixture. With `label` set, the denoiser of that single
// component (the class-conditional oracle).
BatchDenoiser OracleDenoiser(const GmmSpec& spec, int label = kNullLabel);

// Trained network. The params/config objects must outlive the denoiser.
BatchDenoiser NetworkDenoiser(const DenoiserParams& params, const DmConfig& cfg,
                              int label = kNullLabel);

struct ScheduleSpec {
  int steps = 50;
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double rho = 7.0;
};

struct ChurnSpec {
  double s_churn = 0.0;
  double s_min = 0.0;
  double s_max = std::numeric_limits<double>::infinity();
  double s_noise = 1.0;

  void Validate() const;
};

struct GuidanceSpec {
  double scale = 1.0;
  int label = kNullLabel;
};

// sigma_i = (s_max^(1/rho) + i/(M-1) (s_min^(1/rho) - s_max^(1/rho)))^rho.
// Throws std::invalid_argument for M < 2 or an inverted range.
std::vector<double> Schedule(const ScheduleSpec& spec);

// (D(x; sigma) - x) / sigma^2. Throws std::domain_error for sigma <= 0.
Point2 ScoreFromDenoiser(const std::function<Point2(Point2, double)>& denoiser,
                         Point2 x, double sigma);

// (1 - w) D_uncond + w D_cond.
BatchDenoiser GuidedDenoiser(BatchDenoiser conditional,
                             BatchDenoiser unconditional, double scale);

// One DDIM update from sigma_n to sigma_next given d = D(x; sigma_n). The
// stochastic form doubles the drift and adds sqrt(2 (s_n - s_next) s_n) z.
Point2 DdimStep(Point2 x, Point2 d, double sigma_n, double sigma_next,
                bool stochastic, Point2 z);

// gamma_i for the churn sampler.
double ChurnGamma(double sigma_i, int steps, const ChurnSpec& churn);

struct SamplerStats {
  // Denoiser calls whose inflated noise level was clamped to sigma_max.
  int64_t sigma_clamps = 0;
};

struct SamplerOptions {
  uint64_t seed = 0;
  // Particles per work chunk; per-particle RNG streams make results
  // independent of this and of `threads`.
  int chunk_size = 4096;
  int threads = 1;
};

// DDIM from given initial points x_0 (already at noise level sigma_0).
// Returns D(x_{M-1}; sigma_{M-1}) for each particle.
std::vector<Point2> DdimFromInitial(const BatchDenoiser& denoiser,
                                    const ScheduleSpec& schedule,
                                    bool stochastic, std::span<const Point2> x0,
                                    const SamplerOptions& options = {});

// Draws x_0 ~ N(0, sigma_max^2 I) per particle and runs DDIM.
std::vector<Point2> DdimSample(const BatchDenoiser& denoiser,
                               const ScheduleSpec& schedule, bool stochastic,
                               int64_t n, const SamplerOptions& options = {});

std::vector<Point2> ChurnFromInitial(const BatchDenoiser& denoiser,
                                     const ScheduleSpec& schedule,
                                     const ChurnSpec& churn,
                                     std::span<const Point2> x0,
                                     const SamplerOptions& options = {},
                                     SamplerStats* stats = nullptr);

std::vector<Point2> ChurnSample(const BatchDenoiser& denoiser,
                                const ScheduleSpec& schedule,
                                const ChurnSpec& churn, int64_t n,
                                const SamplerOptions& options = {},
                                SamplerStats* stats = nullptr);

// Initial particles x_0 ~ N(0, sigma^2 I) from per-particle streams.
std::vector<Point2> InitialParticles(int64_t n, double sigma, uint64_t seed);

}  // namespace dpdm

#endif  // DPDM_SAMPLERS_H_
