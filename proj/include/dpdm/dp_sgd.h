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

#ifndef DPDM_DP_SGD_H_
#define DPDM_DP_SGD_H_

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dpdm/denoiser.h"
#include "dpdm/dm_config.h"
#include "dpdm/rng.h"
#include "dpdm/types.h"

namespace dpdm {

inline constexpr double kNoClipping = std::numeric_limits<double>::infinity();

struct PrivacySpec {
  double clip_c = 1.0;
  double sigma_dp = 1.0;
  double q = 0.01;
  int64_t total_steps = 0;
  double delta = 1e-5;

  // Plain Adam on the diffusion loss: no clipping, no noise.
  static PrivacySpec NonPrivate(double q, int64_t steps);

  bool is_private() const { return sigma_dp > 0.0; }
  // Throws std::invalid_argument on inconsistent values.
  void Validate() const;
};

struct OptimizerSpec {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct SanitizedGradient {
  Eigen::VectorXd gradient;
  int64_t actual_batch_size = 0;
};

// Each index in [0, n) is kept independently with probability q.
std::vector<int64_t> PoissonSample(int64_t n, double q, CounterRng& rng);

// min(1, C / ||g||), with 1 for the zero vector.
double ClipFactor(double norm, double clip_c);
// Scales g in place so that ||g|| <= C; returns the norm before clipping.
double ClipInPlace(std::span<double> g, double clip_c);
Eigen::VectorXd Clip(const Eigen::VectorXd& g, double clip_c);

// (1/B) sum_i clip_C(row_i), B being the expected batch size.
Eigen::VectorXd ClippedAverage(const PerSampleGrads& per_sample, double clip_c,
                               double expected_batch);

// ClippedAverage + (C/B) z with z ~ N(0, sigma_dp^2 I) drawn from rng.
SanitizedGradient Sanitize(const PerSampleGrads& per_sample, double clip_c,
                           double sigma_dp, double expected_batch,
                           CounterRng& rng);

// Adam with bias correction. Only ever fed sanitized gradients.
class Adam {
 public:
  Adam(const OptimizerSpec& spec, Eigen::Index dim);

  void Step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad);
  int64_t steps() const { return t_; }

 private:
  OptimizerSpec spec_;
  Eigen::VectorXd m_, v_;
  int64_t t_ = 0;
};

// T = epochs * round(N / B).
int64_t StepsForEpochs(double epochs, int64_t dataset_size,
                       double expected_batch);

struct TrainOptions {
  DmConfig dm = DmConfig::Make(DmKind::kEdm);
  Architecture arch;
  PrivacySpec privacy;
  OptimizerSpec optimizer;
  int noise_multiplicity = 1;
  double ema_decay = 0.999;
  uint64_t seed = 0;
  // When false every label is replaced by the null token.
  bool conditional = false;
  // Probability of dropping a label to the null token in conditional runs.
  double label_dropout = 0.1;
  // Elements per per-sample-gradient chunk. Part of the determinism contract:
  // results do not depend on `threads`, only on this.
  int chunk_size = 16;
  int threads = 1;
};

struct StepLog {
  int64_t step = 0;
  double loss_mean = 0.0;
  int64_t realized_batch = 0;
  double median_grad_norm = 0.0;
  double fraction_clipped = 0.0;
};

// What the accountant must be told about a finished run.
struct ReleaseRecord {
  double clip_c = 0.0;
  double sigma_dp = 0.0;
  double q = 0.0;
  int64_t releases = 0;

  friend bool operator==(const ReleaseRecord&, const ReleaseRecord&) = default;
};

struct TrainResult {
  DenoiserParams params;
  EmaParams ema;
  std::vector<StepLog> log;
  ReleaseRecord releases;
};

// DP-SGD for the denoiser: Poisson batch, per-sample K-draw losses and
// gradients, clipping, averaging by the expected batch size, Gaussian noise,
// Adam, EMA. Empty batches still take a (noise-only) step. Throws
// std::runtime_error if parameters become non-finite.
TrainResult Train(std::span<const LabeledSample> data,
                  const TrainOptions& options,
                  const std::function<void(const StepLog&)>& on_step = {});

}  // namespace dpdm

#endif  // DPDM_DP_SGD_H_
