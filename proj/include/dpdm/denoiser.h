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

#ifndef DPDM_DENOISER_H_
#define DPDM_DENOISER_H_

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dpdm/dm_config.h"
#include "dpdm/types.h"

namespace dpdm {

// Shape of the raw network F. The input is
//   [c_in * x (2), sin/cos Fourier features of the noise input (2 * freqs),
//    class embedding (embed_dim)]
// followed by a linear lift to `width`, `depth` residual blocks
// h <- h + W silu(h) + b, and a linear head on silu(h) to 2 outputs.
struct Architecture {
  int depth = 4;
  int width = 128;
  int fourier_freqs = 16;
  int embed_dim = 16;
  // Real classes; one extra embedding row is reserved for the null token.
  int num_classes = 9;

  int input_dim() const { return 2 + 2 * fourier_freqs + embed_dim; }
  int64_t ParameterCount() const;
  void Validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Offsets of each tensor inside the flat parameter vector. Matrices are stored
// column-major.
struct ParameterLayout {
  explicit ParameterLayout(const Architecture& arch);

  Eigen::Index w_in, b_in;
  std::vector<Eigen::Index> w_block, b_block;
  Eigen::Index w_out, b_out;
  Eigen::Index embedding;  // embed_dim x (num_classes + 1)
  Eigen::Index total;
};

struct DenoiserParams {
  Architecture arch;
  Eigen::VectorXd values;

  // All-zero parameters.
  explicit DenoiserParams(const Architecture& arch);

  // Hidden weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), embeddings ~ U(-1, 1),
  // biases and the output head zero, so that D(x; sigma) = c_skip x at init.
  static DenoiserParams Initialize(const Architecture& arch, uint64_t seed);

  Eigen::Index size() const { return values.size(); }
  bool AllFinite() const { return values.allFinite(); }
};

struct EmaParams {
  Eigen::VectorXd shadow;
  double decay = 0.999;
};

// shadow <- decay * shadow + (1 - decay) * params. Throws
// std::invalid_argument on a dimension mismatch or decay outside [0, 1].
EmaParams EmaUpdate(EmaParams ema, const DenoiserParams& params);

// Row i holds the gradient of element i's loss.
using PerSampleGrads =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// The network sees a per-config rescaling of c_noise so that the Fourier
// features span a comparable range for every config.
double NoiseFeatureInput(const DmConfig& cfg, double c_noise);

// Raw F(scaled_x; noise_input, label). Throws std::invalid_argument if the
// label is out of range.
Point2 RawForward(const DenoiserParams& params, Point2 scaled_x,
                  double noise_input, int label);

// Preconditioned D(x; sigma, label).
Point2 Forward(const DenoiserParams& params, const DmConfig& cfg, Point2 x,
               double sigma, int label = kNullLabel);

// Evaluates D for many points at one noise level.
void ForwardBatch(const DenoiserParams& params, const DmConfig& cfg,
                  std::span<const Point2> x, double sigma, int label,
                  std::span<Point2> out);

// Exact dD/dx via two reverse passes.
Mat2 InputJacobian(const DenoiserParams& params, const DmConfig& cfg, Point2 x,
                   double sigma, int label = kNullLabel);

// Gradient of <cotangent, D(x; sigma, label)> with respect to the parameters.
Eigen::VectorXd OutputParamGradient(const DenoiserParams& params,
                                    const DmConfig& cfg, Point2 x, double sigma,
                                    int label, Point2 cotangent);

// Identifies the noise streams of one loss evaluation. Draws for
// (seed, step, element, k) are independent of every other element.
struct NoiseKey {
  uint64_t seed = 0;
  uint64_t step = 0;
};

struct LossDraw {
  double sigma;
  Point2 noise;
};

LossDraw DrawLossNoise(const DmConfig& cfg, NoiseKey key, uint64_t element,
                       int k);

struct PerSampleResult {
  std::vector<double> losses;
  PerSampleGrads grads;
};

// For each element i:
//   l_i = (1/K) sum_k lambda(sigma_ik) ||D(x_i + n_ik; sigma_ik, y_i) - x_i||^2
// and its exact parameter gradient. `element_ids[i]` selects element i's
// noise stream; pass dataset indices so that removing an element leaves the
// other elements' draws untouched. Throws std::invalid_argument for K < 1, an
// empty batch, or mismatched id count.
PerSampleResult PerSampleLossAndGrads(const DenoiserParams& params,
                                      const DmConfig& cfg,
                                      std::span<const LabeledSample> batch,
                                      std::span<const uint64_t> element_ids,
                                      int K, NoiseKey key);

// Same losses without gradients.
std::vector<double> PerSampleLosses(const DenoiserParams& params,
                                    const DmConfig& cfg,
                                    std::span<const LabeledSample> batch,
                                    std::span<const uint64_t> element_ids,
                                    int K, NoiseKey key);

// Sum of per-sample losses; writes the gradient of that sum into *grad.
double SummedLossAndGradient(const DenoiserParams& params, const DmConfig& cfg,
                             std::span<const LabeledSample> batch,
                             std::span<const uint64_t> element_ids, int K,
                             NoiseKey key, Eigen::VectorXd* grad);

}  // namespace dpdm

#endif  // DPDM_DENOISER_H_
