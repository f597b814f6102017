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

#ifndef DPDM_DM_CONFIG_H_
#define DPDM_DM_CONFIG_H_

#include <functional>
#include <string>
#include <string_view>

#include "dpdm/rng.h"
#include "dpdm/types.h"

namespace dpdm {

enum class DmKind { kVp, kVe, kVPred, kEdm };

std::string_view DmKindName(DmKind kind);
// Accepts "vp", "ve", "vpred" (or "v-prediction"), "edm". Throws
// std::invalid_argument otherwise.
DmKind ParseDmKind(std::string_view name);

// One diffusion-model configuration: preconditioning, training noise
// distribution and loss weighting. Constants for kinds other than `kind` are
// carried but unused.
struct DmConfig {
  DmKind kind = DmKind::kEdm;

  // VP
  double beta_d = 19.9;
  double beta_min = 0.1;
  double eps_t = 1e-5;
  int m_disc = 1000;
  // VE
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  // v-prediction, widened so that sigma(t) covers [0.002, 80].
  double eps_min = 0.0;
  double eps_max = 0.0;
  // EDM
  double p_mean = -1.2;
  double p_std = 1.2;
  double sigma_data = 0.0;

  static DmConfig Make(DmKind kind);

  // Throws std::invalid_argument when constants are inconsistent.
  void Validate() const;
};

struct Preconditioning {
  double c_skip = 0.0;
  double c_out = 0.0;
  double c_in = 0.0;
  double c_noise = 0.0;
};

// VP: sigma(t) = sqrt(exp(beta_d t^2 / 2 + beta_min t) - 1) and its inverse.
double VpSigma(const DmConfig& cfg, double t);
double VpTime(const DmConfig& cfg, double sigma);
// v-prediction: sigma(t) = sqrt(cos(pi t / 2)^-2 - 1) and its inverse.
double VPredSigma(double t);
double VPredTime(double sigma);

// Throws std::domain_error for sigma <= 0.
Preconditioning Precondition(const DmConfig& cfg, double sigma);

// lambda(sigma). Throws std::domain_error for sigma <= 0.
double LossWeight(const DmConfig& cfg, double sigma);

// Draws one training noise level from p(sigma).
double SampleTrainingSigma(const DmConfig& cfg, CounterRng& rng);

// lambda(sigma) / lambda_EDM(sigma) with the EDM reference using this
// config's sigma_data.
double ImportanceWeightVsEdm(const DmConfig& cfg, double sigma);

// Raw network F(c_in x; c_noise, label).
using RawNetworkFn =
    std::function<Point2(Point2 scaled_x, double c_noise, int label)>;

// D(x; sigma) = c_skip x + c_out F(c_in x; c_noise).
Point2 Denoise(const DmConfig& cfg, const RawNetworkFn& net, Point2 x,
               double sigma, int label = kNullLabel);

}  // namespace dpdm

#endif  // DPDM_DM_CONFIG_H_
