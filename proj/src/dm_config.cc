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

#include "dpdm/dm_config.h"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dpdm {
namespace {

void CheckPositiveSigma(double sigma) {
  if (!(sigma > 0.0)) {
    throw std::domain_error("noise level must be > 0, got " +
                            std::to_string(sigma));
  }
}

}  // namespace

std::string_view DmKindName(DmKind kind) {
  switch (kind) {
    case DmKind::kVp:
      return "vp";
    case DmKind::kVe:
      return "ve";
    case DmKind::kVPred:
      return "vpred";
    case DmKind::kEdm:
      return "edm";
  }
  return "unknown";
}

DmKind ParseDmKind(std::string_view name) {
  if (name == "vp") return DmKind::kVp;
  if (name == "ve") return DmKind::kVe;
  if (name == "vpred" || name == "v-prediction") return DmKind::kVPred;
  if (name == "edm") return DmKind::kEdm;
  throw std::invalid_argument("unknown DM config kind: " + std::string(name));
}

DmConfig DmConfig::Make(DmKind kind) {
  DmConfig cfg;
  cfg.kind = kind;
  cfg.eps_min = VPredTime(std::exp(-6.5));  // sigma^2 = e^-13
  cfg.eps_max = VPredTime(std::exp(4.5));   // sigma^2 = e^9
  cfg.sigma_data = std::sqrt(1.0 / 3.0);
  return cfg;
}

void DmConfig::Validate() const {
  if (!(sigma_data > 0.0)) throw std::invalid_argument("sigma_data must be > 0");
  if (!(sigma_min > 0.0 && sigma_min < sigma_max)) {
    throw std::invalid_argument("need 0 < sigma_min < sigma_max");
  }
  if (!(p_std > 0.0)) throw std::invalid_argument("P_std must be > 0");
  if (!(0.0 < eps_min && eps_min < eps_max && eps_max < 1.0)) {
    throw std::invalid_argument("need 0 < eps_min < eps_max < 1");
  }
  if (!(beta_d > 0.0 && beta_min >= 0.0 && eps_t > 0.0 && eps_t < 1.0)) {
    throw std::invalid_argument("invalid VP constants");
  }
  if (m_disc < 2) throw std::invalid_argument("M_disc must be >= 2");
}

double VpSigma(const DmConfig& cfg, double t) {
  return std::sqrt(std::expm1(0.5 * cfg.beta_d * t * t + cfg.beta_min * t));
}

double VpTime(const DmConfig& cfg, double sigma) {
  // Positive root of beta_d/2 t^2 + beta_min t - ln(1 + sigma^2) = 0.
  const double rhs = std::log1p(sigma * sigma);
  return (-cfg.beta_min +
          std::sqrt(cfg.beta_min * cfg.beta_min + 2.0 * cfg.beta_d * rhs)) /
         cfg.beta_d;
}

double VPredSigma(double t) {
  return std::tan(0.5 * std::numbers::pi * t);
}

double VPredTime(double sigma) {
  return (2.0 / std::numbers::pi) * std::acos(1.0 / std::sqrt(1.0 + sigma * sigma));
}

Preconditioning Precondition(const DmConfig& cfg, double sigma) {
  CheckPositiveSigma(sigma);
  const double s2 = sigma * sigma;
  Preconditioning p;
  switch (cfg.kind) {
    case DmKind::kVp:
      p.c_skip = 1.0;
      p.c_out = -sigma;
      p.c_in = 1.0 / std::sqrt(s2 + 1.0);
      p.c_noise = (cfg.m_disc - 1) * VpTime(cfg, sigma);
      break;
    case DmKind::kVe:
      p.c_skip = 1.0;
      p.c_out = sigma;
      p.c_in = 1.0;
      p.c_noise = std::log(0.5 * sigma);
      break;
    case DmKind::kVPred:
      p.c_skip = 1.0 / (s2 + 1.0);
      p.c_out = sigma / std::sqrt(1.0 + s2);
      p.c_in = 1.0 / std::sqrt(s2 + 1.0);
      p.c_noise = VPredTime(sigma);
      break;
    case DmKind::kEdm: {
      const double sd2 = cfg.sigma_data * cfg.sigma_data;
      p.c_skip = sd2 / (s2 + sd2);
      p.c_out = sigma * cfg.sigma_data / std::sqrt(sd2 + s2);
      p.c_in = 1.0 / std::sqrt(s2 + sd2);
      p.c_noise = 0.25 * std::log(sigma);
      break;
    }
  }
  return p;
}

double LossWeight(const DmConfig& cfg, double sigma) {
  CheckPositiveSigma(sigma);
  const double s2 = sigma * sigma;
  switch (cfg.kind) {
    case DmKind::kVp:
    case DmKind::kVe:
      return 1.0 / s2;
    case DmKind::kVPred:
      return (s2 + 1.0) / s2;
    case DmKind::kEdm: {
      const double sd2 = cfg.sigma_data * cfg.sigma_data;
      return (s2 + sd2) / (s2 * sd2);
    }
  }
  return 0.0;
}

double SampleTrainingSigma(const DmConfig& cfg, CounterRng& rng) {
  const double u = rng.Uniform();
  switch (cfg.kind) {
    case DmKind::kVp:
      return VpSigma(cfg, cfg.eps_t + u * (1.0 - cfg.eps_t));
    case DmKind::kVe: {
      const double lo = std::log(cfg.sigma_min);
      const double hi = std::log(cfg.sigma_max);
      return std::exp(lo + u * (hi - lo));
    }
    case DmKind::kVPred:
      return VPredSigma(cfg.eps_min + u * (cfg.eps_max - cfg.eps_min));
    case DmKind::kEdm:
      return std::exp(cfg.p_mean + cfg.p_std * rng.Normal());
  }
  return 0.0;
}

double ImportanceWeightVsEdm(const DmConfig& cfg, double sigma) {
  DmConfig edm = cfg;
  edm.kind = DmKind::kEdm;
  return LossWeight(cfg, sigma) / LossWeight(edm, sigma);
}

Point2 Denoise(const DmConfig& cfg, const RawNetworkFn& net, Point2 x,
               double sigma, int label) {
  const Preconditioning p = Precondition(cfg, sigma);
  const Point2 f = net(p.c_in * x, p.c_noise, label);
  return p.c_skip * x + p.c_out * f;
}

}  // namespace dpdm
