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

#ifndef DPDM_EXPERIMENT_CONFIG_H_
#define DPDM_EXPERIMENT_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "dpdm/accountant.h"
#include "dpdm/denoiser.h"
#include "dpdm/dm_config.h"
#include "dpdm/dp_sgd.h"
#include "dpdm/gmm_oracle.h"
#include "dpdm/samplers.h"

namespace dpdm {

// Raised for malformed or inconsistent configuration files.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PrivacySection {
  double clip = 1.0;
  // Exactly one of sigma_dp / target_epsilon is set.
  std::optional<double> sigma_dp;
  std::optional<double> target_epsilon;
  double delta = 1e-5;
  Conversion conversion = Conversion::kRefined;
};

struct SamplerSection {
  std::string kind = "ddim-stoch";  // ddim-det | ddim-stoch | churn
  ScheduleSpec schedule{1000};
  ChurnSpec churn;
  GuidanceSpec guidance;
};

struct ExperimentConfig {
  // data
  GmmSpec gmm = GmmSpec::Default9();
  bool gmm_is_default = true;
  int64_t data_size = 100000;
  uint64_t data_seed = 0;
  // model
  DmKind dm = DmKind::kEdm;
  Architecture arch;
  bool conditional = false;
  double label_dropout = 0.1;
  // privacy; empty means non-private
  std::optional<PrivacySection> privacy;
  // optimizer
  OptimizerSpec optimizer;
  double ema_decay = 0.999;
  // sampler defaults used by `sample`
  SamplerSection sampler;
  // run
  uint64_t seed = 0;
  int64_t batch_size = 256;
  std::optional<double> epochs;
  std::optional<int64_t> steps;
  int noise_multiplicity = 1;
  std::string output_dir;
  int threads = 1;
  int chunk_size = 16;

  double subsample_rate() const {
    return static_cast<double>(batch_size) / static_cast<double>(data_size);
  }
  // Explicit steps, else epochs * round(N / B).
  int64_t total_steps() const;
};

// Strict parsing: unknown keys, wrong types and out-of-range values raise
// ConfigError.
ExperimentConfig ParseConfig(const nlohmann::json& j);
ExperimentConfig LoadConfig(const std::filesystem::path& path);

// Fully resolved snapshot (every default spelled out). ParseConfig accepts it.
nlohmann::json ToJson(const ExperimentConfig& cfg);

}  // namespace dpdm

#endif  // DPDM_EXPERIMENT_CONFIG_H_
