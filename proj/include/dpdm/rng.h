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

#ifndef DPDM_RNG_H_
#define DPDM_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace dpdm {

// Stream tags keep draws for different purposes apart even when the numeric
// coordinates (step, element, ...) coincide.
enum class StreamTag : uint64_t {
  kData = 1,
  kPoisson = 2,
  kLossNoise = 3,
  kLabelDropout = 4,
  kDpNoise = 5,
  kInit = 6,
  kSamplerInit = 7,
  kSamplerPath = 8,
  kMonteCarlo = 9,
};

// Counter-based generator. The output sequence is a pure function of the key
// (seed plus stream coordinates) and the position within the stream, so draws
// for one (step, element, k) never depend on how many other streams exist or
// in which order they are consumed.
//
// Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = uint64_t;

  CounterRng(uint64_t seed, StreamTag tag,
             std::initializer_list<uint64_t> coords = {});

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return Mix(key_ + (++counter_) * kGamma); }

  // Uniform on the open interval (0, 1).
  double Uniform();
  // Standard normal via Box-Muller; caches the second variate.
  double Normal();

  uint64_t key() const { return key_; }

 private:
  static constexpr uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static uint64_t Mix(uint64_t z);

  uint64_t key_;
  uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dpdm

#endif  // DPDM_RNG_H_
