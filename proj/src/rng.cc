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

#include "dpdm/rng.h"

#include <cmath>
#include <numbers>

namespace dpdm {

uint64_t CounterRng::Mix(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

CounterRng::CounterRng(uint64_t seed, StreamTag tag,
                       std::initializer_list<uint64_t> coords) {
  uint64_t k = Mix(seed + kGamma);
  k = Mix(k ^ (static_cast<uint64_t>(tag) * kGamma));
  uint64_t i = 1;
  for (uint64_t c : coords) {
    k = Mix(k ^ Mix(c + i * 0xd1b54a32d192ed03ULL));
    ++i;
  }
  key_ = k;
}

double CounterRng::Uniform() {
  // 53 random bits, shifted by half an ulp so 0 is never returned.
  return ((*this)() >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

double CounterRng::Normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = Uniform();
  const double u2 = Uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace dpdm
