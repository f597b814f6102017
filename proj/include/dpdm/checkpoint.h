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

#ifndef DPDM_CHECKPOINT_H_
#define DPDM_CHECKPOINT_H_

#include <filesystem>

#include "dpdm/denoiser.h"
#include "dpdm/dm_config.h"

namespace dpdm {

// Binary layout (little-endian), version 1:
//   char[8]  magic "DPDMCKPT"
//   uint32   version
//   int32    depth, width, fourier_freqs, embed_dim, num_classes
//   int32    DM kind (0 vp, 1 ve, 2 vpred, 3 edm)
//   uint64   parameter count P
//   float64  params[P]
//   float64  ema decay
//   float64  ema shadow[P]
struct Checkpoint {
  DmKind dm_kind = DmKind::kEdm;
  DenoiserParams params{Architecture{}};
  EmaParams ema;
};

inline constexpr uint32_t kCheckpointVersion = 1;

// Both throw std::runtime_error on I/O failure or a malformed file.
void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint ReadCheckpoint(const std::filesystem::path& path);

}  // namespace dpdm

#endif  // DPDM_CHECKPOINT_H_
