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

#include "dpdm/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dpdm {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'D', 'P', 'D', 'M', 'C', 'K', 'P', 'T'};

template <typename T>
void Put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return v;
}

}  // namespace

void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (ckpt.ema.shadow.size() != ckpt.params.size()) {
    throw std::runtime_error("checkpoint EMA size does not match parameters");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  Put<uint32_t>(out, kCheckpointVersion);
  const Architecture& a = ckpt.params.arch;
  for (int32_t v : {a.depth, a.width, a.fourier_freqs, a.embed_dim, a.num_classes}) {
    Put<int32_t>(out, v);
  }
  Put<int32_t>(out, static_cast<int32_t>(ckpt.dm_kind));
  Put<uint64_t>(out, static_cast<uint64_t>(ckpt.params.size()));
  out.write(reinterpret_cast<const char*>(ckpt.params.values.data()),
            ckpt.params.size() * sizeof(double));
  Put<double>(out, ckpt.ema.decay);
  out.write(reinterpret_cast<const char*>(ckpt.ema.shadow.data()),
            ckpt.ema.shadow.size() * sizeof(double));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint ReadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint file");
  }
  const uint32_t version = Get<uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  Architecture arch;
  arch.depth = Get<int32_t>(in);
  arch.width = Get<int32_t>(in);
  arch.fourier_freqs = Get<int32_t>(in);
  arch.embed_dim = Get<int32_t>(in);
  arch.num_classes = Get<int32_t>(in);
  const int32_t kind = Get<int32_t>(in);
  if (kind < 0 || kind > 3) throw std::runtime_error("bad DM kind in checkpoint");
  Checkpoint ckpt;
  ckpt.dm_kind = static_cast<DmKind>(kind);
  ckpt.params = DenoiserParams(arch);
  const uint64_t count = Get<uint64_t>(in);
  if (count != static_cast<uint64_t>(ckpt.params.size())) {
    throw std::runtime_error("checkpoint parameter count does not match its architecture");
  }
  in.read(reinterpret_cast<char*>(ckpt.params.values.data()), count * sizeof(double));
  ckpt.ema.decay = Get<double>(in);
  ckpt.ema.shadow.resize(static_cast<Eigen::Index>(count));
  in.read(reinterpret_cast<char*>(ckpt.ema.shadow.data()), count * sizeof(double));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return ckpt;
}

}  // namespace dpdm
