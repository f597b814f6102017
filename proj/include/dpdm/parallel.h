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

#ifndef DPDM_PARALLEL_H_
#define DPDM_PARALLEL_H_

#include <cstdint>
#include <functional>

namespace dpdm {

// Resolves a requested worker count; 0 means hardware concurrency.
int ResolveThreads(int requested);

// Runs fn(chunk) for chunk in [0, num_chunks) on up to `threads` workers.
// Callers write results into per-chunk slots and reduce them in chunk order,
// which keeps outputs independent of the thread count.
void ParallelFor(int64_t num_chunks, int threads,
                 const std::function<void(int64_t)>& fn);

}  // namespace dpdm

#endif  // DPDM_PARALLEL_H_
