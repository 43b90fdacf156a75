// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------
#pragma once

#include <cstddef>
#include <functional>

namespace csgmm {

// requested > 0 wins; otherwise CSGMM_WORKERS, otherwise hardware concurrency.
int resolve_workers(int requested);

// Runs fn(block) for block in [0, n_blocks) on up to `workers` threads.
// The block partition is fixed by the caller, so reductions performed in
// block order are independent of the worker count. The first exception
// thrown by any block is rethrown on the calling thread.
void parallel_for_blocks(std::size_t n_blocks, int workers, const std::function<void(std::size_t)>& fn);

inline constexpr std::size_t kBlockSize = 256;

inline std::size_t block_count(std::size_t n, std::size_t block = kBlockSize) {
    return (n + block - 1) / block;
}

} // namespace csgmm
