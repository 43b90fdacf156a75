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

#include "csgmm/types.hpp"

#include <cstdint>
#include <random>

namespace csgmm {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent 64-bit seed for substream (a, b) of a base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

inline Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return Rng(derive_seed(seed, a, b));
}

// Circular standard complex Gaussian: real and imaginary parts ~ N(0, 1/2).
cplx standard_complex_normal(Rng& rng);

// FNV-1a over raw bytes; stable across platforms of equal endianness.
std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

} // namespace csgmm
