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
#include "doctest.h"

#include "csgmm/parallel.hpp"
#include "csgmm/rng.hpp"

#include <atomic>
#include <cstdlib>
#include <set>
#include <stdexcept>
#include <vector>

using namespace csgmm;

TEST_SUITE("rng_parallel") {

TEST_CASE("derived streams are reproducible and distinct") {
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    std::set<std::uint64_t> seen;
    for (std::uint64_t a = 0; a < 50; ++a)
        for (std::uint64_t b = 0; b < 2; ++b)
            seen.insert(derive_seed(9, a, b));
    CHECK(seen.size() == 100);
    auto r1 = make_stream(4, 5);
    auto r2 = make_stream(4, 5);
    CHECK(r1() == r2());
}

TEST_CASE("standard complex normal has unit power") {
    Rng rng(12);
    double re = 0.0, im = 0.0, p = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const cplx z = standard_complex_normal(rng);
        re += z.real();
        im += z.imag();
        p += std::norm(z);
    }
    CHECK(std::abs(re / n) < 0.01);
    CHECK(std::abs(im / n) < 0.01);
    CHECK(p / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("worker resolution") {
    CHECK(resolve_workers(3) == 3);
    ::setenv("CSGMM_WORKERS", "2", 1);
    CHECK(resolve_workers(0) == 2);
    ::setenv("CSGMM_WORKERS", "junk", 1);
    CHECK(resolve_workers(0) >= 1);
    ::unsetenv("CSGMM_WORKERS");
    CHECK(resolve_workers(0) >= 1);
}

TEST_CASE("parallel blocks visit every block once") {
    for (int workers : {1, 2, 5}) {
        std::vector<std::atomic<int>> hits(37);
        parallel_for_blocks(hits.size(), workers, [&](std::size_t b) { ++hits[b]; });
        for (auto& h : hits)
            CHECK(h.load() == 1);
    }
    CHECK(block_count(0) == 0);
    CHECK(block_count(256) == 1);
    CHECK(block_count(257) == 2);
}

TEST_CASE("parallel blocks propagate exceptions") {
    CHECK_THROWS_AS(parallel_for_blocks(8, 3,
                                        [](std::size_t b) {
                                            if (b == 5)
                                                throw std::runtime_error("boom");
                                        }),
                    std::runtime_error);
}

}
