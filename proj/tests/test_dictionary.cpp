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
#include "oracles.hpp"

#include "csgmm/dictionary.hpp"

#include <algorithm>
#include <random>

using namespace csgmm;

namespace {

void check_sines(const AngleGrid& g, std::vector<double> expected) {
    REQUIRE(g.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i)
        CHECK(g.sines[i] == doctest::Approx(expected[i]).epsilon(1e-15));
}

} // namespace

TEST_SUITE("dictionary") {

TEST_CASE("steering vectors") {
    const cvec a0 = steering(0.0, 4);
    for (int m = 0; m < 4; ++m)
        CHECK(std::abs(a0[m] - cplx(1.0, 0.0)) < 1e-15);

    const cvec endfire = steering_from_sine(1.0, 2);
    CHECK(std::abs(endfire[1] - cplx(-1.0, 0.0)) < 1e-15);

    const cvec a = steering(pi / 6, 3);
    CHECK(std::abs(a[0] - cplx(1, 0)) < 1e-14);
    CHECK(std::abs(a[1] - cplx(0, -1)) < 1e-14);
    CHECK(std::abs(a[2] - cplx(-1, 0)) < 1e-14);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-pi / 2, pi / 2);
    for (int t = 0; t < 50; ++t) {
        const cvec v = steering(u(rng), 33);
        CHECK((v.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("equidistant sine grid") {
    check_sines(grid_equidistant_sin(4), {-1.0, -0.5, 0.0, 0.5});
    const auto g = grid_equidistant_sin(64);
    REQUIRE(g.size() == 64);
    for (std::size_t i = 1; i < g.size(); ++i)
        CHECK(g.sines[i] - g.sines[i - 1] == doctest::Approx(2.0 / 64).epsilon(1e-14));
    CHECK(g.sines.front() == -1.0);
    CHECK(g.sines.back() < 1.0);

    auto a = grid_equidistant_sin(32).sines;
    auto b = grid_toeplitz(16).sines;
    std::sort(b.begin(), b.end());
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(a[i] - b[i]) < 1e-15);

    CHECK_THROWS_AS(grid_equidistant_sin(1), std::invalid_argument);
}

TEST_CASE("circulant grid order") {
    check_sines(grid_circulant(4), {0.0, 0.5, -1.0, -0.5});
    check_sines(grid_circulant(2), {0.0, -1.0});
    for (int n : {2, 6, 8, 16, 64}) {
        auto s = grid_circulant(n).sines;
        std::sort(s.begin(), s.end());
        for (int k = 0; k < n; ++k)
            CHECK(s[static_cast<std::size_t>(k)] == doctest::Approx(-1.0 + 2.0 * k / n).epsilon(1e-15));
    }
    CHECK_THROWS_AS(grid_circulant(3), std::invalid_argument);
    CHECK_THROWS_AS(grid_circulant(0), std::invalid_argument);
}

TEST_CASE("toeplitz grid order") {
    check_sines(grid_toeplitz(2), {0.0, 0.5, -1.0, -0.5});
    check_sines(grid_toeplitz(1), {0.0, -1.0});
    for (int n : {1, 3, 16}) {
        auto s = grid_toeplitz(n).sines;
        std::sort(s.begin(), s.end());
        for (std::size_t i = 1; i < s.size(); ++i)
            CHECK(s[i] - s[i - 1] == doctest::Approx(1.0 / n).epsilon(1e-14));
    }
}

TEST_CASE("dictionaries equal direct DFT matrices") {
    for (int n : {2, 4, 8, 16, 32, 64}) {
        CAPTURE(n);
        const cmat circ = build_dictionary(grid_circulant(n), n).matrix;
        CHECK((circ - oracle::dft(n, n)).cwiseAbs().maxCoeff() < 1e-12);
        const cmat toep = build_dictionary(grid_toeplitz(n), n).matrix;
        CHECK((toep - oracle::dft(n, 2 * n)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("single broadside column") {
    const auto d = build_dictionary(grid_from_angles({0.0}), 5);
    REQUIRE(d.matrix.cols() == 1);
    CHECK((d.matrix.col(0) - cvec::Ones(5)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("circulant grid yields circulant covariances") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int n : {4, 8, 16}) {
        const cmat d = build_dictionary(grid_circulant(n), n).matrix;
        rvec c(n);
        for (int i = 0; i < n; ++i)
            c[i] = u(rng);
        CHECK(oracle::is_circulant(d * c.asDiagonal() * d.adjoint(), 1e-10));
    }
}

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(grid_from_sines(GridKind::custom, {0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(grid_from_sines(GridKind::custom, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(grid_from_sines(GridKind::custom, {}), std::invalid_argument);
    CHECK_THROWS_AS(grid_from_angles({pi / 2}), std::invalid_argument);
    CHECK_NOTHROW(grid_from_angles({-pi / 2}));
}

TEST_CASE("sine order and angles") {
    const auto g = grid_circulant(4);
    const auto order = g.sine_order();
    CHECK(order == std::vector<std::size_t>{2, 3, 0, 1});
    CHECK(g.angle(2) == doctest::Approx(-pi / 2));
    CHECK(grid_kind_from_string(to_string(GridKind::toeplitz)) == GridKind::toeplitz);
    CHECK_THROWS(grid_kind_from_string("hexagonal"));
}

TEST_CASE("grid json round trip") {
    const auto g = grid_toeplitz(8);
    const auto back = grid_from_json(grid_to_json(g));
    CHECK(back.kind == g.kind);
    CHECK(back.sines == g.sines);
}

}
