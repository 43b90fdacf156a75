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

#include "csgmm/baselines.hpp"
#include "csgmm/channel_sim.hpp"

using namespace csgmm;

TEST_SUITE("baselines") {

TEST_CASE("least squares is the identity") {
    std::mt19937_64 rng(1);
    const cvec y = oracle::random_cvec(7, rng);
    CHECK(baseline_ls(y) == y);
    CHECK(baseline_ls(cvec::Zero(3)).isZero(0.0));

    ChannelScenario s;
    s.n_antennas = 8;
    const Dataset ds = generate_dataset(s, 5000, 0.1, 4);
    const double nmse = (ds.observations - *ds.truth_channels).cwiseAbs2().mean();
    CHECK(nmse == doctest::Approx(0.1).epsilon(0.03));
}

TEST_CASE("sample LMMSE closed forms") {
    std::mt19937_64 rng(2);
    cmat train(4, 50);
    for (int j = 0; j < 50; ++j)
        train.col(j) = oracle::random_cvec(4, rng);
    const SampleLmmse ident(train, 0.0);
    const cvec y = oracle::random_cvec(4, rng);
    CHECK((ident.apply(y) - y).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ident.signal_covariance() - ident.sample_covariance()).cwiseAbs().maxCoeff() < 1e-12);

    const double s2 = 0.25;
    const int n = 5;
    const cmat iso = std::sqrt(n * (1.0 + s2)) * cmat::Identity(n, n);
    const SampleLmmse l(iso, s2);
    CHECK((l.sample_covariance() - (1.0 + s2) * cmat::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
    const cvec z = oracle::random_cvec(n, rng);
    CHECK((l.apply(z) - z / (1.0 + s2)).cwiseAbs().maxCoeff() < 1e-12);

    const SampleLmmse noisy(train, 3.0);
    const cmat& sh = noisy.signal_covariance();
    CHECK((sh - sh.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<cmat> eig(sh);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12);

    // rank-deficient training set
    const cmat few = train.leftCols(2);
    const SampleLmmse deficient(few, 0.1);
    CHECK(deficient.filter().allFinite());
}

TEST_CASE("genie LMMSE closed forms") {
    std::mt19937_64 rng(3);
    const cvec y = oracle::random_cvec(6, rng);
    CHECK((baseline_genie_lmmse(cmat::Identity(6, 6), 0.5, y) - y / 1.5).cwiseAbs().maxCoeff() < 1e-13);
    const cmat c = oracle::random_hpd(6, rng);
    CHECK((baseline_genie_lmmse(c, 1e-12, y) - y).cwiseAbs().maxCoeff() < 1e-9);
    const cmat ref = c * (c + 0.3 * cmat::Identity(6, 6)).inverse();
    CHECK((baseline_genie_lmmse(c, 0.3, y) - ref * y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("SBL with D = I follows the scalar recursion") {
    std::mt19937_64 rng(4);
    const int n = 6;
    const cvec y = oracle::random_cvec(n, rng, 2.0);
    const double s2 = 0.5;
    SblOptions opt;
    opt.max_iter = 7;
    opt.tol = 0.0;
    const auto r = baseline_sbl(y, cmat::Identity(n, n), s2, opt);
    CHECK(r.iterations == 7);
    for (int i = 0; i < n; ++i) {
        double g = std::max(std::norm(y[i]), opt.gamma_floor);
        for (int t = 0; t < 7; ++t)
            g = std::max(oracle::scalar_sbl_step(y[i], g, s2), opt.gamma_floor);
        CHECK(r.gammas[i] == doctest::Approx(g).epsilon(1e-12));
        CHECK(std::abs(r.s_hat[i] - g / (g + s2) * y[i]) < 1e-12);
    }
}

TEST_CASE("SBL on a zero observation collapses to the floor") {
    const auto r = baseline_sbl(cvec::Zero(4), build_dictionary(grid_equidistant_sin(8), 4), 0.1);
    CHECK(r.s_hat.isZero(0.0));
    CHECK((r.gammas.array() == 1e-12).all());
}

TEST_CASE("SBL finds an on-grid source") {
    const auto dict = build_dictionary(grid_equidistant_sin(64), 16);
    std::mt19937_64 rng(6);
    int hits = 0;
    for (int t = 0; t < 20; ++t) {
        const Eigen::Index src = 2 + 3 * t;
        const cvec y = dict.matrix.col(src) + oracle::random_cvec(16, rng, 0.1);
        const auto r = baseline_sbl(y, dict, 0.01);
        hits += r.peak_index == src;
        CHECK(r.doa == doctest::Approx(dict.grid.angle(static_cast<std::size_t>(r.peak_index))));
    }
    CHECK(hits == 20);
    CHECK_THROWS_AS(baseline_sbl(cvec::Ones(16), dict, 0.0), std::invalid_argument);
}

TEST_CASE("DML matched filter") {
    const auto dict = build_dictionary(grid_equidistant_sin(64), 16);
    for (Eigen::Index i = 0; i < 64; i += 7) {
        const auto r = baseline_dml(dict.matrix.col(i), dict);
        CHECK(r.index == i);
        CHECK(r.doa == dict.grid.angle(static_cast<std::size_t>(i)));
        CHECK(baseline_dml(dict.matrix.col(i) * cplx(-3.0, 0.25), dict).index == i);
    }
    // ties: all-zero input keeps the first column
    CHECK(baseline_dml(cvec::Zero(16), dict).index == 0);

    std::mt19937_64 rng(8);
    int hits = 0;
    for (int t = 0; t < 1000; ++t) {
        const Eigen::Index src = t % 64;
        const cvec y = dict.matrix.col(src) * std::polar(1.0, 0.1 * t) + oracle::random_cvec(16, rng, std::sqrt(0.1));
        hits += baseline_dml(y, dict).index == src;
    }
    CHECK(hits > 950);
}

}
