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
#include "csgmm/channel_sim.hpp"
#include "csgmm/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace csgmm {

namespace {

constexpr int kMaxAngleRetries = 100000;
constexpr int kGaussOrder = 8;

// 8-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr std::array<double, kGaussOrder> kGaussNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, kGaussOrder> kGaussWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// One side of the cusp: integral over u in [0, length] of exp(-u / scale) f(u).
// Panels are uniform in s for u = length (e^{a s} - 1) / (e^a - 1), which packs
// them near the cusp on the Laplacian length scale.
void append_side(Quadrature& q, double center, double direction, double length, double scale, int n_nodes) {
    const int panels = std::max(1, (n_nodes + kGaussOrder - 1) / kGaussOrder);
    const double a = std::log1p(4.0 * length / scale);
    const double denom = std::expm1(a);
    for (int p = 0; p < panels; ++p) {
        const double s0 = static_cast<double>(p) / panels;
        const double s1 = static_cast<double>(p + 1) / panels;
        for (int i = 0; i < kGaussOrder; ++i) {
            const double s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * kGaussNodes[i];
            const double ws = 0.5 * (s1 - s0) * kGaussWeights[i];
            const double u = length * std::expm1(a * s) / denom;
            const double du = length * a * std::exp(a * s) / denom;
            q.nodes.push_back(center + direction * u);
            q.weights.push_back(ws * du * std::exp(-u / scale));
        }
    }
}

Quadrature laplace_quadrature(double center, double std_dev, int n_nodes) {
    const double scale = std_dev / std::sqrt(2.0);
    Quadrature q;
    append_side(q, center, -1.0, center + pi, scale, n_nodes / 2);
    append_side(q, center, +1.0, pi - center, scale, n_nodes - n_nodes / 2);
    double total = 0.0;
    for (double w : q.weights)
        total += w;
    for (double& w : q.weights)
        w /= total;
    return q;
}

} // namespace

AnglePrior AnglePrior::street_canyons() {
    AnglePrior p;
    for (double c : {-45.0, -15.0, 15.0, 45.0})
        p.components.push_back({deg_to_rad(c), deg_to_rad(5.0), 0.25});
    p.lo = deg_to_rad(-60.0);
    p.hi = deg_to_rad(60.0);
    return p;
}

void AnglePrior::validate() const {
    if (components.empty())
        throw std::invalid_argument("angle prior has no components");
    if (!(lo < hi))
        throw std::invalid_argument("angle prior support must satisfy lo < hi");
    double total = 0.0;
    for (const auto& c : components) {
        if (!(c.weight > 0.0))
            throw std::invalid_argument("angle prior weights must be strictly positive");
        if (!(c.std_dev >= 0.0))
            throw std::invalid_argument("angle prior std must be nonnegative");
        if (c.center < lo || c.center > hi)
            throw std::invalid_argument("angle prior center outside its support");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("angle prior weights must sum to 1");
}

void ChannelScenario::validate() const {
    if (n_antennas < 2)
        throw std::invalid_argument("scenario needs N >= 2");
    if (!(pas_std > 0.0))
        throw std::invalid_argument("scenario needs pas_std > 0");
    if (quadrature_nodes < 64)
        throw std::invalid_argument("quadrature needs at least 64 nodes");
    prior.validate();
}

void Dataset::validate() const {
    if (!(noise_variance >= 0.0))
        throw std::invalid_argument("dataset noise variance must be nonnegative");
    if (truth_channels && (truth_channels->rows() != observations.rows() || truth_channels->cols() != observations.cols()))
        throw std::invalid_argument("truth channels do not match the observations");
    if (truth_angles && truth_angles->size() != observations.cols())
        throw std::invalid_argument("truth angles do not match the observations");
}

std::uint64_t Dataset::observation_hash() const {
    return fnv1a64(observations.data(), sizeof(cplx) * static_cast<std::size_t>(observations.size()));
}

AngleDraw draw_angle(const AnglePrior& prior, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double pick = unif(rng);
    std::size_t k = 0;
    for (; k + 1 < prior.components.size(); ++k) {
        if (pick < prior.components[k].weight)
            break;
        pick -= prior.components[k].weight;
    }
    const auto& c = prior.components[k];
    const double scale = c.std_dev / std::sqrt(2.0);
    std::exponential_distribution<double> expo(1.0);
    for (int attempt = 0; attempt < kMaxAngleRetries; ++attempt) {
        const double magnitude = scale * expo(rng);
        const double angle = unif(rng) < 0.5 ? c.center - magnitude : c.center + magnitude;
        if (angle >= prior.lo && angle < prior.hi)
            return {angle, k};
    }
    throw std::runtime_error("angle sampling exhausted its retry cap; prior has no mass in its support");
}

double sample_angle(const AnglePrior& prior, Rng& rng) { return draw_angle(prior, rng).angle; }

cmat pas_covariance(double delta, const ChannelScenario& scenario) {
    scenario.validate();
    if (!(delta >= -pi / 2 && delta < pi / 2))
        throw std::invalid_argument("path angle outside [-pi/2, pi/2)");
    const int n = scenario.n_antennas;
    const auto q = laplace_quadrature(delta, scenario.pas_std, scenario.quadrature_nodes);

    // C is Toeplitz: c_m = sum_q w_q exp(-j pi m sin(theta_q)).
    cvec first_col = cvec::Zero(n);
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const cplx step = std::polar(1.0, -pi * std::sin(q.nodes[i]));
        cplx phasor = q.weights[i];
        for (int m = 0; m < n; ++m) {
            first_col[m] += phasor;
            phasor *= step;
        }
    }
    first_col[0] = 1.0;

    cmat c(n, n);
    for (int col = 0; col < n; ++col)
        for (int row = 0; row < n; ++row)
            c(row, col) = row >= col ? first_col[row - col] : std::conj(first_col[col - row]);
    return c;
}

cmat psd_sqrt(const cmat& covariance) {
    Eigen::SelfAdjointEigenSolver<cmat> eig(covariance);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("eigendecomposition failed");
    const rvec root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().adjoint();
}

cvec sample_channel(const cmat& covariance, Rng& rng) {
    if (covariance.rows() != covariance.cols())
        throw std::invalid_argument("covariance must be square");
    const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
    if ((covariance - covariance.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw std::invalid_argument("covariance is not Hermitian");
    const auto n = covariance.rows();
    cvec u(n);
    for (Eigen::Index i = 0; i < n; ++i)
        u[i] = standard_complex_normal(rng);
    if (covariance.isZero(0.0))
        return cvec::Zero(n);
    return psd_sqrt(covariance) * u;
}

cvec observe(const cvec& h, double noise_variance, Rng& rng) {
    if (!(noise_variance >= 0.0))
        throw std::invalid_argument("noise variance must be nonnegative");
    if (noise_variance == 0.0)
        return h;
    const double sigma = std::sqrt(noise_variance);
    cvec y = h;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y[i] += sigma * standard_complex_normal(rng);
    return y;
}

Dataset generate_dataset(const ChannelScenario& scenario, std::size_t n_samples, double noise_variance,
                         std::uint64_t seed, int workers) {
    scenario.validate();
    if (n_samples < 1)
        throw std::invalid_argument("dataset needs at least one sample");
    if (!(noise_variance >= 0.0))
        throw std::invalid_argument("noise variance must be nonnegative");

    const int n = scenario.n_antennas;
    const auto cols = static_cast<Eigen::Index>(n_samples);
    Dataset ds;
    ds.noise_variance = noise_variance;
    ds.seed = seed;
    ds.observations.resize(n, cols);
    ds.truth_channels = cmat(n, cols);
    ds.truth_angles = rvec(cols);

    parallel_for_blocks(block_count(n_samples), workers, [&](std::size_t block) {
        const std::size_t end = std::min(n_samples, (block + 1) * kBlockSize);
        for (std::size_t s = block * kBlockSize; s < end; ++s) {
            auto channel_rng = make_stream(seed, s, 0);
            auto noise_rng = make_stream(seed, s, 1);
            const double delta = sample_angle(scenario.prior, channel_rng);
            const cvec h = sample_channel(pas_covariance(delta, scenario), channel_rng);
            const auto col = static_cast<Eigen::Index>(s);
            (*ds.truth_angles)[col] = delta;
            ds.truth_channels->col(col) = h;
            ds.observations.col(col) = observe(h, noise_variance, noise_rng);
        }
    });
    return ds;
}

} // namespace csgmm
