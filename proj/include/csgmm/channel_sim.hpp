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

#include "csgmm/rng.hpp"
#include "csgmm/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace csgmm {

struct LaplaceComponent {
    double center = 0.0;  // rad
    double std_dev = 0.0; // rad
    double weight = 0.0;
};

/// Mixture of Laplacians over path angles, truncated to [lo, hi).
struct AnglePrior {
    std::vector<LaplaceComponent> components;
    double lo = -pi / 3;
    double hi = pi / 3;

    void validate() const;

    /// Four street canyons in a 120 degree sector: equal-weight Laplacians at
    /// -45, -15, 15, 45 degrees with 5 degree std, support [-60, 60) degrees.
    static AnglePrior street_canyons();
};

struct ChannelScenario {
    int n_antennas = 16;
    AnglePrior prior = AnglePrior::street_canyons();
    double pas_std = deg_to_rad(2.0); // Laplacian power angular spectrum std
    int quadrature_nodes = 1024;

    void validate() const;
};

/// Observations and optional ground truth. Column n of each matrix is sample n.
struct Dataset {
    cmat observations; // N x N_t
    std::optional<cmat> truth_channels;
    std::optional<rvec> truth_angles;
    double noise_variance = 0.0;
    std::uint64_t seed = 0;

    int n_antennas() const { return static_cast<int>(observations.rows()); }
    std::size_t size() const { return static_cast<std::size_t>(observations.cols()); }
    void validate() const;
    std::uint64_t observation_hash() const;
};

struct AngleDraw {
    double angle = 0.0;
    std::size_t component = 0;
};

/// Picks a component by weight, then redraws from that component until the
/// angle lands in the support. Throws std::runtime_error if the retry cap is
/// exhausted, which only happens for a prior with (numerically) no mass in
/// its own support.
AngleDraw draw_angle(const AnglePrior& prior, Rng& rng);
double sample_angle(const AnglePrior& prior, Rng& rng);

/// Channel covariance of a ULA under a Laplacian power angular spectrum
/// centred at delta, truncated to [-pi, pi] and normalized to unit mass.
/// The result is Hermitian Toeplitz with unit diagonal, so trace = N.
cmat pas_covariance(double delta, const ChannelScenario& scenario);

/// Hermitian PSD square root V diag(sqrt(max(lambda, 0))) V^H.
cmat psd_sqrt(const cmat& covariance);

/// h = L u with L = psd_sqrt(C) and u ~ CN(0, I). Rejects non-Hermitian C.
cvec sample_channel(const cmat& covariance, Rng& rng);

/// y = h + n, n ~ CN(0, sigma2 I); sigma2 = 0 returns h unchanged.
cvec observe(const cvec& h, double noise_variance, Rng& rng);

/// Sample n draws its angle and channel from substream (seed, n, 0) and its
/// noise from (seed, n, 1), so the same seed gives the same channels at any
/// noise level and the result is independent of the worker count.
Dataset generate_dataset(const ChannelScenario& scenario, std::size_t n_samples, double noise_variance,
                         std::uint64_t seed, int workers = 1);

} // namespace csgmm
