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

#include "csgmm/channel_sim.hpp"
#include "csgmm/dictionary.hpp"
#include "csgmm/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace csgmm {

struct TrainConfig {
    int components = 8;
    int max_iter = 500;   // 0 returns the initialization
    double rel_tol = 1e-6; // on the log-likelihood; 0 stops only on an exactly unchanged value
    double gamma_floor = 0.0; // <= 0 selects 1e-8 * mean per-entry sample power
    std::string init = "farthest_point";
    std::uint64_t seed = 0;
    MeasurementMatrix measurement; // A; identity when empty
    int workers = 1;

    void validate() const;
};

struct TrainingLog {
    std::vector<double> log_likelihood; // entry t is the log-likelihood of iterate t
    int iterations = 0;                 // EM updates applied
    bool converged = false;
    bool monotone = true;
};

/// Mixture over sparse coefficient vectors s | k ~ CN(0, diag(gamma_k)),
/// p(k) = rho_k, observed as y = A D s + n with n ~ CN(0, sigma^2 I).
struct CsgmmModel {
    rmat gammas; // K x S_R
    rvec weights;
    double noise_variance = 0.0;
    double gamma_floor = 0.0;
    AngleGrid grid; // empty when trained against a non-steering dictionary
    int n_antennas = 0;
    std::uint64_t seed = 0;
    TrainingLog log;

    int components() const { return static_cast<int>(gammas.rows()); }
    Eigen::Index columns() const { return gammas.cols(); }
    void validate() const;
};

/// A D diag(gamma_k) D^H A^H + sigma2 I.
cmat component_observation_covariance(const CsgmmModel& model, int k, const MeasurementMatrix& measurement,
                                      const cmat& dictionary, double noise_variance);

struct EStepResult {
    rmat responsibilities;              // N_t x K
    std::vector<cmat> posterior_means;  // per k: S_R x N_t
    std::vector<cmat> posterior_covs;   // per k: S_R x S_R, shared by all samples
    double log_likelihood = 0.0;
};

EStepResult e_step(const CsgmmModel& model, const cmat& observations, const MeasurementMatrix& measurement,
                   const cmat& dictionary);

struct MStepResult {
    rmat gammas;
    rvec weights;
};

/// gamma_ki = sum_n r_nk (|mu_nki|^2 + [Sigma_k]_ii) / sum_n r_nk, floored;
/// rho_k = mean_n r_nk. A component with total responsibility below 1e-12
/// keeps its previous gammas.
MStepResult m_step(const rmat& responsibilities, const std::vector<cmat>& posterior_means,
                   const std::vector<cmat>& posterior_covs, const rmat& previous_gammas, double gamma_floor);

double log_likelihood(const CsgmmModel& model, const cmat& observations, const MeasurementMatrix& measurement,
                      const cmat& dictionary, int workers = 1);

/// Initial model: farthest-point selection of K samples on normalized
/// periodograms, one nearest-centre assignment, gamma_k = mean periodogram
/// of the assigned samples, uniform weights.
CsgmmModel initialize_model(const cmat& observations, double noise_variance, const cmat& dictionary,
                            const TrainConfig& config);

CsgmmModel train(const cmat& observations, double noise_variance, const cmat& dictionary, const TrainConfig& config);
CsgmmModel train(const Dataset& dataset, const Dictionary& dictionary, const TrainConfig& config);

/// Channel covariance of component k: D diag(gamma_k) D^H.
cmat implied_channel_covariance(const CsgmmModel& model, int k, const cmat& dictionary);

/// Checks ll[t+1] - ll[t] >= -slack * |ll[t]| for every t.
bool is_monotone(const std::vector<double>& log_likelihood, double relative_slack = 1e-8);

} // namespace csgmm
