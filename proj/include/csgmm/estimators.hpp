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

#include "csgmm/dictionary.hpp"
#include "csgmm/model.hpp"
#include "csgmm/types.hpp"

#include <vector>

namespace csgmm {

/// Per-component restriction of a trained model to its P largest gammas.
struct PrunedModel {
    int P = 0;
    std::vector<std::vector<Eigen::Index>> supports; // strictly increasing column indices
    std::vector<rvec> gammas;                        // P entries each
    std::vector<cmat> sub_dictionaries;              // N x P each
    rvec weights;
    AngleGrid grid;
    Eigen::Index n_columns = 0; // S_R
    int n_antennas = 0;

    int components() const { return static_cast<int>(supports.size()); }
};

/// Keeps, per component, the P largest gammas (ties go to the lower index)
/// and the matching dictionary columns.
PrunedModel prune(const CsgmmModel& model, const cmat& dictionary, int P);
PrunedModel prune(const CsgmmModel& model, const Dictionary& dictionary, int P);

/// Checks the pruning invariants against the source model.
void check_pruned(const PrunedModel& pruned, const CsgmmModel& source);

/// Noise-dependent factors of one component, computed once offline.
struct ComponentFactors {
    cmat inner;    // (diag(1/gamma) + sigma^-2 B^H B)^-1, P x P
    cmat measured; // B = A D_k, M x P
    double log_weight = 0.0;
    double log_det = 0.0; // log det(B diag(gamma) B^H + sigma^2 I)
};

class EstimatorCache {
public:
    static EstimatorCache build(const PrunedModel& pruned, const MeasurementMatrix& measurement,
                                const std::vector<double>& noise_variances);

    bool contains(double noise_variance) const;
    /// Exact match on sigma^2; throws std::out_of_range otherwise.
    const ComponentFactors& factors(int k, double noise_variance) const;
    std::size_t size() const; // cached (k, sigma^2) factor sets
    const std::vector<double>& noise_variances() const { return noise_variances_; }
    Eigen::Index observation_dim() const { return observation_dim_; }

private:
    std::size_t slot(double noise_variance) const;

    std::vector<double> noise_variances_;
    std::vector<std::vector<ComponentFactors>> factors_; // [sigma^2][k]
    Eigen::Index observation_dim_ = 0;
};

struct DoaPeak {
    double angle = 0.0;
    double score = 0.0;
    Eigen::Index index = 0; // column of the dictionary
};

struct EstimationResult {
    cvec s_hat;            // E[s | y], zero off every support
    cvec h_hat;            // E[h | y] = D s_hat
    rvec responsibilities; // p(k | y)
    std::vector<DoaPeak> doa_estimates;
};

/// Joint channel and DoA estimate from one observation. Online cost is
/// O(M K P + N K P + K P^2) multiply-adds; no matrix is factorized here.
EstimationResult estimate(const cvec& y, const PrunedModel& pruned, const EstimatorCache& cache,
                          double noise_variance, OpCounter* ops = nullptr);

/// Local maxima of |s_hat|^2 along the sine-sorted grid (strict against
/// both neighbours, one-sided at the ends), strongest first.
std::vector<DoaPeak> estimate_doa(const cvec& s_hat, const AngleGrid& grid, int n_peaks);
std::vector<DoaPeak> estimate_doa(const EstimationResult& result, const AngleGrid& grid, int n_peaks);

/// Global maximum of |s|^2; ties go to the smaller sine.
DoaPeak argmax_doa(const cvec& s, const AngleGrid& grid);

double responsibility_entropy(const rvec& responsibilities);

} // namespace csgmm
