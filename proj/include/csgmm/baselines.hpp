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
#include "csgmm/types.hpp"

namespace csgmm {

inline cvec baseline_ls(const cvec& y) { return y; }

/// LMMSE filter from the sample covariance of noisy training observations:
/// S_h is S_y - sigma^2 I with negative eigenvalues set to zero, and the
/// filter S_h S_y^-1 uses the eigen pseudo-inverse when S_y is singular.
class SampleLmmse {
public:
    SampleLmmse(const cmat& training_observations, double noise_variance);

    cvec apply(const cvec& y) const { return filter_ * y; }
    cmat apply_batch(const cmat& y) const { return filter_ * y; }

    const cmat& sample_covariance() const { return sample_cov_; }
    const cmat& signal_covariance() const { return signal_cov_; }
    const cmat& filter() const { return filter_; }

private:
    cmat sample_cov_;
    cmat signal_cov_;
    cmat filter_;
};

/// C (C + sigma^2 I)^-1 y with the true channel covariance.
cvec baseline_genie_lmmse(const cmat& covariance, double noise_variance, const cvec& y);

struct SblOptions {
    int max_iter = 200;
    double tol = 1e-6; // relative l1 change of gamma
    double gamma_floor = 1e-12;
};

struct SblResult {
    cvec s_hat;
    rvec gammas;
    int iterations = 0;
    Eigen::Index peak_index = 0;
    double doa = 0.0; // set only by the Dictionary overload
};

/// Single-snapshot SBL with known noise variance (EM on the per-coefficient
/// variances, no hyperprior). gamma starts at the periodogram
/// |d_i^H y|^2 / ||d_i||^4.
SblResult baseline_sbl(const cvec& y, const cmat& dictionary, double noise_variance, const SblOptions& options = {});
SblResult baseline_sbl(const cvec& y, const Dictionary& dictionary, double noise_variance,
                       const SblOptions& options = {});

struct DmlResult {
    Eigen::Index index = 0;
    double doa = 0.0;
    double score = 0.0;
};

/// Single-source deterministic ML on the grid: argmax_i |d_i^H y|^2, lowest
/// column index on ties.
DmlResult baseline_dml(const cvec& y, const Dictionary& dictionary);

} // namespace csgmm
