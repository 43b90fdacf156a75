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
#include "csgmm/baselines.hpp"
#include "csgmm/estimators.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace csgmm {

SampleLmmse::SampleLmmse(const cmat& training_observations, double noise_variance) {
    if (training_observations.cols() < 1)
        throw std::invalid_argument("sample LMMSE needs training observations");
    if (!(noise_variance >= 0.0))
        throw std::invalid_argument("noise variance must be nonnegative");
    const auto n = training_observations.rows();
    sample_cov_ = training_observations * training_observations.adjoint() /
                  static_cast<double>(training_observations.cols());
    sample_cov_ = (0.5 * (sample_cov_ + sample_cov_.adjoint())).eval();

    Eigen::SelfAdjointEigenSolver<cmat> eig(sample_cov_);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("eigendecomposition of the sample covariance failed");
    const rvec lambda = eig.eigenvalues();
    const rvec signal = (lambda.array() - noise_variance).cwiseMax(0.0);
    rvec gain(n);
    const double tiny = 1e-14 * std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < n; ++i)
        gain[i] = lambda[i] > tiny ? signal[i] / lambda[i] : 0.0;
    const cmat& v = eig.eigenvectors();
    signal_cov_ = v * signal.asDiagonal() * v.adjoint();
    filter_ = v * gain.asDiagonal() * v.adjoint();
    if (noise_variance == 0.0) { // S_h = S_y, so the filter is the identity even for singular S_y
        signal_cov_ = sample_cov_;
        filter_ = cmat::Identity(n, n);
    }
}

cvec baseline_genie_lmmse(const cmat& covariance, double noise_variance, const cvec& y) {
    cmat c = covariance;
    c.diagonal().array() += noise_variance;
    Eigen::LDLT<cmat> ldlt(c);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("genie LMMSE: covariance plus noise is singular");
    return covariance * ldlt.solve(y);
}

SblResult baseline_sbl(const cvec& y, const cmat& dictionary, double noise_variance, const SblOptions& options) {
    if (!(noise_variance > 0.0))
        throw std::invalid_argument("SBL needs a positive noise variance");
    if (y.size() != dictionary.rows())
        throw std::invalid_argument("observation length does not match the dictionary");
    const cmat& d = dictionary;
    const rvec col_norm4 = d.colwise().squaredNorm().transpose().array().square();
    const cvec corr = d.adjoint() * y;

    SblResult out;
    out.gammas = (corr.cwiseAbs2().array() / col_norm4.array().max(1e-300)).matrix().cwiseMax(options.gamma_floor);

    auto posterior = [&](const rvec& gamma, cvec& mean, rvec& var) {
        cmat c = d * gamma.asDiagonal() * d.adjoint();
        c.diagonal().array() += noise_variance;
        Eigen::LLT<cmat> llt(c);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("SBL: observation covariance is not positive definite");
        mean = gamma.asDiagonal() * (d.adjoint() * llt.solve(y));
        const cmat cinv_d = llt.solve(d);
        const rvec quad = (d.conjugate().array() * cinv_d.array()).real().colwise().sum().transpose();
        var = (gamma.array() - gamma.array().square() * quad.array()).cwiseMax(0.0);
    };

    cvec mean;
    rvec var;
    for (int it = 0; it < options.max_iter; ++it) {
        posterior(out.gammas, mean, var);
        const rvec next = (mean.cwiseAbs2() + var).cwiseMax(options.gamma_floor);
        const double change = (next - out.gammas).lpNorm<1>() / std::max(out.gammas.lpNorm<1>(), 1e-300);
        out.gammas = next;
        ++out.iterations;
        if (change < options.tol)
            break;
    }
    posterior(out.gammas, mean, var);
    out.s_hat = mean;
    out.s_hat.cwiseAbs2().maxCoeff(&out.peak_index);
    return out;
}

SblResult baseline_sbl(const cvec& y, const Dictionary& dictionary, double noise_variance, const SblOptions& options) {
    SblResult out = baseline_sbl(y, dictionary.matrix, noise_variance, options);
    const DoaPeak peak = argmax_doa(out.s_hat, dictionary.grid);
    out.peak_index = peak.index;
    out.doa = peak.angle;
    return out;
}

DmlResult baseline_dml(const cvec& y, const Dictionary& dictionary) {
    if (dictionary.matrix.cols() == 0)
        throw std::invalid_argument("DML needs a nonempty grid");
    if (y.size() != dictionary.matrix.rows())
        throw std::invalid_argument("observation length does not match the dictionary");
    const rvec score = (dictionary.matrix.adjoint() * y).cwiseAbs2();
    DmlResult out;
    out.score = score.maxCoeff(&out.index); // first maximum
    out.doa = dictionary.grid.angle(static_cast<std::size_t>(out.index));
    return out;
}

} // namespace csgmm
