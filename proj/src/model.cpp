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
#include "csgmm/model.hpp"
#include "csgmm/parallel.hpp"
#include "csgmm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace csgmm {

namespace {

constexpr double kStarvedMass = 1e-12;

cmat measured_dictionary(const MeasurementMatrix& measurement, const cmat& dictionary) {
    if (!measurement)
        return dictionary;
    if (measurement->cols() != dictionary.rows())
        throw std::invalid_argument("measurement matrix columns do not match the dictionary rows");
    return *measurement * dictionary;
}

// Everything about component k that does not depend on the sample.
struct ComponentKernel {
    Eigen::LLT<cmat> llt; // of A D diag(gamma) D^H A^H + sigma^2 I
    double log_det = 0.0;
    double log_weight = 0.0;
    rvec gamma;
    rvec posterior_var; // diag of the posterior covariance of s
};

std::vector<ComponentKernel> prepare_kernels(const rmat& gammas, const rvec& weights, const cmat& b, double sigma2) {
    std::vector<ComponentKernel> out(static_cast<std::size_t>(gammas.rows()));
    for (Eigen::Index k = 0; k < gammas.rows(); ++k) {
        auto& kern = out[static_cast<std::size_t>(k)];
        kern.gamma = gammas.row(k).transpose();
        cmat c = b * kern.gamma.asDiagonal() * b.adjoint();
        c.diagonal().array() += sigma2;
        kern.llt.compute(c);
        if (kern.llt.info() != Eigen::Success)
            throw std::runtime_error("component observation covariance is not positive definite; check gamma_floor");
        kern.log_det = 2.0 * kern.llt.matrixLLT().diagonal().real().array().log().sum();
        kern.log_weight = weights[k] > 0.0 ? std::log(weights[k]) : -std::numeric_limits<double>::infinity();
        const cmat cinv_b = kern.llt.solve(b);
        const rvec quad = (b.conjugate().array() * cinv_b.array()).real().colwise().sum().transpose();
        kern.posterior_var = (kern.gamma.array() - kern.gamma.array().square() * quad.array()).cwiseMax(0.0);
    }
    return out;
}

// Per-sample log N_C(y; 0, C_k) + log rho_k (rows: samples, cols: components)
// and the whitened observations C_k^{-1} Y per component.
void block_joint(const std::vector<ComponentKernel>& kernels, const cmat& y_block, rmat& log_joint,
                 std::vector<cmat>& whitened) {
    const auto m = static_cast<double>(y_block.rows());
    const auto nb = y_block.cols();
    log_joint.resize(nb, static_cast<Eigen::Index>(kernels.size()));
    whitened.resize(kernels.size());
    for (std::size_t k = 0; k < kernels.size(); ++k) {
        whitened[k] = kernels[k].llt.solve(y_block);
        const rvec quad = (y_block.conjugate().array() * whitened[k].array()).real().colwise().sum().transpose();
        log_joint.col(static_cast<Eigen::Index>(k)) =
            (kernels[k].log_weight - m * std::log(pi) - kernels[k].log_det) - quad.array();
    }
}

// Row-wise log-sum-exp; replaces log_joint by responsibilities.
rvec normalize_rows(rmat& log_joint) {
    rvec lse(log_joint.rows());
    for (Eigen::Index n = 0; n < log_joint.rows(); ++n) {
        const double mx = log_joint.row(n).maxCoeff();
        const double s = (log_joint.row(n).array() - mx).exp().sum();
        lse[n] = mx + std::log(s);
        log_joint.row(n) = (log_joint.row(n).array() - lse[n]).exp();
    }
    return lse;
}

struct BlockStats {
    double log_likelihood = 0.0;
    rvec mass;   // sum_n r_nk
    rmat energy; // K x S_R: sum_n r_nk |mu_nki|^2
};

struct PassResult {
    double log_likelihood = 0.0;
    rmat gammas;
    rvec weights;
};

PassResult em_pass(const CsgmmModel& model, const cmat& b, const cmat& y, double sigma2, int workers) {
    const auto kernels = prepare_kernels(model.gammas, model.weights, b, sigma2);
    const int k_count = model.components();
    const auto s_count = model.columns();
    const auto n = static_cast<std::size_t>(y.cols());
    std::vector<BlockStats> partial(block_count(n));

    parallel_for_blocks(partial.size(), workers, [&](std::size_t blk) {
        const auto begin = static_cast<Eigen::Index>(blk * kBlockSize);
        const auto len = std::min<Eigen::Index>(static_cast<Eigen::Index>(kBlockSize), y.cols() - begin);
        const cmat y_block = y.middleCols(begin, len);
        rmat resp;
        std::vector<cmat> whitened;
        block_joint(kernels, y_block, resp, whitened);
        auto& st = partial[blk];
        st.log_likelihood = normalize_rows(resp).sum();
        st.mass = resp.colwise().sum().transpose();
        st.energy.resize(k_count, s_count);
        for (int k = 0; k < k_count; ++k) {
            const cmat mu = kernels[static_cast<std::size_t>(k)].gamma.asDiagonal() * (b.adjoint() * whitened[static_cast<std::size_t>(k)]);
            st.energy.row(k) = (mu.cwiseAbs2() * resp.col(k)).transpose();
        }
    });

    PassResult out;
    rvec mass = rvec::Zero(k_count);
    rmat energy = rmat::Zero(k_count, s_count);
    for (const auto& st : partial) {
        out.log_likelihood += st.log_likelihood;
        mass += st.mass;
        energy += st.energy;
    }
    out.gammas = model.gammas;
    out.weights = mass / static_cast<double>(n);
    for (int k = 0; k < k_count; ++k) {
        if (mass[k] < kStarvedMass)
            continue;
        const rvec g = energy.row(k).transpose() / mass[k] + kernels[static_cast<std::size_t>(k)].posterior_var;
        out.gammas.row(k) = g.cwiseMax(model.gamma_floor).transpose();
    }
    out.weights /= out.weights.sum();
    return out;
}

void check_dimensions(const CsgmmModel& model, const cmat& b, const cmat& y) {
    if (b.cols() != model.columns())
        throw std::invalid_argument("dictionary columns do not match the model's S_R");
    if (y.rows() != b.rows())
        throw std::invalid_argument("observation length does not match the measured dictionary");
}

} // namespace

void TrainConfig::validate() const {
    if (components < 1)
        throw std::invalid_argument("TrainConfig: K must be >= 1");
    if (max_iter < 0)
        throw std::invalid_argument("TrainConfig: max_iter must be >= 0");
    if (!(rel_tol >= 0.0))
        throw std::invalid_argument("TrainConfig: rel_tol must be >= 0");
    if (init != "farthest_point")
        throw std::invalid_argument("TrainConfig: unknown init strategy '" + init + "'");
}

void CsgmmModel::validate() const {
    if (gammas.rows() < 1 || gammas.cols() < 1)
        throw std::invalid_argument("model has no components");
    if (weights.size() != gammas.rows())
        throw std::invalid_argument("model weights do not match K");
    if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("model weights are not on the simplex");
    if (!(gamma_floor > 0.0) || (gammas.array() < gamma_floor).any())
        throw std::invalid_argument("model gammas must be >= gamma_floor > 0");
    if (!(noise_variance > 0.0))
        throw std::invalid_argument("model noise variance must be positive");
    if (!grid.sines.empty() && static_cast<Eigen::Index>(grid.size()) != columns())
        throw std::invalid_argument("model grid size does not match S_R");
}

bool is_monotone(const std::vector<double>& ll, double relative_slack) {
    for (std::size_t t = 1; t < ll.size(); ++t)
        if (ll[t] - ll[t - 1] < -relative_slack * std::abs(ll[t - 1]))
            return false;
    return true;
}

cmat component_observation_covariance(const CsgmmModel& model, int k, const MeasurementMatrix& measurement,
                                      const cmat& dictionary, double noise_variance) {
    if (k < 0 || k >= model.components())
        throw std::out_of_range("component index out of range");
    if (dictionary.cols() != model.columns())
        throw std::invalid_argument("dictionary columns do not match the model's S_R");
    if (noise_variance < 0.0)
        throw std::invalid_argument("noise variance must be nonnegative");
    const cmat b = measured_dictionary(measurement, dictionary);
    const rvec g = model.gammas.row(k).transpose();
    cmat c = b * g.asDiagonal() * b.adjoint();
    c.diagonal().array() += noise_variance;
    // exact Hermitian symmetry
    return (0.5 * (c + c.adjoint())).eval();
}

EStepResult e_step(const CsgmmModel& model, const cmat& observations, const MeasurementMatrix& measurement,
                   const cmat& dictionary) {
    const cmat b = measured_dictionary(measurement, dictionary);
    check_dimensions(model, b, observations);
    const auto kernels = prepare_kernels(model.gammas, model.weights, b, model.noise_variance);

    EStepResult out;
    std::vector<cmat> whitened;
    block_joint(kernels, observations, out.responsibilities, whitened);
    out.log_likelihood = normalize_rows(out.responsibilities).sum();
    for (std::size_t k = 0; k < kernels.size(); ++k) {
        const auto& kern = kernels[k];
        out.posterior_means.push_back(kern.gamma.asDiagonal() * (b.adjoint() * whitened[k]));
        // Gamma - Gamma B^H C^{-1} B Gamma
        const cmat gb = kern.gamma.asDiagonal() * b.adjoint();
        cmat cov = -gb * kern.llt.solve(gb.adjoint());
        cov.diagonal() += kern.gamma.cast<cplx>();
        out.posterior_covs.push_back((0.5 * (cov + cov.adjoint())).eval());
    }
    return out;
}

MStepResult m_step(const rmat& responsibilities, const std::vector<cmat>& posterior_means,
                   const std::vector<cmat>& posterior_covs, const rmat& previous_gammas, double gamma_floor) {
    const auto k_count = responsibilities.cols();
    const auto n = responsibilities.rows();
    if (static_cast<Eigen::Index>(posterior_means.size()) != k_count ||
        static_cast<Eigen::Index>(posterior_covs.size()) != k_count || previous_gammas.rows() != k_count)
        throw std::invalid_argument("m_step inputs disagree on K");
    MStepResult out{previous_gammas, responsibilities.colwise().sum().transpose() / static_cast<double>(n)};
    for (Eigen::Index k = 0; k < k_count; ++k) {
        const double mass = responsibilities.col(k).sum();
        if (mass < kStarvedMass)
            continue;
        const auto& mu = posterior_means[static_cast<std::size_t>(k)];
        const rvec energy = mu.cwiseAbs2() * responsibilities.col(k);
        const rvec g = energy / mass + posterior_covs[static_cast<std::size_t>(k)].diagonal().real();
        out.gammas.row(k) = g.cwiseMax(gamma_floor).transpose();
    }
    out.weights /= out.weights.sum();
    return out;
}

double log_likelihood(const CsgmmModel& model, const cmat& observations, const MeasurementMatrix& measurement,
                      const cmat& dictionary, int workers) {
    const cmat b = measured_dictionary(measurement, dictionary);
    check_dimensions(model, b, observations);
    const auto kernels = prepare_kernels(model.gammas, model.weights, b, model.noise_variance);
    const auto n = static_cast<std::size_t>(observations.cols());
    std::vector<double> partial(block_count(n), 0.0);
    parallel_for_blocks(partial.size(), workers, [&](std::size_t blk) {
        const auto begin = static_cast<Eigen::Index>(blk * kBlockSize);
        const auto len = std::min<Eigen::Index>(static_cast<Eigen::Index>(kBlockSize), observations.cols() - begin);
        rmat joint;
        std::vector<cmat> whitened;
        block_joint(kernels, observations.middleCols(begin, len), joint, whitened);
        partial[blk] = normalize_rows(joint).sum();
    });
    double total = 0.0;
    for (double p : partial)
        total += p;
    return total;
}

CsgmmModel initialize_model(const cmat& observations, double noise_variance, const cmat& dictionary,
                            const TrainConfig& config) {
    config.validate();
    if (observations.cols() < 1)
        throw std::invalid_argument("training set is empty");
    if (!(noise_variance > 0.0))
        throw std::invalid_argument("training needs a known positive noise variance");
    const cmat b = measured_dictionary(config.measurement, dictionary);
    if (observations.rows() != b.rows())
        throw std::invalid_argument("observation length does not match the measured dictionary");
    const auto n = observations.cols();
    const int k_count = config.components;
    if (n < k_count)
        throw std::invalid_argument("training set has fewer samples than components");

    const double mean_power = observations.cwiseAbs2().mean();
    const double floor = config.gamma_floor > 0.0 ? config.gamma_floor : 1e-8 * std::max(mean_power, 1e-300);

    // |b_i^H y|^2 / ||b_i||^4, which is |d_i^H y|^2 / N^2 for steering columns.
    const rvec col_norm4 = b.colwise().squaredNorm().transpose().array().square();
    rmat periodogram = (b.adjoint() * observations).cwiseAbs2();
    for (Eigen::Index i = 0; i < periodogram.rows(); ++i)
        periodogram.row(i) /= std::max(col_norm4[i], 1e-300);
    rmat shape = periodogram;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double s = shape.col(j).sum();
        if (s > 0.0)
            shape.col(j) /= s;
        else
            shape.col(j).setConstant(1.0 / static_cast<double>(shape.rows()));
    }

    auto rng = make_stream(config.seed, 0x1417);
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    std::vector<Eigen::Index> centres{first(rng)};
    rvec min_dist = (shape.colwise() - shape.col(centres[0])).colwise().squaredNorm().transpose();
    while (static_cast<int>(centres.size()) < k_count) {
        Eigen::Index next = 0;
        min_dist.maxCoeff(&next); // first maximum wins ties
        centres.push_back(next);
        min_dist = min_dist.cwiseMin((shape.colwise() - shape.col(next)).colwise().squaredNorm().transpose());
    }

    rmat sums = rmat::Zero(k_count, b.cols());
    rvec counts = rvec::Zero(k_count);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Index best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < k_count; ++k) {
            const double d = (shape.col(j) - shape.col(centres[static_cast<std::size_t>(k)])).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        sums.row(best) += periodogram.col(j).transpose();
        counts[best] += 1.0;
    }

    CsgmmModel model;
    model.gammas.resize(k_count, b.cols());
    for (int k = 0; k < k_count; ++k) {
        if (counts[k] > 0.0)
            model.gammas.row(k) = sums.row(k) / counts[k];
        else
            model.gammas.row(k) = periodogram.col(centres[static_cast<std::size_t>(k)]).transpose();
    }
    model.gammas = model.gammas.cwiseMax(floor);
    model.weights = rvec::Constant(k_count, 1.0 / k_count);
    model.noise_variance = noise_variance;
    model.gamma_floor = floor;
    model.n_antennas = static_cast<int>(dictionary.rows());
    model.seed = config.seed;
    return model;
}

CsgmmModel train(const cmat& observations, double noise_variance, const cmat& dictionary, const TrainConfig& config) {
    CsgmmModel model = initialize_model(observations, noise_variance, dictionary, config);
    const cmat b = measured_dictionary(config.measurement, dictionary);
    auto& log = model.log;
    for (int it = 0;; ++it) {
        PassResult pass = em_pass(model, b, observations, noise_variance, config.workers);
        log.log_likelihood.push_back(pass.log_likelihood);
        if (it > 0) {
            const double prev = log.log_likelihood[log.log_likelihood.size() - 2];
            if (std::abs(pass.log_likelihood - prev) <= config.rel_tol * std::abs(prev)) {
                log.converged = true;
                break;
            }
        }
        if (it == config.max_iter)
            break;
        model.gammas = std::move(pass.gammas);
        model.weights = std::move(pass.weights);
        ++log.iterations;
    }
    log.monotone = is_monotone(log.log_likelihood);
    return model;
}

CsgmmModel train(const Dataset& dataset, const Dictionary& dictionary, const TrainConfig& config) {
    dataset.validate();
    if (dataset.n_antennas() != dictionary.n_antennas && !config.measurement)
        throw std::invalid_argument("dataset and dictionary disagree on N");
    CsgmmModel model = train(dataset.observations, dataset.noise_variance, dictionary.matrix, config);
    model.grid = dictionary.grid;
    model.n_antennas = dictionary.n_antennas;
    return model;
}

cmat implied_channel_covariance(const CsgmmModel& model, int k, const cmat& dictionary) {
    if (k < 0 || k >= model.components())
        throw std::out_of_range("component index out of range");
    if (dictionary.cols() != model.columns())
        throw std::invalid_argument("dictionary columns do not match the model's S_R");
    const rvec g = model.gammas.row(k).transpose();
    const cmat c = dictionary * g.asDiagonal() * dictionary.adjoint();
    return (0.5 * (c + c.adjoint())).eval();
}

} // namespace csgmm
