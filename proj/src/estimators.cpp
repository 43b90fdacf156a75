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
#include "csgmm/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace csgmm {

PrunedModel prune(const CsgmmModel& model, const cmat& dictionary, int P) {
    model.validate();
    if (P < 1 || P > model.columns())
        throw std::invalid_argument("P must satisfy 1 <= P <= S_R");
    if (dictionary.cols() != model.columns())
        throw std::invalid_argument("dictionary columns do not match the model's S_R");

    PrunedModel out;
    out.P = P;
    out.weights = model.weights;
    out.grid = model.grid;
    out.n_columns = model.columns();
    out.n_antennas = static_cast<int>(dictionary.rows());

    std::vector<Eigen::Index> order(static_cast<std::size_t>(model.columns()));
    for (int k = 0; k < model.components(); ++k) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        const auto row = model.gammas.row(k);
        std::partial_sort(order.begin(), order.begin() + P, order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return row[a] > row[b] || (row[a] == row[b] && a < b);
        });
        std::vector<Eigen::Index> support(order.begin(), order.begin() + P);
        std::sort(support.begin(), support.end());

        rvec g(P);
        cmat sub(dictionary.rows(), P);
        for (int p = 0; p < P; ++p) {
            g[p] = row[support[static_cast<std::size_t>(p)]];
            sub.col(p) = dictionary.col(support[static_cast<std::size_t>(p)]);
        }
        out.supports.push_back(std::move(support));
        out.gammas.push_back(std::move(g));
        out.sub_dictionaries.push_back(std::move(sub));
    }
    return out;
}

PrunedModel prune(const CsgmmModel& model, const Dictionary& dictionary, int P) {
    PrunedModel out = prune(model, dictionary.matrix, P);
    out.grid = dictionary.grid;
    return out;
}

void check_pruned(const PrunedModel& pruned, const CsgmmModel& source) {
    if (pruned.components() != source.components())
        throw std::logic_error("pruned model has the wrong number of components");
    for (int k = 0; k < pruned.components(); ++k) {
        const auto& sup = pruned.supports[static_cast<std::size_t>(k)];
        if (static_cast<int>(sup.size()) != pruned.P)
            throw std::logic_error("support size differs from P");
        for (std::size_t i = 1; i < sup.size(); ++i)
            if (sup[i] <= sup[i - 1])
                throw std::logic_error("support indices are not strictly increasing");
        const rvec& kept = pruned.gammas[static_cast<std::size_t>(k)];
        if (kept.size() != pruned.P)
            throw std::logic_error("pruned gamma count differs from P");
        double kept_min = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < sup.size(); ++i) {
            if (kept[static_cast<Eigen::Index>(i)] != source.gammas(k, sup[i]))
                throw std::logic_error("pruned gammas differ from the source model");
            kept_min = std::min(kept_min, source.gammas(k, sup[i]));
        }
        for (Eigen::Index i = 0; i < source.columns(); ++i)
            if (!std::binary_search(sup.begin(), sup.end(), i) && source.gammas(k, i) > kept_min)
                throw std::logic_error("pruned support misses one of the P largest gammas");
    }
}

EstimatorCache EstimatorCache::build(const PrunedModel& pruned, const MeasurementMatrix& measurement,
                                     const std::vector<double>& noise_variances) {
    EstimatorCache cache;
    cache.observation_dim_ = measurement ? measurement->rows() : pruned.n_antennas;
    const auto m = static_cast<double>(cache.observation_dim_);
    for (double sigma2 : noise_variances) {
        if (!(sigma2 > 0.0))
            throw std::invalid_argument("cached noise variances must be positive");
        if (cache.contains(sigma2))
            continue;
        std::vector<ComponentFactors> per_k;
        for (int k = 0; k < pruned.components(); ++k) {
            const auto& g = pruned.gammas[static_cast<std::size_t>(k)];
            const auto& sub = pruned.sub_dictionaries[static_cast<std::size_t>(k)];
            ComponentFactors f;
            if (measurement) {
                if (measurement->cols() != sub.rows())
                    throw std::invalid_argument("measurement matrix does not match N");
                f.measured = *measurement * sub;
            } else {
                f.measured = sub;
            }
            // G = I + sigma^-2 Gamma^1/2 B^H B Gamma^1/2 has eigenvalues >= 1, so its
            // factorization stays well conditioned for gammas at the floor.
            const rvec root = g.cwiseSqrt();
            cmat gram = root.asDiagonal() * (f.measured.adjoint() * f.measured) * root.asDiagonal() / sigma2;
            gram.diagonal().array() += 1.0;
            gram = (0.5 * (gram + gram.adjoint())).eval();
            Eigen::LLT<cmat> llt(gram);
            if (llt.info() != Eigen::Success)
                throw std::logic_error("inner Woodbury matrix is not positive definite");
            const cmat ginv = llt.solve(cmat::Identity(g.size(), g.size()));
            f.inner = root.asDiagonal() * ginv * root.asDiagonal();
            f.inner = (0.5 * (f.inner + f.inner.adjoint())).eval();
            f.log_det = m * std::log(sigma2) + 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
            const double w = pruned.weights[k];
            f.log_weight = w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity();
            per_k.push_back(std::move(f));
        }
        cache.noise_variances_.push_back(sigma2);
        cache.factors_.push_back(std::move(per_k));
    }
    return cache;
}

bool EstimatorCache::contains(double noise_variance) const {
    return std::find(noise_variances_.begin(), noise_variances_.end(), noise_variance) != noise_variances_.end();
}

std::size_t EstimatorCache::slot(double noise_variance) const {
    const auto it = std::find(noise_variances_.begin(), noise_variances_.end(), noise_variance);
    if (it == noise_variances_.end())
        throw std::out_of_range("noise variance " + std::to_string(noise_variance) + " is not in the estimator cache");
    return static_cast<std::size_t>(it - noise_variances_.begin());
}

const ComponentFactors& EstimatorCache::factors(int k, double noise_variance) const {
    return factors_[slot(noise_variance)].at(static_cast<std::size_t>(k));
}

std::size_t EstimatorCache::size() const {
    std::size_t n = 0;
    for (const auto& f : factors_)
        n += f.size();
    return n;
}

EstimationResult estimate(const cvec& y, const PrunedModel& pruned, const EstimatorCache& cache,
                          double noise_variance, OpCounter* ops) {
    if (!cache.contains(noise_variance))
        throw std::out_of_range("noise variance " + std::to_string(noise_variance) + " is not in the estimator cache");
    if (y.size() != cache.observation_dim())
        throw std::invalid_argument("observation length does not match the estimator");
    const int k_count = pruned.components();
    const auto m = static_cast<double>(y.size());
    const auto n_ant = pruned.n_antennas;
    const auto P = pruned.P;
    const double inv_sigma2 = 1.0 / noise_variance;

    const double y_energy = y.squaredNorm();
    std::vector<cvec> means(static_cast<std::size_t>(k_count));
    rvec log_joint(k_count);
    for (int k = 0; k < k_count; ++k) {
        const auto& f = cache.factors(k, noise_variance);
        const cvec z = f.measured.adjoint() * y;
        cvec mu = inv_sigma2 * (f.inner * z);
        // y^H C^-1 y = sigma^-2 (||y||^2 - z^H mu) by the Woodbury identity
        const double quad = inv_sigma2 * (y_energy - z.dot(mu).real());
        log_joint[k] = f.log_weight - m * std::log(pi) - f.log_det - quad;
        means[static_cast<std::size_t>(k)] = std::move(mu);
    }

    EstimationResult out;
    const double mx = log_joint.maxCoeff();
    out.responsibilities = (log_joint.array() - mx).exp();
    out.responsibilities /= out.responsibilities.sum();

    out.s_hat = cvec::Zero(pruned.n_columns);
    out.h_hat = cvec::Zero(n_ant);
    for (int k = 0; k < k_count; ++k) {
        const double r = out.responsibilities[k];
        if (r == 0.0)
            continue;
        const cvec weighted = r * means[static_cast<std::size_t>(k)];
        const auto& sup = pruned.supports[static_cast<std::size_t>(k)];
        for (int p = 0; p < P; ++p)
            out.s_hat[sup[static_cast<std::size_t>(p)]] += weighted[p];
        out.h_hat.noalias() += pruned.sub_dictionaries[static_cast<std::size_t>(k)] * weighted;
    }

    if (ops) {
        const auto mm = static_cast<std::uint64_t>(y.size());
        const auto pp = static_cast<std::uint64_t>(P);
        const auto nn = static_cast<std::uint64_t>(n_ant);
        // ||y||^2, then per component: B^H y, inner * z, z^H mu, scaling, scatter, D_k * weighted
        ops->add(mm);
        ops->add(static_cast<std::uint64_t>(k_count) * (mm * pp + pp * pp + pp + pp + pp + nn * pp));
    }

    if (!pruned.grid.sines.empty())
        out.doa_estimates.push_back(argmax_doa(out.s_hat, pruned.grid));
    return out;
}

std::vector<DoaPeak> estimate_doa(const cvec& s_hat, const AngleGrid& grid, int n_peaks) {
    if (n_peaks < 1)
        throw std::invalid_argument("n_peaks must be >= 1");
    if (static_cast<Eigen::Index>(grid.size()) != s_hat.size())
        throw std::invalid_argument("grid does not match s_hat");
    const auto order = grid.sine_order();
    const auto n = order.size();
    std::vector<DoaPeak> peaks;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::norm(s_hat[static_cast<Eigen::Index>(order[i])]);
        const bool left = i == 0 || v > std::norm(s_hat[static_cast<Eigen::Index>(order[i - 1])]);
        const bool right = i + 1 == n || v > std::norm(s_hat[static_cast<Eigen::Index>(order[i + 1])]);
        if (left && right && n > 1)
            peaks.push_back({grid.angle(order[i]), v, static_cast<Eigen::Index>(order[i])});
    }
    if (n == 1)
        peaks.push_back({grid.angle(0), std::norm(s_hat[0]), 0});
    std::stable_sort(peaks.begin(), peaks.end(), [](const DoaPeak& a, const DoaPeak& b) { return a.score > b.score; });
    if (static_cast<int>(peaks.size()) > n_peaks)
        peaks.resize(static_cast<std::size_t>(n_peaks));
    return peaks;
}

std::vector<DoaPeak> estimate_doa(const EstimationResult& result, const AngleGrid& grid, int n_peaks) {
    return estimate_doa(result.s_hat, grid, n_peaks);
}

DoaPeak argmax_doa(const cvec& s, const AngleGrid& grid) {
    if (static_cast<Eigen::Index>(grid.size()) != s.size() || s.size() == 0)
        throw std::invalid_argument("grid does not match the coefficient vector");
    const auto order = grid.sine_order();
    DoaPeak best{grid.angle(order[0]), std::norm(s[static_cast<Eigen::Index>(order[0])]),
                 static_cast<Eigen::Index>(order[0])};
    for (std::size_t i = 1; i < order.size(); ++i) {
        const double v = std::norm(s[static_cast<Eigen::Index>(order[i])]);
        if (v > best.score)
            best = {grid.angle(order[i]), v, static_cast<Eigen::Index>(order[i])};
    }
    return best;
}

double responsibility_entropy(const rvec& r) {
    double h = 0.0;
    for (Eigen::Index k = 0; k < r.size(); ++k)
        if (r[k] > 0.0)
            h -= r[k] * std::log(r[k]);
    return h;
}

} // namespace csgmm
