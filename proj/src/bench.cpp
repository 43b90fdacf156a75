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
#include "csgmm/bench.hpp"
#include "csgmm/baselines.hpp"
#include "csgmm/estimators.hpp"
#include "csgmm/io.hpp"
#include "csgmm/model.hpp"
#include "csgmm/parallel.hpp"
#include "csgmm/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace csgmm {

namespace {

using nlohmann::json;

// substream tags
constexpr std::uint64_t kTrainTag = 1;
constexpr std::uint64_t kTestTag = 2;
constexpr std::uint64_t kEmTag = 3;
constexpr std::uint64_t kDoaOffset = 10;

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

// Column j of the result is f(j); blocks run in parallel, output is
// independent of the worker count.
cmat map_columns(Eigen::Index rows, Eigen::Index cols, int workers, const std::function<cvec(Eigen::Index)>& f) {
    cmat out(rows, cols);
    const auto n = static_cast<std::size_t>(cols);
    parallel_for_blocks(block_count(n), workers, [&](std::size_t blk) {
        const std::size_t end = std::min(n, (blk + 1) * kBlockSize);
        for (std::size_t j = blk * kBlockSize; j < end; ++j)
            out.col(static_cast<Eigen::Index>(j)) = f(static_cast<Eigen::Index>(j));
    });
    return out;
}

rvec map_scalars(Eigen::Index count, int workers, const std::function<double(Eigen::Index)>& f) {
    rvec out(count);
    const auto n = static_cast<std::size_t>(count);
    parallel_for_blocks(block_count(n), workers, [&](std::size_t blk) {
        const std::size_t end = std::min(n, (blk + 1) * kBlockSize);
        for (std::size_t j = blk * kBlockSize; j < end; ++j)
            out[static_cast<Eigen::Index>(j)] = f(static_cast<Eigen::Index>(j));
    });
    return out;
}

TrainConfig train_config(const ExperimentConfig& config, int components, std::uint64_t tag, int workers) {
    TrainConfig tc;
    tc.components = components;
    tc.max_iter = config.max_iter;
    tc.rel_tol = config.rel_tol;
    tc.seed = derive_seed(config.seed, tag);
    tc.workers = workers;
    return tc;
}

struct GmmEstimator {
    Dictionary dictionary;
    CsgmmModel model;
    PrunedModel pruned;
    EstimatorCache cache;
};

GmmEstimator fit_gmm(const Dataset& train, const AngleGrid& grid, int components, int prune_to,
                     const ExperimentConfig& config, std::uint64_t tag, int workers) {
    GmmEstimator g;
    g.dictionary = build_dictionary(grid, train.n_antennas());
    g.model = csgmm::train(train, g.dictionary, train_config(config, components, tag, workers));
    g.pruned = prune(g.model, g.dictionary, prune_to);
    g.cache = EstimatorCache::build(g.pruned, std::nullopt, {train.noise_variance});
    return g;
}

cmat gmm_channel_estimates(const GmmEstimator& g, const Dataset& test, int workers) {
    return map_columns(test.n_antennas(), static_cast<Eigen::Index>(test.size()), workers, [&](Eigen::Index j) {
        return estimate(test.observations.col(j), g.pruned, g.cache, test.noise_variance).h_hat;
    });
}

std::string format_sig6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string format_x(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void record_training(MetricTable& table, const std::string& experiment, double x, const std::string& estimator,
                     const CsgmmModel& model) {
    table.trainings.push_back({experiment, x, estimator, model.log.iterations, model.log.converged,
                               model.log.monotone, model.log.log_likelihood.back()});
}

void record_failure(MetricTable& table, const std::string& experiment, double x, const std::string& estimator,
                    const std::exception& e) {
    table.failures.push_back(experiment + " x=" + format_x(x) + " " + estimator + ": " + e.what());
}

} // namespace

// ------------------------------------------------------------------------
// configuration

void ExperimentConfig::validate() const {
    if (snr_db.empty())
        throw std::invalid_argument("config: snr list is empty");
    if (n_test < 100)
        throw std::invalid_argument("config: n_test must be >= 100");
    if (n_train < 1)
        throw std::invalid_argument("config: n_train must be >= 1");
    for (const auto* m : {&nmse, &doa}) {
        if (m->prune < 1 || m->prune > m->grid_points)
            throw std::invalid_argument("config: P must satisfy 1 <= P <= S_R");
        if (m->components < 1 || m->n_antennas < 2 || m->grid_points < 2)
            throw std::invalid_argument("config: model setup needs K >= 1, N >= 2, S_R >= 2");
    }
    for (int p : p_sweep)
        if (p < 1 || p > nmse.grid_points)
            throw std::invalid_argument("config: P sweep entries must lie in [1, S_R]");
    static const std::set<std::string> known_exp{"nmse_snr", "nmse_p", "rmse_snr", "complexity"};
    for (const auto& e : experiments)
        if (!known_exp.count(e))
            throw std::invalid_argument("config: unknown experiment '" + e + "'");
    static const std::set<std::string> known_nmse{"ls", "sample_lmmse", "genie", "circ", "toep", "csgmm"};
    for (const auto& e : nmse_estimators)
        if (!known_nmse.count(e))
            throw std::invalid_argument("config: unknown channel estimator '" + e + "'");
    static const std::set<std::string> known_doa{"csgmm", "sbl", "dml"};
    for (const auto& e : doa_estimators)
        if (!known_doa.count(e))
            throw std::invalid_argument("config: unknown DoA estimator '" + e + "'");
    if (complexity_n.empty() || complexity_prune < 1 || complexity_components < 1)
        throw std::invalid_argument("config: complexity settings are invalid");
    prior.validate();
    scenario(nmse.n_antennas).validate();
}

ChannelScenario ExperimentConfig::scenario(int n_antennas) const {
    ChannelScenario s;
    s.n_antennas = n_antennas;
    s.prior = prior;
    s.pas_std = pas_std;
    s.quadrature_nodes = quadrature_nodes;
    return s;
}

std::vector<std::string> profile_names() { return {"smoke", "desk", "full"}; }

ExperimentConfig profile(const std::string& name) {
    ExperimentConfig c;
    c.name = name;
    if (name == "desk")
        return c;
    if (name == "smoke") {
        c.n_train = 400;
        c.n_test = 100;
        c.max_iter = 40;
        c.snr_db = {0.0, 10.0};
        c.nmse = {8, 2, 16, 4};
        c.p_sweep = {2, 4, 16};
        c.doa = {8, 2, 16, 4};
        c.complexity_n = {8, 16};
        return c;
    }
    if (name == "full") {
        c.n_train = 20000;
        c.n_test = 20000;
        c.snr_db = {-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0};
        c.nmse = {32, 32, 64, 16};
        c.p_sweep = {1, 2, 4, 8, 16, 32, 64};
        c.doa = {16, 32, 256, 32};
        c.complexity_components = 32;
        c.complexity_prune = 16;
        c.complexity_n = {16, 32, 64, 128};
        return c;
    }
    std::string known;
    for (const auto& p : profile_names())
        known += (known.empty() ? "" : ", ") + p;
    throw std::invalid_argument("unknown profile '" + name + "' (known: " + known + ")");
}

namespace {

json setup_to_json(const ModelSetup& m) {
    return {{"n_antennas", m.n_antennas}, {"components", m.components}, {"grid_points", m.grid_points},
            {"prune", m.prune}};
}

json prior_to_json(const AnglePrior& p) {
    json comps = json::array();
    for (const auto& c : p.components)
        comps.push_back({{"center_deg", rad_to_deg(c.center)}, {"std_deg", rad_to_deg(c.std_dev)}, {"weight", c.weight}});
    return {{"components", comps}, {"support_deg", {rad_to_deg(p.lo), rad_to_deg(p.hi)}}};
}

// Consumes known keys of `obj` and rejects anything left over.
class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object())
            throw std::invalid_argument("config: '" + path_ + "' must be an object");
    }
    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!obj_.contains(key))
            return;
        try {
            out = obj_.at(key).get<T>();
        } catch (const json::exception&) {
            throw std::invalid_argument("config: bad value for '" + dotted(key) + "'");
        }
    }
    const json* sub(const char* key) {
        seen_.insert(key);
        return obj_.contains(key) ? &obj_.at(key) : nullptr;
    }
    std::string dotted(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    void finish() const {
        for (const auto& [k, v] : obj_.items())
            if (!seen_.count(k))
                throw std::invalid_argument("config: unknown key '" + dotted(k) + "'");
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

void setup_from_json(const json& j, const std::string& path, ModelSetup& m) {
    Section s(j, path);
    s.get("n_antennas", m.n_antennas);
    s.get("components", m.components);
    s.get("grid_points", m.grid_points);
    s.get("prune", m.prune);
    s.finish();
}

} // namespace

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["experiments"] = c.experiments;
    j["scenario"] = {{"pas_std_deg", rad_to_deg(c.pas_std)},
                     {"quadrature_nodes", c.quadrature_nodes},
                     {"prior", prior_to_json(c.prior)}};
    j["training"] = {{"n_train", c.n_train}, {"max_iter", c.max_iter}, {"rel_tol", c.rel_tol}};
    j["evaluation"] = {{"n_test", c.n_test}, {"snr_db", c.snr_db}};
    j["nmse"] = setup_to_json(c.nmse);
    j["nmse"]["estimators"] = c.nmse_estimators;
    j["nmse"]["p_sweep"] = c.p_sweep;
    j["nmse"]["p_sweep_snr_db"] = c.p_sweep_snr_db;
    j["doa"] = setup_to_json(c.doa);
    j["doa"]["estimators"] = c.doa_estimators;
    j["complexity"] = {{"components", c.complexity_components},
                       {"prune", c.complexity_prune},
                       {"n_list", c.complexity_n}};
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
    }
    ExperimentConfig c = base;
    Section root(j, "");
    root.get("name", c.name);
    root.get("seed", c.seed);
    root.get("workers", c.workers);
    root.get("experiments", c.experiments);
    if (const json* s = root.sub("scenario")) {
        Section sec(*s, "scenario");
        double std_deg = rad_to_deg(c.pas_std);
        sec.get("pas_std_deg", std_deg);
        c.pas_std = deg_to_rad(std_deg);
        sec.get("quadrature_nodes", c.quadrature_nodes);
        if (const json* p = sec.sub("prior")) {
            Section ps(*p, "scenario.prior");
            if (const json* comps = ps.sub("components")) {
                if (!comps->is_array())
                    throw std::invalid_argument("config: 'scenario.prior.components' must be an array");
                c.prior.components.clear();
                for (const auto& item : *comps) {
                    Section cs(item, "scenario.prior.components[]");
                    double center = 0.0, std_deg_c = 0.0, weight = 0.0;
                    cs.get("center_deg", center);
                    cs.get("std_deg", std_deg_c);
                    cs.get("weight", weight);
                    cs.finish();
                    c.prior.components.push_back({deg_to_rad(center), deg_to_rad(std_deg_c), weight});
                }
            }
            std::vector<double> support{rad_to_deg(c.prior.lo), rad_to_deg(c.prior.hi)};
            ps.get("support_deg", support);
            if (support.size() != 2)
                throw std::invalid_argument("config: 'scenario.prior.support_deg' needs two entries");
            c.prior.lo = deg_to_rad(support[0]);
            c.prior.hi = deg_to_rad(support[1]);
            ps.finish();
        }
        sec.finish();
    }
    if (const json* s = root.sub("training")) {
        Section sec(*s, "training");
        sec.get("n_train", c.n_train);
        sec.get("max_iter", c.max_iter);
        sec.get("rel_tol", c.rel_tol);
        sec.finish();
    }
    if (const json* s = root.sub("evaluation")) {
        Section sec(*s, "evaluation");
        sec.get("n_test", c.n_test);
        sec.get("snr_db", c.snr_db);
        sec.finish();
    }
    if (const json* s = root.sub("nmse")) {
        json setup = *s;
        Section sec(*s, "nmse");
        sec.get("estimators", c.nmse_estimators);
        sec.get("p_sweep", c.p_sweep);
        sec.get("p_sweep_snr_db", c.p_sweep_snr_db);
        for (const char* k : {"estimators", "p_sweep", "p_sweep_snr_db"})
            setup.erase(k);
        setup_from_json(setup, "nmse", c.nmse);
    }
    if (const json* s = root.sub("doa")) {
        json setup = *s;
        Section sec(*s, "doa");
        sec.get("estimators", c.doa_estimators);
        setup.erase("estimators");
        setup_from_json(setup, "doa", c.doa);
    }
    if (const json* s = root.sub("complexity")) {
        Section sec(*s, "complexity");
        sec.get("components", c.complexity_components);
        sec.get("prune", c.complexity_prune);
        sec.get("n_list", c.complexity_n);
        sec.finish();
    }
    root.finish();
    return c;
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("override '" + assignment + "' is not of the form key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    json patch = json::object();
    json* cursor = &patch;
    std::stringstream ss(key);
    std::vector<std::string> parts;
    for (std::string part; std::getline(ss, part, '.');)
        parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i)
        cursor = &(*cursor)[parts[i]];
    (*cursor)[parts.back()] = value;
    config = config_from_json(patch.dump(), config);
}

// ------------------------------------------------------------------------
// tables and metrics

void MetricTable::add(MetricRow row) {
    if (!std::isfinite(row.value) || row.value < 0.0)
        throw std::logic_error("metric value must be finite and nonnegative (" + row.estimator + ")");
    if (find(row.x_kind, row.x_value, row.estimator, row.metric))
        throw std::logic_error("duplicate metric row for " + row.estimator);
    rows.push_back(std::move(row));
}

void MetricTable::append(const MetricTable& other) {
    for (const auto& r : other.rows)
        add(r);
    failures.insert(failures.end(), other.failures.begin(), other.failures.end());
    timings.insert(timings.end(), other.timings.begin(), other.timings.end());
    trainings.insert(trainings.end(), other.trainings.begin(), other.trainings.end());
}

const MetricRow* MetricTable::find(const std::string& x_kind, double x_value, const std::string& estimator,
                                   const std::string& metric) const {
    for (const auto& r : rows)
        if (r.x_kind == x_kind && r.x_value == x_value && r.estimator == estimator && r.metric == metric)
            return &r;
    return nullptr;
}

double metric_nmse(const cmat& estimates, const cmat& truths) {
    if (estimates.rows() != truths.rows() || estimates.cols() != truths.cols() || truths.cols() == 0)
        throw std::invalid_argument("nmse: estimate and truth sets do not match");
    double total = 0.0;
    for (Eigen::Index j = 0; j < truths.cols(); ++j)
        total += (estimates.col(j) - truths.col(j)).squaredNorm() / static_cast<double>(truths.rows());
    return total / static_cast<double>(truths.cols());
}

double metric_rmse_deg(const rvec& estimates, const rvec& truths) {
    if (estimates.size() != truths.size() || truths.size() == 0)
        throw std::invalid_argument("rmse: estimate and truth sets do not match");
    double total = 0.0;
    for (Eigen::Index j = 0; j < truths.size(); ++j) {
        const double e = rad_to_deg(estimates[j] - truths[j]);
        total += e * e;
    }
    return std::sqrt(total / static_cast<double>(truths.size()));
}

// ------------------------------------------------------------------------
// experiments

MetricTable run_nmse_vs_snr(const ExperimentConfig& config) {
    config.validate();
    const int workers = resolve_workers(config.workers);
    const auto scenario = config.scenario(config.nmse.n_antennas);
    const int n = config.nmse.n_antennas;
    MetricTable table;

    for (double snr : config.snr_db) {
        Stopwatch clock;
        const double sigma2 = snr_db_to_noise_variance(snr);
        const Dataset train = generate_dataset(scenario, config.n_train, sigma2, derive_seed(config.seed, kTrainTag), workers);
        const Dataset test = generate_dataset(scenario, config.n_test, sigma2, derive_seed(config.seed, kTestTag), workers);
        const cmat& truth = *test.truth_channels;
        const auto cols = static_cast<Eigen::Index>(test.size());
        auto row = [&](const std::string& est, double value) {
            table.add({"snr_db", snr, est, "nmse", value, test.size(), config.seed, test.observation_hash()});
        };

        for (const auto& est : config.nmse_estimators) {
            try {
                if (est == "ls") {
                    row(est, metric_nmse(test.observations, truth));
                } else if (est == "sample_lmmse") {
                    const SampleLmmse lmmse(train.observations, sigma2);
                    row(est, metric_nmse(lmmse.apply_batch(test.observations), truth));
                } else if (est == "genie") {
                    const cmat est_h = map_columns(n, cols, workers, [&](Eigen::Index j) {
                        return baseline_genie_lmmse(pas_covariance((*test.truth_angles)[j], scenario), sigma2,
                                                    test.observations.col(j));
                    });
                    row(est, metric_nmse(est_h, truth));
                } else if (est == "circ") {
                    const auto g = fit_gmm(train, grid_circulant(n), config.nmse.components, n, config, kEmTag, workers);
                    record_training(table, "nmse_snr", snr, est, g.model);
                    row(est, metric_nmse(gmm_channel_estimates(g, test, workers), truth));
                } else if (est == "toep") {
                    const auto g = fit_gmm(train, grid_toeplitz(n), config.nmse.components, 2 * n, config, kEmTag, workers);
                    record_training(table, "nmse_snr", snr, est, g.model);
                    row(est, metric_nmse(gmm_channel_estimates(g, test, workers), truth));
                } else if (est == "csgmm") {
                    const auto g = fit_gmm(train, grid_equidistant_sin(config.nmse.grid_points), config.nmse.components,
                                           config.nmse.prune, config, kEmTag, workers);
                    record_training(table, "nmse_snr", snr, est, g.model);
                    row(est, metric_nmse(gmm_channel_estimates(g, test, workers), truth));
                }
            } catch (const std::exception& e) {
                record_failure(table, "nmse_snr", snr, est, e);
            }
        }
        table.timings.push_back({"nmse_snr", snr, clock.seconds()});
    }
    return table;
}

MetricTable run_nmse_vs_P(const ExperimentConfig& config) {
    config.validate();
    const int workers = resolve_workers(config.workers);
    const auto scenario = config.scenario(config.nmse.n_antennas);
    const double snr = config.p_sweep_snr_db;
    const double sigma2 = snr_db_to_noise_variance(snr);
    MetricTable table;
    Stopwatch clock;

    const Dataset train = generate_dataset(scenario, config.n_train, sigma2, derive_seed(config.seed, kTrainTag), workers);
    const Dataset test = generate_dataset(scenario, config.n_test, sigma2, derive_seed(config.seed, kTestTag), workers);
    const auto dict = build_dictionary(grid_equidistant_sin(config.nmse.grid_points), config.nmse.n_antennas);
    const CsgmmModel model =
        csgmm::train(train, dict, train_config(config, config.nmse.components, kEmTag, workers));
    record_training(table, "nmse_p", snr, "csgmm", model);

    auto evaluate = [&](int P) {
        GmmEstimator g{dict, model, prune(model, dict, P), {}};
        g.cache = EstimatorCache::build(g.pruned, std::nullopt, {sigma2});
        return metric_nmse(gmm_channel_estimates(g, test, workers), *test.truth_channels);
    };
    for (int P : config.p_sweep) {
        try {
            table.add({"P", static_cast<double>(P), "csgmm", "nmse", evaluate(P), test.size(), config.seed,
                       test.observation_hash()});
        } catch (const std::exception& e) {
            record_failure(table, "nmse_p", P, "csgmm", e);
        }
    }
    try {
        table.add({"P", static_cast<double>(config.nmse.grid_points), "csgmm_full", "nmse",
                   evaluate(config.nmse.grid_points), test.size(), config.seed, test.observation_hash()});
    } catch (const std::exception& e) {
        record_failure(table, "nmse_p", config.nmse.grid_points, "csgmm_full", e);
    }
    table.timings.push_back({"nmse_p", snr, clock.seconds()});
    return table;
}

MetricTable run_rmse_vs_snr(const ExperimentConfig& config) {
    config.validate();
    const int workers = resolve_workers(config.workers);
    const auto scenario = config.scenario(config.doa.n_antennas);
    const AngleGrid grid = grid_equidistant_sin(config.doa.grid_points);
    const Dictionary dict = build_dictionary(grid, config.doa.n_antennas);
    MetricTable table;

    for (double snr : config.snr_db) {
        Stopwatch clock;
        const double sigma2 = snr_db_to_noise_variance(snr);
        const Dataset test = generate_dataset(scenario, config.n_test, sigma2,
                                              derive_seed(config.seed, kDoaOffset + kTestTag), workers);
        const auto cols = static_cast<Eigen::Index>(test.size());
        const rvec& truth = *test.truth_angles;
        auto row = [&](const std::string& est, double value) {
            table.add({"snr_db", snr, est, "rmse_deg", value, test.size(), config.seed, test.observation_hash()});
        };
        for (const auto& est : config.doa_estimators) {
            try {
                if (est == "csgmm") {
                    const Dataset train = generate_dataset(scenario, config.n_train, sigma2,
                                                           derive_seed(config.seed, kDoaOffset + kTrainTag), workers);
                    const auto g = fit_gmm(train, grid, config.doa.components, config.doa.prune, config,
                                           kDoaOffset + kEmTag, workers);
                    record_training(table, "rmse_snr", snr, est, g.model);
                    row(est, metric_rmse_deg(map_scalars(cols, workers, [&](Eigen::Index j) {
                            return estimate(test.observations.col(j), g.pruned, g.cache, sigma2).doa_estimates.at(0).angle;
                        }), truth));
                } else if (est == "sbl") {
                    row(est, metric_rmse_deg(map_scalars(cols, workers, [&](Eigen::Index j) {
                            return baseline_sbl(test.observations.col(j), dict, sigma2).doa;
                        }), truth));
                } else if (est == "dml") {
                    row(est, metric_rmse_deg(map_scalars(cols, workers, [&](Eigen::Index j) {
                            return baseline_dml(test.observations.col(j), dict).doa;
                        }), truth));
                }
            } catch (const std::exception& e) {
                record_failure(table, "rmse_snr", snr, est, e);
            }
        }
        table.timings.push_back({"rmse_snr", snr, clock.seconds()});
    }
    return table;
}

// ------------------------------------------------------------------------
// complexity

ParameterCounts parameter_counts(int components, int prune_to, int n_antennas) {
    const auto k = static_cast<std::size_t>(components);
    const auto p = static_cast<std::size_t>(prune_to);
    const auto n = static_cast<std::size_t>(n_antennas);
    return {k * p + k, k * p, k * n + k, 2 * k * n + k, n * n};
}

std::uint64_t estimate_op_count(int components, int prune_to, int n_antennas) {
    const int s_r = std::max(2 * n_antennas, prune_to);
    CsgmmModel model;
    model.gammas.resize(components, s_r);
    for (int k = 0; k < components; ++k)
        for (int i = 0; i < s_r; ++i)
            model.gammas(k, i) = 1.0 + 0.01 * ((k * 7 + i * 3) % 11);
    model.weights = rvec::Constant(components, 1.0 / components);
    model.noise_variance = 1.0;
    model.gamma_floor = 1e-8;
    const Dictionary dict = build_dictionary(grid_equidistant_sin(s_r), n_antennas);
    model.grid = dict.grid;
    model.n_antennas = n_antennas;
    const PrunedModel pruned = prune(model, dict, prune_to);
    const EstimatorCache cache = EstimatorCache::build(pruned, std::nullopt, {1.0});
    OpCounter ops;
    (void)estimate(cvec::Ones(n_antennas), pruned, cache, 1.0, &ops);
    return ops.mac;
}

ComplexityReport complexity_report(const ExperimentConfig& config, int components, int prune_to, int n_antennas) {
    ComplexityReport r;
    r.components = components;
    r.prune = prune_to;
    r.n_antennas = n_antennas;
    r.counts = parameter_counts(components, prune_to, n_antennas);
    r.n_list = config.complexity_n;
    const auto x = static_cast<double>(n_antennas);
    auto add = [&](const std::string& est, const std::string& metric, double v) {
        r.table.add({"N", x, est, metric, v, 0, config.seed, 0});
    };
    add("csgmm", "floats", static_cast<double>(r.counts.csgmm_floats));
    add("csgmm", "support_integers", static_cast<double>(r.counts.csgmm_integers));
    add("circ", "floats", static_cast<double>(r.counts.circ_floats));
    add("toep", "floats", static_cast<double>(r.counts.toep_floats));
    add("sample_lmmse", "complex", static_cast<double>(r.counts.sample_lmmse_complex));

    for (int n : config.complexity_n) {
        const auto macs = estimate_op_count(config.complexity_components, config.complexity_prune, n);
        r.macs.push_back(macs);
        r.table.add({"N", static_cast<double>(n), "csgmm_online", "macs", static_cast<double>(macs), 1, config.seed, 0});
    }
    if (r.n_list.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < r.n_list.size(); ++i) {
            mx += r.n_list[i];
            my += static_cast<double>(r.macs[i]);
        }
        mx /= static_cast<double>(r.n_list.size());
        my /= static_cast<double>(r.n_list.size());
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < r.n_list.size(); ++i) {
            sxy += (r.n_list[i] - mx) * (static_cast<double>(r.macs[i]) - my);
            sxx += (r.n_list[i] - mx) * (r.n_list[i] - mx);
        }
        r.slope = sxy / sxx;
        r.intercept = my - r.slope * mx;
    }
    return r;
}

std::string ComplexityReport::text() const {
    std::ostringstream out;
    out << "Model parameters (K=" << components << ", P=" << prune << ", N=" << n_antennas << ")\n";
    out << "  csgmm         " << counts.csgmm_floats << " floats (K*P + K) + " << counts.csgmm_integers
        << " support integers\n";
    out << "  circ GMM      " << counts.circ_floats << " floats (K*N + K)\n";
    out << "  toep GMM      " << counts.toep_floats << " floats (2*K*N + K)\n";
    out << "  sample LMMSE  " << counts.sample_lmmse_complex << " complex (N^2)\n";
    if (!n_list.empty()) {
        out << "Online multiply-adds per estimate\n";
        for (std::size_t i = 0; i < n_list.size(); ++i) {
            out << "  N=" << n_list[i] << "  " << macs[i];
            if (i > 0)
                out << "  ratio " << format_sig6(static_cast<double>(macs[i]) / static_cast<double>(macs[i - 1]));
            out << '\n';
        }
        out << "  affine fit: " << format_sig6(slope) << " * N + " << format_sig6(intercept) << '\n';
    }
    return out.str();
}

// ------------------------------------------------------------------------
// checks and orchestration

std::vector<Check> evaluate_checks(const MetricTable& table, const ExperimentConfig& config) {
    std::vector<Check> checks;
    auto value = [&](const std::string& kind, double x, const std::string& est, const std::string& metric) -> const double* {
        const MetricRow* r = table.find(kind, x, est, metric);
        return r ? &r->value : nullptr;
    };

    for (double snr : config.snr_db) {
        const std::string at = " @" + format_x(snr) + "dB";
        if (const double* genie = value("snr_db", snr, "genie", "nmse")) {
            bool ok = true;
            std::string worst;
            for (const auto& est : config.nmse_estimators)
                if (const double* v = value("snr_db", snr, est, "nmse"); v && *v < *genie) {
                    ok = false;
                    worst = est;
                }
            checks.push_back({"genie_lower_bound" + at, ok, ok ? "" : worst + " below genie"});
        }
        if (const double* ls = value("snr_db", snr, "ls", "nmse")) {
            const double sigma2 = snr_db_to_noise_variance(snr);
            const double rel = std::abs(*ls - sigma2) / sigma2;
            checks.push_back({"ls_matches_inverse_snr" + at, rel <= 0.05, "relative error " + format_sig6(rel)});
            if (const double* cs = value("snr_db", snr, "csgmm", "nmse"); cs && snr >= 0.0)
                checks.push_back({"csgmm_not_worse_than_ls" + at, *cs <= *ls,
                                  format_sig6(*cs) + " vs " + format_sig6(*ls)});
        }
        if (snr == 10.0) {
            const double* g = value("snr_db", snr, "genie", "nmse");
            const double* c = value("snr_db", snr, "csgmm", "nmse");
            const double* s = value("snr_db", snr, "sample_lmmse", "nmse");
            const double* l = value("snr_db", snr, "ls", "nmse");
            if (g && c && s && l)
                checks.push_back({"nmse_ordering" + at, *g <= *c && *c <= *s && *s <= *l,
                                  format_sig6(*g) + " <= " + format_sig6(*c) + " <= " + format_sig6(*s) +
                                      " <= " + format_sig6(*l)});
        }
    }

    const double s_r = config.nmse.grid_points;
    if (const double* full = value("P", s_r, "csgmm_full", "nmse")) {
        if (const double* at_sr = value("P", s_r, "csgmm", "nmse"))
            checks.push_back({"pruning_identity_at_S_R", *at_sr == *full, format_sig6(*at_sr) + " vs " + format_sig6(*full)});
        if (const double* at_p = value("P", config.nmse.prune, "csgmm", "nmse")) {
            const double rel = std::abs(*at_p - *full) / *full;
            checks.push_back({"pruning_converged_at_P=" + std::to_string(config.nmse.prune), rel <= 0.05,
                              "relative gap " + format_sig6(rel)});
        }
    }
    {
        std::vector<int> sweep = config.p_sweep;
        std::sort(sweep.begin(), sweep.end());
        const double* prev = nullptr;
        bool ok = true;
        bool any = false;
        for (int p : sweep) {
            const double* v = value("P", p, "csgmm", "nmse");
            if (!v)
                continue;
            if (prev) {
                any = true;
                ok = ok && *v <= 1.02 * *prev;
            }
            prev = v;
        }
        if (any)
            checks.push_back({"nmse_non_increasing_in_P", ok, "2% jitter allowance"});
    }

    if (!table.trainings.empty()) {
        std::size_t bad = 0;
        for (const auto& t : table.trainings)
            bad += !t.monotone;
        checks.push_back({"em_log_likelihood_monotone", bad == 0,
                          std::to_string(table.trainings.size() - bad) + "/" + std::to_string(table.trainings.size()) +
                              " runs monotone"});
    }

    std::vector<double> snrs = config.snr_db;
    std::sort(snrs.begin(), snrs.end());
    for (const auto& est : config.doa_estimators) {
        const double* prev = nullptr;
        bool ok = true;
        bool any = false;
        for (double snr : snrs) {
            const double* v = value("snr_db", snr, est, "rmse_deg");
            if (!v)
                continue;
            if (prev) {
                any = true;
                ok = ok && *v <= 1.1 * *prev;
            }
            prev = v;
        }
        if (any)
            checks.push_back({"rmse_non_increasing_" + est, ok, "10% jitter allowance"});
    }
    {
        const double* c = value("snr_db", 10.0, "csgmm", "rmse_deg");
        const double* s = value("snr_db", 10.0, "sbl", "rmse_deg");
        const double* d = value("snr_db", 10.0, "dml", "rmse_deg");
        if (c && s && d)
            checks.push_back({"csgmm_doa_competitive @10dB", *c <= 1.1 * std::min(*s, *d),
                              format_sig6(*c) + " vs min(" + format_sig6(*s) + ", " + format_sig6(*d) + ")"});
    }
    return checks;
}

BenchResult run_bench(const ExperimentConfig& config) {
    config.validate();
    BenchResult result;
    auto wants = [&](const char* e) {
        return std::find(config.experiments.begin(), config.experiments.end(), e) != config.experiments.end();
    };
    if (wants("nmse_snr"))
        result.table.append(run_nmse_vs_snr(config));
    if (wants("nmse_p"))
        result.table.append(run_nmse_vs_P(config));
    if (wants("rmse_snr"))
        result.table.append(run_rmse_vs_snr(config));
    if (wants("complexity")) {
        Stopwatch clock;
        result.table.append(
            complexity_report(config, config.complexity_components, config.complexity_prune, config.nmse.n_antennas).table);
        result.table.timings.push_back({"complexity", 0.0, clock.seconds()});
    }
    result.checks = evaluate_checks(result.table, config);
    return result;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string table_to_csv(const MetricTable& table) {
    std::ostringstream out;
    out << "x_kind,x_value,estimator,metric,value,n_samples,seed,dataset_hash\n";
    for (const auto& r : table.rows)
        out << r.x_kind << ',' << format_x(r.x_value) << ',' << r.estimator << ',' << r.metric << ','
            << format_sig6(r.value) << ',' << r.n_samples << ',' << r.seed << ',' << hash_hex(r.dataset_hash) << '\n';
    return out.str();
}

std::string manifest_json(const ExperimentConfig& config, const BenchResult& result) {
    json j;
    j["library_version"] = CSGMM_VERSION;
    j["config"] = json::parse(config_to_json(config));
    j["rows"] = result.table.rows.size();
    j["failures"] = result.table.failures;
    json checks = json::array();
    for (const auto& c : result.checks)
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    j["checks"] = checks;
    json timings = json::array();
    for (const auto& t : result.table.timings)
        timings.push_back({{"experiment", t.experiment}, {"x_value", t.x_value}, {"seconds", t.seconds}});
    j["wall_clock"] = timings;
    json trainings = json::array();
    for (const auto& t : result.table.trainings)
        trainings.push_back({{"experiment", t.experiment},
                             {"x_value", t.x_value},
                             {"estimator", t.estimator},
                             {"iterations", t.iterations},
                             {"converged", t.converged},
                             {"monotone", t.monotone},
                             {"final_log_likelihood", t.final_log_likelihood}});
    j["trainings"] = trainings;
    return j.dump(2) + "\n";
}

namespace {

constexpr const char* kPlotScript = R"(#!/usr/bin/env python3
"""Plots bench.csv next to this script. Cosmetic helper."""
import csv, collections, pathlib
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = pathlib.Path(__file__).resolve().parent
rows = list(csv.DictReader(open(here / "bench.csv")))
groups = collections.defaultdict(list)
for r in rows:
    if r["metric"] in ("nmse", "rmse_deg"):
        groups[(r["x_kind"], r["metric"])].append(r)
for (x_kind, metric), items in groups.items():
    fig, ax = plt.subplots()
    series = collections.defaultdict(list)
    for r in items:
        series[r["estimator"]].append((float(r["x_value"]), float(r["value"])))
    for name, pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=name)
    if metric == "nmse":
        ax.set_yscale("log")
    ax.set_xlabel(x_kind)
    ax.set_ylabel(metric)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.savefig(here / f"{metric}_vs_{x_kind}.png", dpi=120)
)";

} // namespace

void write_bench_outputs(const std::filesystem::path& directory, const ExperimentConfig& config,
                         const BenchResult& result, bool emit_plotscript) {
    std::filesystem::create_directories(directory);
    write_text(directory / "bench.csv", table_to_csv(result.table));
    write_text(directory / "manifest.json", manifest_json(config, result));
    if (emit_plotscript)
        write_text(directory / "plot_bench.py", kPlotScript);
}

} // namespace csgmm
