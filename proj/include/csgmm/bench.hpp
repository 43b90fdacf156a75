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
#include <filesystem>
#include <string>
#include <vector>

namespace csgmm {

struct ModelSetup {
    int n_antennas = 16;
    int components = 8;
    int grid_points = 32; // S_R of the equidistant-sine grid
    int prune = 8;        // P
};

struct ExperimentConfig {
    std::string name = "desk";
    std::uint64_t seed = 1;
    int workers = 0; // 0: CSGMM_WORKERS or hardware concurrency
    std::vector<std::string> experiments{"nmse_snr", "nmse_p", "rmse_snr", "complexity"};

    // scenario
    AnglePrior prior = AnglePrior::street_canyons();
    double pas_std = deg_to_rad(2.0);
    int quadrature_nodes = 1024;

    // training
    std::size_t n_train = 2000;
    int max_iter = 500;
    double rel_tol = 1e-6;

    // evaluation
    std::size_t n_test = 1000;
    std::vector<double> snr_db{-10.0, 0.0, 10.0, 20.0};

    ModelSetup nmse{16, 8, 32, 8};
    std::vector<std::string> nmse_estimators{"ls", "sample_lmmse", "genie", "circ", "toep", "csgmm"};
    std::vector<int> p_sweep{1, 2, 4, 8, 16, 32};
    double p_sweep_snr_db = 10.0;

    ModelSetup doa{16, 8, 64, 16};
    std::vector<std::string> doa_estimators{"csgmm", "sbl", "dml"};

    int complexity_components = 8;
    int complexity_prune = 8;
    std::vector<int> complexity_n{16, 32, 64};

    void validate() const;
    ChannelScenario scenario(int n_antennas) const;
};

std::vector<std::string> profile_names();
/// Throws std::invalid_argument listing the known profiles.
ExperimentConfig profile(const std::string& name);

/// JSON with sections scenario / training / evaluation / nmse / doa /
/// complexity. Parsing rejects unknown keys, naming the dotted path.
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& base);
/// Applies one "section.key=value" override (value parsed as JSON, falling
/// back to a string).
void apply_override(ExperimentConfig& config, const std::string& assignment);

struct MetricRow {
    std::string x_kind; // snr_db, P, N
    double x_value = 0.0;
    std::string estimator;
    std::string metric; // nmse, rmse_deg, macs, floats
    double value = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
    std::uint64_t dataset_hash = 0;
};

struct CellTiming {
    std::string experiment;
    double x_value = 0.0;
    double seconds = 0.0;
};

/// One EM run performed by an experiment.
struct TrainingRecord {
    std::string experiment;
    double x_value = 0.0;
    std::string estimator;
    int iterations = 0;
    bool converged = false;
    bool monotone = false;
    double final_log_likelihood = 0.0;
};

struct MetricTable {
    std::vector<MetricRow> rows;
    std::vector<std::string> failures;
    std::vector<CellTiming> timings;
    std::vector<TrainingRecord> trainings;

    /// Adds a row; throws std::logic_error on a duplicate (x, estimator, metric)
    /// or a non-finite / negative value.
    void add(MetricRow row);
    void append(const MetricTable& other);
    const MetricRow* find(const std::string& x_kind, double x_value, const std::string& estimator,
                          const std::string& metric) const;
};

/// mean_j ||h_hat_j - h_j||^2 / N over columns.
double metric_nmse(const cmat& estimates, const cmat& truths);
/// sqrt(mean (est - truth)^2), radians in, degrees out.
double metric_rmse_deg(const rvec& estimates, const rvec& truths);

MetricTable run_nmse_vs_snr(const ExperimentConfig& config);
MetricTable run_nmse_vs_P(const ExperimentConfig& config);
MetricTable run_rmse_vs_snr(const ExperimentConfig& config);

struct ParameterCounts {
    std::size_t csgmm_floats = 0;   // K P + K
    std::size_t csgmm_integers = 0; // K P support indices
    std::size_t circ_floats = 0;    // K N + K
    std::size_t toep_floats = 0;    // 2 K N + K
    std::size_t sample_lmmse_complex = 0; // N^2
};
ParameterCounts parameter_counts(int components, int prune, int n_antennas);

/// Multiply-adds of one estimate() call for a K-component, P-sparse model
/// with N antennas.
std::uint64_t estimate_op_count(int components, int prune, int n_antennas);

struct ComplexityReport {
    ParameterCounts counts;
    int components = 0;
    int prune = 0;
    int n_antennas = 0;
    std::vector<int> n_list;
    std::vector<std::uint64_t> macs;
    double slope = 0.0;     // least-squares MACs per antenna
    double intercept = 0.0;
    MetricTable table;
    std::string text() const;
};
ComplexityReport complexity_report(const ExperimentConfig& config, int components, int prune, int n_antennas);

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Assertions a bench profile is expected to satisfy, evaluated on whatever
/// rows the table holds.
std::vector<Check> evaluate_checks(const MetricTable& table, const ExperimentConfig& config);

struct BenchResult {
    MetricTable table;
    std::vector<Check> checks;
};
BenchResult run_bench(const ExperimentConfig& config);

/// CSV schema x_kind,x_value,estimator,metric,value,n_samples,seed,dataset_hash
/// with values rounded to 6 significant digits.
std::string table_to_csv(const MetricTable& table);
std::string manifest_json(const ExperimentConfig& config, const BenchResult& result);
void write_bench_outputs(const std::filesystem::path& directory, const ExperimentConfig& config,
                         const BenchResult& result, bool emit_plotscript);

std::string hash_hex(std::uint64_t h);

} // namespace csgmm
