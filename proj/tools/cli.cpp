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
#include "cli.hpp"

#include "csgmm/baselines.hpp"
#include "csgmm/bench.hpp"
#include "csgmm/estimators.hpp"
#include "csgmm/io.hpp"
#include "csgmm/model.hpp"
#include "csgmm/parallel.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>

namespace csgmm::cli {

namespace {

namespace fs = std::filesystem;

/// Violated numerical invariant (maps to exit code 3).
struct InvariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    int workers = 0;
    int verbosity = 1;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--set", c.overrides, "dotted override, e.g. training.max_iter=50");
    cmd->add_option("--seed", c.seed, "master seed");
    cmd->add_option("--workers", c.workers, "worker threads (default: CSGMM_WORKERS or all cores)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag_function("-q,--quiet", [&c](std::int64_t) { c.verbosity = 0; }, "print nothing on success");
    cmd->add_flag_function("-v,--verbose", [&c](std::int64_t n) { c.verbosity = 1 + static_cast<int>(n); },
                           "more output");
}

ExperimentConfig load_config(const Common& c, const std::string& profile_name = "desk") {
    ExperimentConfig cfg = profile(profile_name);
    if (!c.config_path.empty())
        cfg = config_from_json(read_text(c.config_path), cfg);
    for (const auto& o : c.overrides)
        apply_override(cfg, o);
    if (c.seed)
        cfg.seed = *c.seed;
    if (c.workers > 0)
        cfg.workers = c.workers;
    return cfg;
}

std::string fmt(double v, int digits = 6) {
    std::ostringstream s;
    s << std::setprecision(digits) << v;
    return s.str();
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    Common common;
    std::optional<int> n;
    std::optional<std::size_t> nt;
    std::optional<double> snr_db;
    std::optional<double> noise_variance;
    std::optional<double> pas_std_deg;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    ExperimentConfig cfg = load_config(a.common);
    if (a.pas_std_deg)
        cfg.pas_std = deg_to_rad(*a.pas_std_deg);
    const int n = a.n.value_or(cfg.nmse.n_antennas);
    const std::size_t nt = a.nt.value_or(cfg.n_train);
    if (nt == 0)
        throw std::invalid_argument("--nt must be positive");
    if (a.snr_db && a.noise_variance)
        throw std::invalid_argument("give either --snr-db or --noise-variance, not both");
    const double sigma2 = a.noise_variance ? *a.noise_variance : snr_db_to_noise_variance(a.snr_db.value_or(10.0));
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
        throw std::invalid_argument("noise variance must be finite and >= 0");
    const auto scenario = cfg.scenario(n);
    scenario.validate();
    const Dataset ds = generate_dataset(scenario, nt, sigma2, cfg.seed, resolve_workers(cfg.workers));
    write_dataset_with_sidecar(a.out, ds);
    if (a.common.verbosity > 0) {
        const double power = ds.truth_channels->squaredNorm() / static_cast<double>(n * nt);
        out << "wrote " << a.out << ": N=" << n << " N_t=" << nt << " sigma2=" << fmt(sigma2)
            << " empirical SNR=" << (sigma2 > 0.0 ? fmt(10.0 * std::log10(power / sigma2), 4) + " dB" : "inf")
            << " hash=" << hash_hex(ds.observation_hash()) << '\n';
    }
    return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    Common common;
    std::string data;
    std::string out;
    std::optional<int> k;
    std::string grid = "equidistant_sin";
    std::optional<int> grid_points;
    std::optional<int> max_iter;
    std::optional<double> tol;
    double gamma_floor = 0.0;
    bool json = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    ExperimentConfig cfg = load_config(a.common);
    const Dataset ds = read_dataset(a.data);
    const int n = ds.n_antennas();
    AngleGrid grid;
    const GridKind kind = grid_kind_from_string(a.grid);
    switch (kind) {
    case GridKind::equidistant_sin: grid = grid_equidistant_sin(a.grid_points.value_or(cfg.nmse.grid_points)); break;
    case GridKind::circulant: grid = grid_circulant(n); break;
    case GridKind::toeplitz: grid = grid_toeplitz(n); break;
    case GridKind::custom: throw std::invalid_argument("--grid custom is not available from the command line");
    }
    TrainConfig tc;
    tc.components = a.k.value_or(cfg.nmse.components);
    tc.max_iter = a.max_iter.value_or(cfg.max_iter);
    tc.rel_tol = a.tol.value_or(cfg.rel_tol);
    tc.gamma_floor = a.gamma_floor;
    tc.seed = cfg.seed;
    tc.workers = resolve_workers(cfg.workers);
    const CsgmmModel model = train(ds, build_dictionary(grid, n), tc);
    write_model(a.out, model);
    if (a.json)
        write_text(a.out + ".json", model_to_json(model));
    if (a.common.verbosity > 0) {
        out << "wrote " << a.out << ": K=" << model.components() << " S_R=" << model.columns()
            << " iterations=" << model.log.iterations << (model.log.converged ? " (converged)" : " (iteration cap)")
            << " final log-likelihood=" << fmt(model.log.log_likelihood.back(), 12) << '\n';
        if (a.common.verbosity > 1)
            for (std::size_t t = 0; t < model.log.log_likelihood.size(); ++t)
                out << "  iter " << t << "  " << fmt(model.log.log_likelihood[t], 15) << '\n';
    }
    if (!model.log.monotone)
        throw InvariantError("EM log-likelihood decreased during training");
    return kOk;
}

// ---------------------------------------------------------------- estimate / doa

struct EstimateArgs {
    Common common;
    std::string model;
    std::string data;
    std::optional<int> p;
    std::string out;
    std::string h_out;
    bool with_h_hat = false;
};

struct EstimateRun {
    std::vector<EstimateRow> rows;
    cmat h_hat;
};

void check_noise(const CsgmmModel& model, const Dataset& ds) {
    if (model.n_antennas != ds.n_antennas())
        throw FormatError("model has N=" + std::to_string(model.n_antennas) + " but the dataset has N=" +
                          std::to_string(ds.n_antennas()));
    if (model.noise_variance != ds.noise_variance)
        throw FormatError("noise variance mismatch: model trained at sigma2=" + fmt(model.noise_variance, 17) +
                          ", dataset has sigma2=" + fmt(ds.noise_variance, 17));
}

EstimateRun run_estimates(const CsgmmModel& model, const Dataset& ds, int P, int workers) {
    if (P < 1 || P > model.columns())
        throw std::invalid_argument("--p must lie in [1, S_R=" + std::to_string(model.columns()) + "]");
    check_noise(model, ds);
    const Dictionary dict = model.grid.size() > 0 ? build_dictionary(model.grid, model.n_antennas)
                                                  : throw FormatError("model carries no angular grid");
    const PrunedModel pruned = prune(model, dict, P);
    const EstimatorCache cache = EstimatorCache::build(pruned, std::nullopt, {ds.noise_variance});

    EstimateRun run;
    run.rows.resize(ds.size());
    run.h_hat.resize(ds.n_antennas(), static_cast<Eigen::Index>(ds.size()));
    parallel_for_blocks(block_count(ds.size()), workers, [&](std::size_t blk) {
        const std::size_t end = std::min(ds.size(), (blk + 1) * kBlockSize);
        for (std::size_t j = blk * kBlockSize; j < end; ++j) {
            const auto col = static_cast<Eigen::Index>(j);
            const EstimationResult r = estimate(ds.observations.col(col), pruned, cache, ds.noise_variance);
            auto& row = run.rows[j];
            row.sample_index = j;
            row.doa = r.doa_estimates.empty() ? std::nan("") : r.doa_estimates.front().angle;
            row.responsibility_entropy = responsibility_entropy(r.responsibilities);
            row.h_hat = r.h_hat;
            run.h_hat.col(col) = r.h_hat;
        }
    });
    return run;
}

rvec doa_column(const std::vector<EstimateRow>& rows) {
    rvec v(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j)
        v[static_cast<Eigen::Index>(j)] = rows[j].doa;
    return v;
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
    const ExperimentConfig cfg = load_config(a.common);
    const CsgmmModel model = read_model(a.model);
    const Dataset ds = read_dataset(a.data);
    const EstimateRun run = run_estimates(model, ds, a.p.value_or(cfg.nmse.prune), resolve_workers(cfg.workers));
    write_estimates_csv(a.out, run.rows, a.with_h_hat);
    const std::string h_out = a.h_out.empty() ? a.out + ".hhat.csd" : a.h_out;
    Dataset mirror;
    mirror.observations = run.h_hat;
    mirror.noise_variance = ds.noise_variance;
    mirror.seed = ds.seed;
    write_dataset(h_out, mirror);
    if (a.common.verbosity > 0) {
        out << "wrote " << a.out << " and " << h_out << " (" << ds.size() << " estimates)\n";
        if (ds.truth_channels)
            out << "nmse=" << fmt(metric_nmse(run.h_hat, *ds.truth_channels)) << '\n';
        if (ds.truth_angles)
            out << "rmse_deg=" << fmt(metric_rmse_deg(doa_column(run.rows), *ds.truth_angles)) << '\n';
    }
    return kOk;
}

struct DoaArgs {
    Common common;
    std::string model;
    std::string data;
    std::optional<int> p;
    std::string results;
};

int cmd_doa(const DoaArgs& a, std::ostream& out) {
    const ExperimentConfig cfg = load_config(a.common);
    const Dataset ds = read_dataset(a.data);
    std::vector<EstimateRow> rows;
    bool reused = false;
    if (fs::exists(a.results)) {
        rows = read_estimates_csv(a.results);
        if (rows.size() != ds.size())
            throw FormatError("'" + a.results + "' holds " + std::to_string(rows.size()) +
                              " rows but the dataset has " + std::to_string(ds.size()) + " samples");
        reused = true;
    } else {
        if (a.model.empty())
            throw std::invalid_argument("no results file at '" + a.results + "'; pass --model to compute it");
        const CsgmmModel model = read_model(a.model);
        rows = run_estimates(model, ds, a.p.value_or(cfg.nmse.prune), resolve_workers(cfg.workers)).rows;
        write_estimates_csv(a.results, rows, false);
    }
    if (a.common.verbosity > 0) {
        out << (reused ? "reused " : "wrote ") << a.results << " (" << rows.size() << " DoA estimates)\n";
        if (ds.truth_angles)
            out << "rmse_deg=" << fmt(metric_rmse_deg(doa_column(rows), *ds.truth_angles)) << '\n';
    }
    return kOk;
}

// ---------------------------------------------------------------- bench / report

struct BenchArgs {
    Common common;
    std::string profile = "desk";
    std::string out = "bench_out";
    std::vector<std::string> experiments;
    bool plotscript = false;
    bool print_config = false;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    ExperimentConfig cfg = load_config(a.common, a.profile);
    if (!a.experiments.empty())
        cfg.experiments = a.experiments;
    cfg.validate();
    if (a.print_config) {
        out << config_to_json(cfg);
        return kOk;
    }
    const BenchResult result = run_bench(cfg);
    write_bench_outputs(a.out, cfg, result, a.plotscript);
    bool ok = result.table.failures.empty();
    if (a.common.verbosity > 0) {
        out << "wrote " << (fs::path(a.out) / "bench.csv").string() << " (" << result.table.rows.size() << " rows)\n";
        for (const auto& f : result.table.failures)
            out << "FAILED CELL " << f << '\n';
    }
    for (const auto& c : result.checks) {
        ok = ok && c.passed;
        if (a.common.verbosity > 0)
            out << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  (" + c.detail + ")") << '\n';
    }
    if (!ok)
        throw InvariantError("bench profile '" + cfg.name + "' has failing checks or cells");
    return kOk;
}

struct ReportArgs {
    Common common;
    std::optional<int> k;
    std::optional<int> p;
    int n = 32;
    std::vector<int> n_list;
    std::string out;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
    ExperimentConfig cfg = load_config(a.common);
    if (!a.n_list.empty())
        cfg.complexity_n = a.n_list;
    const int k = a.k.value_or(cfg.complexity_components);
    const int p = a.p.value_or(cfg.complexity_prune);
    if (k < 1 || p < 1 || a.n < 1)
        throw std::invalid_argument("--k, --p and --n must be positive");
    cfg.complexity_components = k;
    cfg.complexity_prune = p;
    const ComplexityReport r = complexity_report(cfg, k, p, a.n);
    out << r.text();
    if (!a.out.empty()) {
        BenchResult br;
        br.table = r.table;
        write_bench_outputs(a.out, cfg, br, false);
    }
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Compressed sparse GMM channel and DoA estimation"};
    app.name("csgmm");
    app.require_subcommand(1);
    app.set_version_flag("--version", CSGMM_VERSION);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "draw a CSD1 dataset from the channel model");
    add_common(c_sim, sim.common);
    c_sim->add_option("--n", sim.n, "antennas");
    c_sim->add_option("--nt", sim.nt, "number of samples");
    c_sim->add_option("--snr-db", sim.snr_db, "SNR in dB (sigma2 = 10^(-SNR/10))");
    c_sim->add_option("--noise-variance", sim.noise_variance, "sigma2 directly");
    c_sim->add_option("--pas-std-deg", sim.pas_std_deg, "angular spread of the PAS in degrees");
    c_sim->add_option("-o,--out", sim.out, "output dataset path")->required();

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "fit a CSGMM to a dataset with EM");
    add_common(c_train, tr.common);
    c_train->add_option("-d,--data", tr.data, "CSD1 training dataset")->required();
    c_train->add_option("-o,--out", tr.out, "output model path")->required();
    c_train->add_option("--k", tr.k, "mixture components");
    c_train->add_option("--grid", tr.grid, "equidistant_sin, circulant or toeplitz")
        ->check(CLI::IsMember({"equidistant_sin", "circulant", "toeplitz"}));
    c_train->add_option("--grid-points", tr.grid_points, "S_R for the equidistant-sine grid");
    c_train->add_option("--max-iter", tr.max_iter, "EM iteration cap");
    c_train->add_option("--tol", tr.tol, "relative log-likelihood tolerance");
    c_train->add_option("--gamma-floor", tr.gamma_floor, "gamma floor (0: automatic)");
    c_train->add_flag("--json", tr.json, "also write <out>.json");

    EstimateArgs es;
    auto* c_est = app.add_subcommand("estimate", "joint channel and DoA estimates for a dataset");
    add_common(c_est, es.common);
    c_est->add_option("-m,--model", es.model, "CSGM1 model")->required();
    c_est->add_option("-d,--data", es.data, "CSD1 dataset")->required();
    c_est->add_option("--p", es.p, "support size P");
    c_est->add_option("-o,--out", es.out, "estimates CSV")->required();
    c_est->add_option("--h-out", es.h_out, "binary h_hat mirror (default <out>.hhat.csd)");
    c_est->add_flag("--with-h-hat", es.with_h_hat, "include h_hat columns in the CSV");

    DoaArgs da;
    auto* c_doa = app.add_subcommand("doa", "DoA estimates, reusing an estimates CSV when present");
    add_common(c_doa, da.common);
    c_doa->add_option("-m,--model", da.model, "CSGM1 model (needed only when no results exist)");
    c_doa->add_option("-d,--data", da.data, "CSD1 dataset")->required();
    c_doa->add_option("--p", da.p, "support size P");
    c_doa->add_option("-r,--results", da.results, "estimates CSV to reuse or create")->required();

    BenchArgs be;
    auto* c_bench = app.add_subcommand("bench", "run an experiment profile and write CSV + manifest");
    add_common(c_bench, be.common);
    std::string known;
    for (const auto& p : profile_names())
        known += (known.empty() ? "" : ", ") + p;
    c_bench->add_option("--profile", be.profile, "one of: " + known);
    c_bench->add_option("-o,--out", be.out, "output directory");
    c_bench->add_option("--experiments", be.experiments, "subset of nmse_snr nmse_p rmse_snr complexity");
    c_bench->add_flag("--emit-plotscript", be.plotscript, "write plot_bench.py next to the CSV");
    c_bench->add_flag("--print-config", be.print_config, "print the resolved config and exit");

    ReportArgs re;
    auto* c_rep = app.add_subcommand("report", "parameter counts and online multiply-add counts");
    add_common(c_rep, re.common);
    c_rep->add_option("--k", re.k, "components");
    c_rep->add_option("--p", re.p, "support size");
    c_rep->add_option("--n", re.n, "antennas for the parameter counts");
    c_rep->add_option("--n-list", re.n_list, "antenna counts for the multiply-add sweep");
    c_rep->add_option("-o,--out", re.out, "optional output directory for CSV + manifest");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << CSGMM_VERSION << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        for (auto* sub : app.get_subcommands())
            err << sub->help();
        return kUsage;
    }

    try {
        if (c_sim->parsed())
            return cmd_simulate(sim, out);
        if (c_train->parsed())
            return cmd_train(tr, out);
        if (c_est->parsed())
            return cmd_estimate(es, out);
        if (c_doa->parsed())
            return cmd_doa(da, out);
        if (c_bench->parsed())
            return cmd_bench(be, out);
        if (c_rep->parsed())
            return cmd_report(re, out);
    } catch (const InvariantError& e) {
        err << "error: " << e.what() << '\n';
        return kNumerical;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::logic_error& e) {
        err << "error: internal invariant violated: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kNumerical;
    }
    return kUsage;
}

} // namespace csgmm::cli
