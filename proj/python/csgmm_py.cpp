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
#include "csgmm/bench.hpp"
#include "csgmm/channel_sim.hpp"
#include "csgmm/dictionary.hpp"
#include "csgmm/estimators.hpp"
#include "csgmm/io.hpp"
#include "csgmm/model.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace csgmm;

namespace {

AngleGrid make_grid(const std::string& kind, int n_antennas, int grid_points) {
    switch (grid_kind_from_string(kind)) {
    case GridKind::equidistant_sin: return grid_equidistant_sin(grid_points);
    case GridKind::circulant: return grid_circulant(n_antennas);
    case GridKind::toeplitz: return grid_toeplitz(n_antennas);
    case GridKind::custom: break;
    }
    throw std::invalid_argument("grid kind must be equidistant_sin, circulant or toeplitz");
}

// Pruned model plus its cache for one noise variance.
struct Estimator {
    PrunedModel pruned;
    EstimatorCache cache;
    double noise_variance;

    Estimator(const CsgmmModel& model, int P)
        : pruned(prune(model, build_dictionary(model.grid, model.n_antennas), P)),
          cache(EstimatorCache::build(pruned, std::nullopt, {model.noise_variance})),
          noise_variance(model.noise_variance) {}

    py::dict run(const cvec& y) const {
        OpCounter ops;
        const EstimationResult r = estimate(y, pruned, cache, noise_variance, &ops);
        py::dict d;
        d["s_hat"] = r.s_hat;
        d["h_hat"] = r.h_hat;
        d["responsibilities"] = r.responsibilities;
        d["doa"] = r.doa_estimates.empty() ? py::object(py::none()) : py::object(py::float_(r.doa_estimates[0].angle));
        d["macs"] = ops.mac;
        return d;
    }

    cmat channels(const cmat& observations) const {
        cmat out(observations.rows(), observations.cols());
        for (Eigen::Index j = 0; j < observations.cols(); ++j)
            out.col(j) = estimate(observations.col(j), pruned, cache, noise_variance).h_hat;
        return out;
    }

    rvec doas(const cmat& observations) const {
        rvec out(observations.cols());
        for (Eigen::Index j = 0; j < observations.cols(); ++j)
            out[j] = estimate(observations.col(j), pruned, cache, noise_variance).doa_estimates.at(0).angle;
        return out;
    }
};

} // namespace

PYBIND11_MODULE(_csgmm, m) {
    m.doc() = "Compressed sparse GMM channel and DoA estimation";
    m.attr("__version__") = CSGMM_VERSION;

    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init<>())
        .def_readwrite("observations", &Dataset::observations)
        .def_readwrite("truth_channels", &Dataset::truth_channels)
        .def_readwrite("truth_angles", &Dataset::truth_angles)
        .def_readwrite("noise_variance", &Dataset::noise_variance)
        .def_readwrite("seed", &Dataset::seed)
        .def_property_readonly("n_antennas", &Dataset::n_antennas)
        .def("__len__", &Dataset::size)
        .def("observation_hash", &Dataset::observation_hash);

    m.def(
        "simulate",
        [](int n_antennas, std::size_t n_samples, double snr_db, std::uint64_t seed, double pas_std_deg, int workers) {
            ChannelScenario s;
            s.n_antennas = n_antennas;
            s.pas_std = deg_to_rad(pas_std_deg);
            s.validate();
            py::gil_scoped_release release;
            return generate_dataset(s, n_samples, snr_db_to_noise_variance(snr_db), seed, workers);
        },
        py::arg("n_antennas"), py::arg("n_samples"), py::arg("snr_db"), py::arg("seed") = 1,
        py::arg("pas_std_deg") = 2.0, py::arg("workers") = 1);

    m.def(
        "pas_covariance",
        [](double delta, int n_antennas, double pas_std_deg) {
            ChannelScenario s;
            s.n_antennas = n_antennas;
            s.pas_std = deg_to_rad(pas_std_deg);
            return pas_covariance(delta, s);
        },
        py::arg("delta"), py::arg("n_antennas"), py::arg("pas_std_deg") = 2.0);

    m.def("read_dataset", &read_dataset, py::arg("path"));
    m.def("write_dataset", &write_dataset, py::arg("path"), py::arg("dataset"));

    m.def(
        "grid_sines",
        [](const std::string& kind, int n_antennas, int grid_points) { return make_grid(kind, n_antennas, grid_points).sines; },
        py::arg("kind"), py::arg("n_antennas") = 0, py::arg("grid_points") = 0);
    m.def(
        "dictionary",
        [](const std::string& kind, int n_antennas, int grid_points) {
            return build_dictionary(make_grid(kind, n_antennas, grid_points), n_antennas).matrix;
        },
        py::arg("kind"), py::arg("n_antennas"), py::arg("grid_points") = 0);
    m.def("steering", &steering, py::arg("delta"), py::arg("n_antennas"));

    py::class_<CsgmmModel>(m, "Model")
        .def_readonly("gammas", &CsgmmModel::gammas)
        .def_readonly("weights", &CsgmmModel::weights)
        .def_readonly("noise_variance", &CsgmmModel::noise_variance)
        .def_readonly("gamma_floor", &CsgmmModel::gamma_floor)
        .def_readonly("n_antennas", &CsgmmModel::n_antennas)
        .def_property_readonly("components", &CsgmmModel::components)
        .def_property_readonly("grid_sines", [](const CsgmmModel& mo) { return mo.grid.sines; })
        .def_property_readonly("log_likelihood", [](const CsgmmModel& mo) { return mo.log.log_likelihood; })
        .def_property_readonly("iterations", [](const CsgmmModel& mo) { return mo.log.iterations; })
        .def_property_readonly("converged", [](const CsgmmModel& mo) { return mo.log.converged; })
        .def_property_readonly("monotone", [](const CsgmmModel& mo) { return mo.log.monotone; })
        .def("save", [](const CsgmmModel& mo, const std::filesystem::path& p) { write_model(p, mo); })
        .def_static("load", &read_model)
        .def("to_json", &model_to_json);

    m.def(
        "train",
        [](const cmat& observations, double noise_variance, int components, const std::string& grid, int grid_points,
           int max_iter, double rel_tol, std::uint64_t seed, int workers) {
            const int n = static_cast<int>(observations.rows());
            TrainConfig tc;
            tc.components = components;
            tc.max_iter = max_iter;
            tc.rel_tol = rel_tol;
            tc.seed = seed;
            tc.workers = workers;
            const Dictionary dict = build_dictionary(make_grid(grid, n, grid_points), n);
            py::gil_scoped_release release;
            CsgmmModel model = train(observations, noise_variance, dict.matrix, tc);
            model.grid = dict.grid;
            return model;
        },
        py::arg("observations"), py::arg("noise_variance"), py::arg("components") = 8,
        py::arg("grid") = "equidistant_sin", py::arg("grid_points") = 32, py::arg("max_iter") = 500,
        py::arg("rel_tol") = 1e-6, py::arg("seed") = 0, py::arg("workers") = 1);

    py::class_<Estimator>(m, "Estimator")
        .def(py::init<const CsgmmModel&, int>(), py::arg("model"), py::arg("P"))
        .def("__call__", &Estimator::run, py::arg("y"))
        .def("channels", &Estimator::channels, py::arg("observations"))
        .def("doas", &Estimator::doas, py::arg("observations"));

    m.def("sample_lmmse", [](const cmat& train_obs, double noise_variance, const cmat& observations) {
        return SampleLmmse(train_obs, noise_variance).apply_batch(observations);
    }, py::arg("train_observations"), py::arg("noise_variance"), py::arg("observations"));
    m.def("genie_lmmse", &baseline_genie_lmmse, py::arg("covariance"), py::arg("noise_variance"), py::arg("y"));
    m.def(
        "sbl",
        [](const cvec& y, const cmat& dictionary, double noise_variance) {
            const SblResult r = baseline_sbl(y, dictionary, noise_variance);
            return py::make_tuple(r.s_hat, r.gammas, r.iterations);
        },
        py::arg("y"), py::arg("dictionary"), py::arg("noise_variance"));
    m.def(
        "dml_index",
        [](const cvec& y, const std::vector<double>& sines) {
            const int n = static_cast<int>(y.size());
            return baseline_dml(y, build_dictionary(grid_from_sines(GridKind::custom, sines), n)).index;
        },
        py::arg("y"), py::arg("grid_sines"));

    m.def("nmse", &metric_nmse, py::arg("estimates"), py::arg("truths"));
    m.def("rmse_deg", &metric_rmse_deg, py::arg("estimates"), py::arg("truths"));
    m.def(
        "parameter_counts",
        [](int k, int p, int n) {
            const ParameterCounts c = parameter_counts(k, p, n);
            py::dict d;
            d["csgmm_floats"] = c.csgmm_floats;
            d["csgmm_integers"] = c.csgmm_integers;
            d["circ_floats"] = c.circ_floats;
            d["toep_floats"] = c.toep_floats;
            d["sample_lmmse_complex"] = c.sample_lmmse_complex;
            return d;
        },
        py::arg("components"), py::arg("P"), py::arg("n_antennas"));
    m.def("estimate_op_count", &estimate_op_count, py::arg("components"), py::arg("P"), py::arg("n_antennas"));
}
