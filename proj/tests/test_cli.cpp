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
#include "doctest.h"
#include "test_util.hpp"

#include "cli.hpp"
#include "csgmm/io.hpp"

#include <sstream>

using namespace csgmm;
using testutil::TempDir;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = csgmm::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

bool contains(const std::string& s, const std::string& needle) { return s.find(needle) != std::string::npos; }

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors") {
    CHECK(invoke({}).code == 1);
    CHECK(invoke({"frobnicate"}).code == 1);
    CHECK(invoke({"simulate"}).code == 1); // --out is required
    CHECK(invoke({"--help"}).code == 0);
    CHECK(contains(invoke({"--version"}).out, CSGMM_VERSION));
}

TEST_CASE("simulate") {
    TempDir dir;
    const std::string a = (dir / "a.csd").string(), b = (dir / "b.csd").string();
    const auto r = invoke({"simulate", "--n", "16", "--nt", "2000", "--snr-db", "10", "--seed", "7", "-o", a});
    REQUIRE(r.code == 0);
    CHECK(contains(r.out, "N=16"));
    CHECK(contains(r.out, "N_t=2000"));
    CHECK(contains(r.out, "sigma2=0.1"));
    CHECK(contains(r.out, "empirical SNR="));
    const Dataset ds = read_dataset(a);
    CHECK(ds.noise_variance == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(std::filesystem::exists(a + ".json"));

    REQUIRE(invoke({"simulate", "--n", "16", "--nt", "2000", "--snr-db", "10", "--seed", "7", "--workers", "3", "-o", b})
                .code == 0);
    CHECK(testutil::slurp(a) == testutil::slurp(b));

    CHECK(invoke({"simulate", "--nt", "0", "-o", a}).code == 1);
    CHECK(invoke({"simulate", "--nt", "10", "--snr-db", "0", "--noise-variance", "1", "-o", a}).code == 1);
    CHECK(invoke({"simulate", "--nt", "10", "-o", (dir / "no/such/dir/x.csd").string()}).code == 2);
    CHECK(invoke({"simulate", "--nt", "10", "--set", "scenario.bogus=1", "-o", a}).code == 1);
}

TEST_CASE("train, estimate and doa") {
    TempDir dir;
    const std::string train_path = (dir / "train.csd").string();
    const std::string test_path = (dir / "test.csd").string();
    const std::string model = (dir / "m.csgm").string();
    REQUIRE(invoke({"simulate", "--n", "8", "--nt", "400", "--snr-db", "10", "--seed", "1", "-o", train_path}).code == 0);
    REQUIRE(invoke({"simulate", "--n", "8", "--nt", "100", "--snr-db", "10", "--seed", "2", "-o", test_path}).code == 0);

    CHECK(invoke({"train", "-d", (dir / "missing.csd").string(), "-o", model}).code == 2);

    const auto t = invoke({"train", "-d", train_path, "-o", model, "--k", "2", "--grid-points", "16", "--max-iter", "30",
                        "--json"});
    REQUIRE(t.code == 0);
    CHECK(contains(t.out, "iterations="));
    CHECK(contains(t.out, "final log-likelihood="));
    CHECK(std::filesystem::exists(model + ".json"));
    const std::string model_bytes = testutil::slurp(model);
    REQUIRE(invoke({"train", "-d", train_path, "-o", model, "--k", "2", "--grid-points", "16", "--max-iter", "30", "-q"})
                .code == 0);
    CHECK(testutil::slurp(model) == model_bytes);

    const std::string est = (dir / "est.csv").string();
    const auto e = invoke({"estimate", "-m", model, "-d", test_path, "--p", "4", "-o", est, "--with-h-hat"});
    REQUIRE(e.code == 0);
    CHECK(contains(e.out, "nmse="));
    CHECK(contains(e.out, "rmse_deg="));
    CHECK(read_estimates_csv(est).size() == 100);
    const Dataset mirror = read_dataset(est + ".hhat.csd");
    CHECK(mirror.size() == 100);
    CHECK((mirror.observations.col(3) - read_estimates_csv(est)[3].h_hat).cwiseAbs().maxCoeff() < 1e-15);

    CHECK(invoke({"estimate", "-m", model, "-d", test_path, "--p", "17", "-o", est}).code == 1);

    const auto d = invoke({"doa", "-d", test_path, "-r", est});
    CHECK(d.code == 0);
    CHECK(contains(d.out, "reused"));
    CHECK(contains(d.out, "rmse_deg="));

    const std::string fresh = (dir / "fresh.csv").string();
    CHECK(invoke({"doa", "-d", test_path, "-r", fresh}).code == 1);
    const auto d2 = invoke({"doa", "-m", model, "-d", test_path, "--p", "4", "-r", fresh});
    CHECK(d2.code == 0);
    CHECK(contains(d2.out, "wrote"));
    CHECK(read_estimates_csv(fresh)[7].doa == read_estimates_csv(est)[7].doa);

    // truth-free dataset: estimates written, metrics omitted
    Dataset bare = read_dataset(test_path);
    bare.truth_channels.reset();
    bare.truth_angles.reset();
    write_dataset(dir / "bare.csd", bare);
    const auto b = invoke({"estimate", "-m", model, "-d", (dir / "bare.csd").string(), "--p", "4", "-o",
                        (dir / "bare.csv").string()});
    CHECK(b.code == 0);
    CHECK_FALSE(contains(b.out, "nmse="));
    CHECK(read_estimates_csv(dir / "bare.csv").size() == 100);

    // dataset at another noise level
    const std::string other = (dir / "other.csd").string();
    REQUIRE(invoke({"simulate", "--n", "8", "--nt", "100", "--snr-db", "0", "-o", other}).code == 0);
    const auto m = invoke({"estimate", "-m", model, "-d", other, "-o", (dir / "o.csv").string()});
    CHECK(m.code == 2);
    CHECK(contains(m.err, "noise variance"));

    // a dataset that is not a dataset
    testutil::spit(dir / "junk.csd", "junk");
    CHECK(invoke({"estimate", "-m", model, "-d", (dir / "junk.csd").string(), "-o", est}).code == 2);
}

TEST_CASE("white-noise training is flat") {
    TempDir dir;
    Dataset ds;
    Rng rng(5);
    ds.observations.resize(8, 1000);
    for (Eigen::Index j = 0; j < 1000; ++j)
        for (Eigen::Index i = 0; i < 8; ++i)
            ds.observations(i, j) = standard_complex_normal(rng);
    ds.noise_variance = 0.1;
    write_dataset(dir / "w.csd", ds);
    const std::string model = (dir / "w.csgm").string();
    REQUIRE(invoke({"train", "-d", (dir / "w.csd").string(), "-o", model, "--k", "1", "-q"}).code == 0);
    const CsgmmModel m = read_model(model);
    CHECK(m.gammas.maxCoeff() / m.gammas.minCoeff() < 10.0);
}

TEST_CASE("pruning barely changes the desk-sized estimate") {
    TempDir dir;
    const std::string tr = (dir / "tr.csd").string(), te = (dir / "te.csd").string(), m = (dir / "m.csgm").string();
    REQUIRE(invoke({"simulate", "--n", "16", "--nt", "2000", "--snr-db", "10", "--seed", "3", "-o", tr}).code == 0);
    REQUIRE(invoke({"simulate", "--n", "16", "--nt", "500", "--snr-db", "10", "--seed", "4", "-o", te}).code == 0);
    REQUIRE(invoke({"train", "-d", tr, "-o", m, "--k", "8", "--grid-points", "64", "--max-iter", "100", "-q"}).code == 0);
    const auto a = invoke({"estimate", "-m", m, "-d", te, "--p", "64", "-o", (dir / "a.csv").string()});
    const auto b = invoke({"estimate", "-m", m, "-d", te, "--p", "8", "-o", (dir / "b.csv").string()});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    auto nmse = [](const std::string& out) { return std::stod(out.substr(out.find("nmse=") + 5)); };
    CHECK(std::abs(nmse(a.out) - nmse(b.out)) / nmse(a.out) < 0.05);
}

TEST_CASE("report and bench") {
    const auto r = invoke({"report", "--k", "32", "--p", "16"});
    CHECK(r.code == 0);
    CHECK(contains(r.out, "544"));
    CHECK(contains(r.out, "1056"));
    CHECK(contains(r.out, "2080"));

    const auto bad = invoke({"bench", "--profile", "galactic"});
    CHECK(bad.code == 1);
    CHECK(contains(bad.err, "smoke"));
    CHECK(contains(bad.err, "desk"));

    TempDir dir;
    testutil::spit(dir / "c.json", R"({"evaluation": {"n_test": 100, "snr_dB": [1]}})");
    const auto unk = invoke({"bench", "--config", (dir / "c.json").string(), "--print-config"});
    CHECK(unk.code == 1);
    CHECK(contains(unk.err, "evaluation.snr_dB"));

    const auto pc = invoke({"bench", "--profile", "smoke", "--set", "training.max_iter=7", "--print-config"});
    CHECK(pc.code == 0);
    CHECK(contains(pc.out, "\"max_iter\": 7"));

    const std::string out = (dir / "b").string();
    const auto c = invoke({"bench", "--profile", "smoke", "--experiments", "complexity", "-o", out, "--emit-plotscript"});
    CHECK(c.code == 0);
    CHECK(std::filesystem::exists(dir / "b" / "bench.csv"));
    CHECK(std::filesystem::exists(dir / "b" / "manifest.json"));
    CHECK(std::filesystem::exists(dir / "b" / "plot_bench.py"));
}

}
