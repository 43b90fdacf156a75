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
#include "csgmm/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace csgmm {

namespace {

constexpr std::uint8_t kNoGrid = 255;

class Writer {
public:
    void bytes(const char* p, std::size_t n) { buf_.append(p, n); }
    template <typename U>
    void uint(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i)
            buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    void complex(const cmat& m) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                f64(m(i, j).real());
                f64(m(i, j).imag());
            }
    }
    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw FormatError("cannot open '" + path.string() + "' for writing");
        out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        if (!out)
            throw FormatError("failed writing '" + path.string() + "'");
    }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path.string()) {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw FormatError("cannot open '" + path_ + "'");
        buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    void expect_magic(std::string_view magic) {
        need(magic.size());
        if (std::string_view(buf_.data() + pos_, magic.size()) != magic)
            throw FormatError("'" + path_ + "' does not start with magic " + std::string(magic));
        pos_ += magic.size();
    }
    template <typename U>
    U uint() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
    cmat complex(Eigen::Index rows, Eigen::Index cols) {
        need(static_cast<std::size_t>(rows * cols) * 16);
        cmat m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) {
                const double re = f64();
                const double im = f64();
                m(i, j) = {re, im};
            }
        return m;
    }
    void expect_end() const {
        if (pos_ != buf_.size())
            throw FormatError("'" + path_ + "' has trailing bytes");
    }

private:
    void need(std::size_t n) const {
        if (buf_.size() - pos_ < n)
            throw FormatError("'" + path_ + "' is truncated");
    }
    std::string path_;
    std::string buf_;
    std::size_t pos_ = 0;
};

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    dataset.validate();
    Writer w;
    w.bytes("CSD1", 4);
    w.uint<std::uint32_t>(kDatasetVersion);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(dataset.n_antennas()));
    w.uint<std::uint64_t>(dataset.size());
    w.f64(dataset.noise_variance);
    w.uint<std::uint64_t>(dataset.seed);
    const std::uint8_t flags = (dataset.truth_channels ? 1 : 0) | (dataset.truth_angles ? 2 : 0);
    w.uint<std::uint8_t>(flags);
    w.complex(dataset.observations);
    if (dataset.truth_channels)
        w.complex(*dataset.truth_channels);
    if (dataset.truth_angles)
        for (Eigen::Index i = 0; i < dataset.truth_angles->size(); ++i)
            w.f64((*dataset.truth_angles)[i]);
    w.save(path);
}

Dataset read_dataset(const std::filesystem::path& path) {
    Reader r(path);
    r.expect_magic("CSD1");
    const auto version = r.uint<std::uint32_t>();
    if (version != kDatasetVersion)
        throw FormatError("unsupported CSD1 version " + std::to_string(version));
    const auto n = static_cast<Eigen::Index>(r.uint<std::uint32_t>());
    const auto count = static_cast<Eigen::Index>(r.uint<std::uint64_t>());
    Dataset ds;
    ds.noise_variance = r.f64();
    ds.seed = r.uint<std::uint64_t>();
    const auto flags = r.uint<std::uint8_t>();
    if (flags & ~3u)
        throw FormatError("unknown CSD1 flag bits");
    ds.observations = r.complex(n, count);
    if (flags & 1)
        ds.truth_channels = r.complex(n, count);
    if (flags & 2) {
        rvec a(count);
        for (Eigen::Index i = 0; i < count; ++i)
            a[i] = r.f64();
        ds.truth_angles = a;
    }
    r.expect_end();
    try {
        ds.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    return ds;
}

std::string dataset_sidecar_json(const Dataset& dataset) {
    nlohmann::json j;
    j["format"] = "CSD1";
    j["version"] = kDatasetVersion;
    j["N"] = dataset.n_antennas();
    j["N_t"] = dataset.size();
    j["noise_variance"] = dataset.noise_variance;
    j["seed"] = dataset.seed;
    j["truth_channels"] = dataset.truth_channels.has_value();
    j["truth_angles"] = dataset.truth_angles.has_value();
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(dataset.observation_hash()));
    j["observation_hash"] = hash;
    return j.dump(2) + "\n";
}

void write_dataset_with_sidecar(const std::filesystem::path& path, const Dataset& dataset) {
    write_dataset(path, dataset);
    write_text(path.string() + ".json", dataset_sidecar_json(dataset));
}

void write_model(const std::filesystem::path& path, const CsgmmModel& model) {
    model.validate();
    Writer w;
    w.bytes("CSGM1", 5);
    w.uint<std::uint32_t>(kModelVersion);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(model.components()));
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(model.columns()));
    if (model.grid.sines.empty()) {
        w.uint<std::uint8_t>(kNoGrid);
    } else {
        w.uint<std::uint8_t>(static_cast<std::uint8_t>(model.grid.kind));
        for (double s : model.grid.sines)
            w.f64(s);
    }
    w.f64(model.noise_variance);
    for (Eigen::Index k = 0; k < model.gammas.rows(); ++k)
        for (Eigen::Index i = 0; i < model.gammas.cols(); ++i)
            w.f64(model.gammas(k, i));
    for (Eigen::Index k = 0; k < model.weights.size(); ++k)
        w.f64(model.weights[k]);
    w.uint<std::uint64_t>(model.seed);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(model.log.iterations));
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(model.n_antennas));
    w.f64(model.gamma_floor);
    w.f64(model.log.log_likelihood.empty() ? std::numeric_limits<double>::quiet_NaN()
                                            : model.log.log_likelihood.back());
    w.uint<std::uint8_t>(model.log.converged ? 1 : 0);
    w.uint<std::uint8_t>(model.log.monotone ? 1 : 0);
    w.save(path);
}

CsgmmModel read_model(const std::filesystem::path& path) {
    Reader r(path);
    r.expect_magic("CSGM1");
    const auto version = r.uint<std::uint32_t>();
    if (version != kModelVersion)
        throw FormatError("unsupported CSGM1 version " + std::to_string(version));
    const auto k_count = static_cast<Eigen::Index>(r.uint<std::uint32_t>());
    const auto s_count = static_cast<Eigen::Index>(r.uint<std::uint32_t>());
    CsgmmModel m;
    const auto kind = r.uint<std::uint8_t>();
    if (kind != kNoGrid) {
        if (kind > static_cast<std::uint8_t>(GridKind::custom))
            throw FormatError("unknown grid kind in model file");
        m.grid.kind = static_cast<GridKind>(kind);
        m.grid.sines.resize(static_cast<std::size_t>(s_count));
        for (auto& s : m.grid.sines)
            s = r.f64();
    }
    m.noise_variance = r.f64();
    m.gammas.resize(k_count, s_count);
    for (Eigen::Index k = 0; k < k_count; ++k)
        for (Eigen::Index i = 0; i < s_count; ++i)
            m.gammas(k, i) = r.f64();
    m.weights.resize(k_count);
    for (Eigen::Index k = 0; k < k_count; ++k)
        m.weights[k] = r.f64();
    m.seed = r.uint<std::uint64_t>();
    m.log.iterations = static_cast<int>(r.uint<std::uint32_t>());
    m.n_antennas = static_cast<int>(r.uint<std::uint32_t>());
    m.gamma_floor = r.f64();
    const double ll = r.f64();
    if (!std::isnan(ll))
        m.log.log_likelihood.push_back(ll);
    m.log.converged = r.uint<std::uint8_t>() != 0;
    m.log.monotone = r.uint<std::uint8_t>() != 0;
    r.expect_end();
    try {
        m.validate();
        if (!m.grid.sines.empty())
            m.grid.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("invalid model file: ") + e.what());
    }
    return m;
}

std::string model_to_json(const CsgmmModel& model) {
    nlohmann::json j;
    j["format"] = "CSGM1";
    j["K"] = model.components();
    j["S_R"] = model.columns();
    j["N"] = model.n_antennas;
    j["noise_variance"] = model.noise_variance;
    j["gamma_floor"] = model.gamma_floor;
    j["seed"] = model.seed;
    j["grid_kind"] = model.grid.sines.empty() ? "none" : to_string(model.grid.kind);
    j["grid_sines"] = model.grid.sines;
    j["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
    auto gammas = nlohmann::json::array();
    for (Eigen::Index k = 0; k < model.gammas.rows(); ++k) {
        const rvec row = model.gammas.row(k).transpose();
        gammas.push_back(std::vector<double>(row.data(), row.data() + row.size()));
    }
    j["gammas"] = gammas;
    j["iterations"] = model.log.iterations;
    j["converged"] = model.log.converged;
    j["monotone"] = model.log.monotone;
    j["log_likelihood"] = model.log.log_likelihood;
    return j.dump(2) + "\n";
}

void write_estimates_csv(const std::filesystem::path& path, const std::vector<EstimateRow>& rows, bool with_h_hat) {
    std::ostringstream out;
    out << "sample_index,doa_estimate_rad,responsibility_entropy";
    const Eigen::Index n = with_h_hat && !rows.empty() ? rows.front().h_hat.size() : 0;
    for (Eigen::Index m = 0; m < n; ++m)
        out << ",h" << m << "_re,h" << m << "_im";
    out << '\n';
    for (const auto& row : rows) {
        out << row.sample_index << ',' << format_double(row.doa) << ',' << format_double(row.responsibility_entropy);
        for (Eigen::Index m = 0; m < n; ++m)
            out << ',' << format_double(row.h_hat[m].real()) << ',' << format_double(row.h_hat[m].imag());
        out << '\n';
    }
    write_text(path, out.str());
}

std::vector<EstimateRow> read_estimates_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line) || line.rfind("sample_index,doa_estimate_rad,responsibility_entropy", 0) != 0)
        throw FormatError("'" + path.string() + "' is not an estimates CSV");
    const auto header_cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
    const Eigen::Index n = (header_cols - 2) / 2;
    std::vector<EstimateRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');)
            cells.push_back(cell);
        if (static_cast<Eigen::Index>(cells.size()) != header_cols + 1)
            throw FormatError("estimates CSV row has the wrong number of columns");
        EstimateRow row;
        try {
            row.sample_index = std::stoull(cells[0]);
            row.doa = std::stod(cells[1]);
            row.responsibility_entropy = std::stod(cells[2]);
            row.h_hat.resize(n);
            for (Eigen::Index m = 0; m < n; ++m)
                row.h_hat[m] = {std::stod(cells[static_cast<std::size_t>(3 + 2 * m)]),
                                std::stod(cells[static_cast<std::size_t>(4 + 2 * m)])};
        } catch (const std::logic_error&) {
            throw FormatError("estimates CSV contains a malformed number");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw FormatError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out)
        throw FormatError("failed writing '" + path.string() + "'");
}

} // namespace csgmm
