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
#include "csgmm/dictionary.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace csgmm {

std::string to_string(GridKind kind) {
    switch (kind) {
    case GridKind::equidistant_sin: return "equidistant_sin";
    case GridKind::circulant: return "circulant";
    case GridKind::toeplitz: return "toeplitz";
    case GridKind::custom: return "custom";
    }
    return "custom";
}

GridKind grid_kind_from_string(const std::string& name) {
    if (name == "equidistant_sin") return GridKind::equidistant_sin;
    if (name == "circulant") return GridKind::circulant;
    if (name == "toeplitz") return GridKind::toeplitz;
    if (name == "custom") return GridKind::custom;
    throw std::invalid_argument("unknown grid kind '" + name + "'");
}

double AngleGrid::angle(std::size_t i) const { return std::asin(sines.at(i)); }

std::vector<double> AngleGrid::angles() const {
    std::vector<double> out(sines.size());
    std::transform(sines.begin(), sines.end(), out.begin(), [](double s) { return std::asin(s); });
    return out;
}

std::vector<std::size_t> AngleGrid::sine_order() const {
    std::vector<std::size_t> order(sines.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sines[a] < sines[b]; });
    return order;
}

void AngleGrid::validate() const {
    if (sines.empty())
        throw std::invalid_argument("angle grid is empty");
    for (double s : sines)
        if (!(s >= -1.0 && s < 1.0))
            throw std::invalid_argument("grid sine outside [-1, 1)");
    const auto order = sine_order();
    for (std::size_t i = 1; i < order.size(); ++i)
        if (sines[order[i]] - sines[order[i - 1]] <= 1e-12)
            throw std::invalid_argument("angle grid contains duplicate points");
}

cvec steering_from_sine(double sine, int n_antennas) {
    if (n_antennas < 1)
        throw std::invalid_argument("steering vector needs at least one antenna");
    cvec a(n_antennas);
    for (int m = 0; m < n_antennas; ++m)
        a[m] = std::polar(1.0, -pi * m * sine);
    return a;
}

cvec steering(double delta, int n_antennas) { return steering_from_sine(std::sin(delta), n_antennas); }

AngleGrid grid_equidistant_sin(int n_points) {
    if (n_points < 2)
        throw std::invalid_argument("equidistant grid needs S_R >= 2");
    AngleGrid g{GridKind::equidistant_sin, std::vector<double>(n_points)};
    for (int n = 0; n < n_points; ++n)
        g.sines[n] = -1.0 + 2.0 * n / n_points;
    return g;
}

AngleGrid grid_circulant(int n_antennas) {
    if (n_antennas < 2 || n_antennas % 2 != 0)
        throw std::invalid_argument("circulant grid needs an even N >= 2");
    AngleGrid g{GridKind::circulant, std::vector<double>(n_antennas)};
    const double n_ant = n_antennas;
    for (int n = 0; n < n_antennas; ++n)
        g.sines[n] = n < n_antennas / 2 ? 2.0 * n / n_ant : 2.0 * n / n_ant - 2.0;
    return g;
}

AngleGrid grid_toeplitz(int n_antennas) {
    if (n_antennas < 1)
        throw std::invalid_argument("Toeplitz grid needs N >= 1");
    AngleGrid g{GridKind::toeplitz, std::vector<double>(2 * n_antennas)};
    const double n_ant = n_antennas;
    for (int n = 0; n < 2 * n_antennas; ++n)
        g.sines[n] = n < n_antennas ? n / n_ant : n / n_ant - 2.0;
    return g;
}

AngleGrid grid_from_angles(const std::vector<double>& angles) {
    AngleGrid g{GridKind::custom, {}};
    g.sines.reserve(angles.size());
    for (double a : angles) {
        if (!(a >= -pi / 2 && a < pi / 2))
            throw std::invalid_argument("grid angle outside [-pi/2, pi/2)");
        g.sines.push_back(std::sin(a));
    }
    g.validate();
    return g;
}

AngleGrid grid_from_sines(GridKind kind, std::vector<double> sines) {
    AngleGrid g{kind, std::move(sines)};
    g.validate();
    return g;
}

Dictionary build_dictionary(const AngleGrid& grid, int n_antennas) {
    grid.validate();
    Dictionary d;
    d.grid = grid;
    d.n_antennas = n_antennas;
    d.matrix.resize(n_antennas, static_cast<Eigen::Index>(grid.size()));
    for (std::size_t n = 0; n < grid.size(); ++n)
        d.matrix.col(static_cast<Eigen::Index>(n)) = steering_from_sine(grid.sines[n], n_antennas);
    return d;
}

std::string grid_to_json(const AngleGrid& grid) {
    nlohmann::json j;
    j["kind"] = to_string(grid.kind);
    j["S_R"] = grid.size();
    j["sines"] = grid.sines;
    return j.dump(2);
}

AngleGrid grid_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    AngleGrid g{grid_kind_from_string(j.at("kind").get<std::string>()), j.at("sines").get<std::vector<double>>()};
    if (j.contains("S_R") && j.at("S_R").get<std::size_t>() != g.size())
        throw std::invalid_argument("grid JSON: S_R does not match the sines array");
    g.validate();
    return g;
}

} // namespace csgmm
