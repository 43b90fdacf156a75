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

#include "csgmm/types.hpp"

#include <string>
#include <vector>

namespace csgmm {

enum class GridKind { equidistant_sin, circulant, toeplitz, custom };

std::string to_string(GridKind kind);
GridKind grid_kind_from_string(const std::string& name);

/// Angular grid on [-pi/2, pi/2). Grid points are stored through their
/// sines, which is what the steering vectors depend on; angles are derived
/// with asin for reporting only.
struct AngleGrid {
    GridKind kind = GridKind::custom;
    std::vector<double> sines;

    std::size_t size() const { return sines.size(); }
    double angle(std::size_t i) const;
    std::vector<double> angles() const;

    /// Column indices ordered by increasing sine (identity for sorted grids).
    std::vector<std::size_t> sine_order() const;

    /// Throws std::invalid_argument if a sine leaves [-1, 1) or two grid
    /// points coincide (|sin_i - sin_j| <= 1e-12).
    void validate() const;
};

/// Half-wavelength ULA response; entry m is exp(-j*pi*m*sin(delta)).
cvec steering(double delta, int n_antennas);
cvec steering_from_sine(double sine, int n_antennas);

/// sin(delta_n) = -1 + 2n/S for n = 0..S-1, sorted ascending.
AngleGrid grid_equidistant_sin(int n_points);

/// N-point grid whose dictionary is the N-point DFT matrix, column for
/// column. Columns keep DFT order: sines 2n/N for n < N/2, then 2n/N - 2.
AngleGrid grid_circulant(int n_antennas);

/// 2N-point grid whose dictionary is the N x 2N oversampled DFT matrix.
AngleGrid grid_toeplitz(int n_antennas);

AngleGrid grid_from_angles(const std::vector<double>& angles);
AngleGrid grid_from_sines(GridKind kind, std::vector<double> sines);

struct Dictionary {
    cmat matrix; // N x S_R
    AngleGrid grid;
    int n_antennas = 0;

    Eigen::Index columns() const { return matrix.cols(); }
};

Dictionary build_dictionary(const AngleGrid& grid, int n_antennas);

/// JSON document {"kind", "S_R", "sines"}.
std::string grid_to_json(const AngleGrid& grid);
AngleGrid grid_from_json(const std::string& text);

} // namespace csgmm
