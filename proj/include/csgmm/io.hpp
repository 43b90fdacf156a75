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
#include "csgmm/model.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace csgmm {

/// Malformed or unreadable file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// CSD1, little-endian:
//   "CSD1" | u32 version | u32 N | u64 N_t | f64 sigma^2 | u64 seed | u8 flags
//   observations (N_t x N interleaved f64 re/im, sample-major)
//   [truth channels, same layout, flags bit0] [truth angles f64, flags bit1]
inline constexpr std::uint32_t kDatasetVersion = 1;

void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);
std::string dataset_sidecar_json(const Dataset& dataset);
/// Writes the dataset plus `<path>.json` mirroring its header.
void write_dataset_with_sidecar(const std::filesystem::path& path, const Dataset& dataset);

// CSGM1, little-endian:
//   "CSGM1" | u32 version | u32 K | u32 S_R | u8 grid kind (255: no grid)
//   [S_R f64 sines] | f64 sigma^2 | K*S_R f64 gammas (row-major) | K f64 weights
//   u64 seed | u32 iterations | u32 N | f64 gamma_floor | f64 final log-likelihood
//   u8 converged | u8 monotone
inline constexpr std::uint32_t kModelVersion = 1;

void write_model(const std::filesystem::path& path, const CsgmmModel& model);
CsgmmModel read_model(const std::filesystem::path& path);
std::string model_to_json(const CsgmmModel& model);

struct EstimateRow {
    std::size_t sample_index = 0;
    double doa = 0.0;
    double responsibility_entropy = 0.0;
    cvec h_hat; // written only when requested
};

/// Columns: sample_index,doa_estimate_rad,responsibility_entropy[,h<m>_re,h<m>_im...]
void write_estimates_csv(const std::filesystem::path& path, const std::vector<EstimateRow>& rows, bool with_h_hat);
std::vector<EstimateRow> read_estimates_csv(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace csgmm
