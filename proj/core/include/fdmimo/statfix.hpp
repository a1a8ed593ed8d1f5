// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fdmimo/codebook.hpp"
#include "fdmimo/params.hpp"
#include "fdmimo/types.hpp"

namespace fdmimo {

/// Per-location CLSM history over the T samples.
struct ParamHistory {
  std::uint32_t q = 0;
  std::vector<int> pmi;
  std::vector<int> rank;
  std::vector<int> clsm_cqi;
  std::vector<int> fixed_cqi;  // CQI re-selected under the mode-PMI precoder
};

/// Most frequent value; ties go to the smallest value.
int mode_of(std::span<const int> values);

/// Statistic-based time fixing.
///   variant 1: CQI = mode of the CLSM CQI history
///   variant 2: CQI = mode of the CQI history under the fixed precoder
///   variant 3: CQI = round(mean) of the CQI history under the fixed precoder
/// The precoder is the codebook entry of the most frequent PMI in all variants.
TransmissionParams fix_codebook_params(const ParamHistory& hist, const Codebook& codebook, int variant);

struct LocatedParams {
  Location location;
  TransmissionParams params;
};

/// Copies the parameters of the Euclidean-nearest training location; ties go
/// to the smallest q.
TransmissionParams nearest_neighbor_infer(std::span<const LocatedParams> train, const Location& query);

/// CSV columns q, pmi, rank, cqi.
void write_fixed_table(std::span<const LocatedParams> table, const std::filesystem::path& path);
/// Reads a fixed table back, rebuilding W from the codebook. Locations carry
/// only q; the caller restores coordinates.
std::vector<LocatedParams> read_fixed_table(const std::filesystem::path& path, const Codebook& codebook);

}  // namespace fdmimo
