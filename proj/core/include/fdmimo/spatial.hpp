// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fdmimo/gpr.hpp"
#include "fdmimo/natural_neighbor.hpp"
#include "fdmimo/types.hpp"

namespace fdmimo {

struct LocatedRank {
  Location location;
  int rank = 1;
};

/// Minimum fixed RI over the n_ri nearest training locations. Locations tied
/// in distance with the n_ri-th nearest are all included.
int infer_ri(std::span<const LocatedRank> train, const Location& query, int n_ri);

/// x-y projection used by natural-neighbour interpolation.
inline Point2 plane_point(const Location& l) { return {l.x(), l.y()}; }

/// Location coordinates as GPR input rows.
RMatrix location_matrix(std::span<const Location> locations);

struct InferredRecord {
  std::uint32_t q = 0;
  int rank = 1;
  int cqi = 1;
  std::string source;  // "svd-gpr" or "codebook-nn"
};

/// CSV columns q, rank, cqi, source.
void write_inferred_csv(std::span<const InferredRecord> records, const std::filesystem::path& path);

}  // namespace fdmimo
