// SPDX-License-Identifier: Apache-2.0
#include "fdmimo/spatial.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace fdmimo {

int infer_ri(std::span<const LocatedRank> train, const Location& query, int n_ri) {
  if (n_ri < 1) throw std::invalid_argument("N_RI must be positive");
  if (train.size() < static_cast<std::size_t>(n_ri)) {
    throw std::invalid_argument("fewer training locations than N_RI");
  }
  std::vector<double> d(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) d[i] = squared_distance(train[i].location, query);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  const double cutoff = d[order[static_cast<std::size_t>(n_ri) - 1]];
  const double tol = 1e-9 * std::max(cutoff, 1.0);
  int ri = train[order[0]].rank;
  for (std::size_t i : order) {
    if (d[i] > cutoff + tol) break;
    ri = std::min(ri, train[i].rank);
  }
  return ri;
}

RMatrix location_matrix(std::span<const Location> locations) {
  RMatrix X(static_cast<Eigen::Index>(locations.size()), 3);
  for (std::size_t i = 0; i < locations.size(); ++i) {
    for (int c = 0; c < 3; ++c) X(static_cast<Eigen::Index>(i), c) = locations[i].coords[c];
  }
  return X;
}

void write_inferred_csv(std::span<const InferredRecord> records, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open inferred-parameter CSV for writing: " + path.string());
  os << "q,rank,cqi,source\n";
  for (const auto& r : records) os << r.q << ',' << r.rank << ',' << r.cqi << ',' << r.source << '\n';
}

}  // namespace fdmimo
