// SPDX-License-Identifier: Apache-2.0
#include "fdmimo/statfix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace fdmimo {

int mode_of(std::span<const int> values) {
  if (values.empty()) throw std::invalid_argument("mode of an empty history");
  std::map<int, int> counts;
  for (int v : values) ++counts[v];
  int best = counts.begin()->first;
  int best_count = 0;
  for (const auto& [v, c] : counts) {
    if (c > best_count) {
      best = v;
      best_count = c;
    }
  }
  return best;
}

TransmissionParams fix_codebook_params(const ParamHistory& hist, const Codebook& codebook, int variant) {
  if (hist.pmi.empty()) throw std::invalid_argument("empty parameter history");
  if (variant < 1 || variant > 3) throw std::invalid_argument("statistic variant must be 1, 2 or 3");
  const auto& entry = codebook.at(mode_of(hist.pmi));
  TransmissionParams p;
  p.W = entry.W;
  p.rank = entry.rank;
  p.pmi = entry.pmi;
  p.source = ParamSource::Fixed;
  if (variant == 1) {
    p.cqi = mode_of(hist.clsm_cqi);
  } else {
    if (hist.fixed_cqi.empty()) throw std::invalid_argument("fixed-precoder CQI history is empty");
    if (variant == 2) {
      p.cqi = mode_of(hist.fixed_cqi);
    } else {
      const double mean = std::accumulate(hist.fixed_cqi.begin(), hist.fixed_cqi.end(), 0.0) /
                          static_cast<double>(hist.fixed_cqi.size());
      p.cqi = static_cast<int>(std::lround(mean));
    }
  }
  p.cqi = std::clamp(p.cqi, kMinCqi, kMaxCqi);
  return p;
}

TransmissionParams nearest_neighbor_infer(std::span<const LocatedParams> train, const Location& query) {
  if (train.empty()) throw std::invalid_argument("nearest-neighbor inference needs training locations");
  const LocatedParams* best = nullptr;
  double best_d = 0.0;
  for (const auto& lp : train) {
    const double d = squared_distance(lp.location, query);
    if (!best || d < best_d || (d == best_d && lp.location.q < best->location.q)) {
      best = &lp;
      best_d = d;
    }
  }
  return best->params;
}

void write_fixed_table(std::span<const LocatedParams> table, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open fixed-parameter table for writing: " + path.string());
  os << "q,pmi,rank,cqi\n";
  for (const auto& lp : table) {
    os << lp.location.q << ',' << (lp.params.pmi ? *lp.params.pmi : -1) << ',' << lp.params.rank << ','
       << lp.params.cqi << '\n';
  }
}

std::vector<LocatedParams> read_fixed_table(const std::filesystem::path& path, const Codebook& codebook) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open fixed-parameter table: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("q,pmi,rank,cqi", 0) != 0) {
    throw FormatError("fixed-parameter table header missing");
  }
  std::vector<LocatedParams> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    LocatedParams lp;
    int pmi = -1;
    if (!(ss >> lp.location.q >> pmi >> lp.params.rank >> lp.params.cqi)) {
      throw FormatError("bad fixed-parameter row: " + line);
    }
    if (pmi < 0 || static_cast<std::size_t>(pmi) >= codebook.size()) throw FormatError("PMI out of range");
    const auto& e = codebook.at(pmi);
    if (e.rank != lp.params.rank) throw FormatError("rank does not match codebook entry");
    lp.params.W = e.W;
    lp.params.pmi = pmi;
    lp.params.source = ParamSource::Fixed;
    lp.params.validate();
    out.push_back(std::move(lp));
  }
  return out;
}

}  // namespace fdmimo
