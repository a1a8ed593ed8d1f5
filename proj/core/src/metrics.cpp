// SPDX-License-Identifier: Apache-2.0
#include "fdmimo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace fdmimo {

MetricsReport make_report(std::string scheme, std::string split, std::vector<LocationMetric> locations,
                          double zero_threshold) {
  MetricsReport r;
  r.scheme = std::move(scheme);
  r.split = std::move(split);
  r.zero_threshold = zero_threshold;
  std::sort(locations.begin(), locations.end(),
            [](const LocationMetric& a, const LocationMetric& b) { return a.location.q < b.location.q; });
  r.locations = std::move(locations);

  std::map<double, RowMetric> rows;
  double total = 0.0;
  for (const auto& m : r.locations) {
    total += m.mean_throughput;
    auto [it, inserted] = rows.try_emplace(m.location.y());
    auto& row = it->second;
    if (inserted) {
      row.y = m.location.y();
      row.min = row.max = m.mean_throughput;
    }
    row.mean += m.mean_throughput;
    row.min = std::min(row.min, m.mean_throughput);
    row.max = std::max(row.max, m.mean_throughput);
    ++row.count;
    if (m.mean_throughput < zero_threshold) r.zero_throughput.push_back(m.location.q);
  }
  for (auto& [y, row] : rows) {
    row.mean /= static_cast<double>(row.count);
    r.rows.push_back(row);
  }
  r.overall_mean = r.locations.empty() ? 0.0 : total / static_cast<double>(r.locations.size());
  return r;
}

double gap_ratio(double scheme, double baseline) {
  if (baseline == 0.0) throw std::invalid_argument("gap ratio against a zero baseline");
  return (scheme - baseline) / baseline;
}

}  // namespace fdmimo
