// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fdmimo/types.hpp"

namespace fdmimo {

struct LocationMetric {
  Location location;
  double mean_throughput = 0.0;  // bits per TTI, averaged over time
};

/// Locations sharing a y coordinate (same distance row from the BS).
struct RowMetric {
  double y = 0.0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

struct MetricsReport {
  std::string scheme;
  std::string split;  // "train" or "test"
  std::vector<LocationMetric> locations;  // ascending q
  std::vector<RowMetric> rows;            // ascending y
  double overall_mean = 0.0;
  double zero_threshold = 1.0;
  std::vector<std::uint32_t> zero_throughput;  // q with mean below zero_threshold
};

/// Builds rows, overall mean and the zero-throughput list. Sorts by q.
MetricsReport make_report(std::string scheme, std::string split, std::vector<LocationMetric> locations,
                          double zero_threshold = 1.0);

/// (scheme - baseline) / baseline.
double gap_ratio(double scheme, double baseline);

/// 1 ms TTI.
inline double bits_per_tti_to_mbps(double bits) { return bits * 1e-3; }

/// Per-location CSV: q, x, y, z, throughput_bits, throughput_mbps.
void write_report_csv(const MetricsReport& report, const std::filesystem::path& path);
/// Reads a per-location CSV; scheme and split are taken from the arguments.
MetricsReport read_report_csv(const std::filesystem::path& path, std::string scheme, std::string split,
                              double zero_threshold = 1.0);

/// Per-row CSV: y, count, mean, min, max.
void write_rows_csv(const MetricsReport& report, const std::filesystem::path& path);

/// Comparison of reports against reports[0]. Throws Error when the reports do
/// not cover the same locations. Writes `comparison.csv` (per location, one
/// throughput and one gap column per scheme), `rows.csv` and `summary.txt`.
void write_comparison(std::span<const MetricsReport> reports, const std::filesystem::path& dir);
void write_summary(std::span<const MetricsReport> reports, std::ostream& os);

}  // namespace fdmimo
