// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fdmimo/metrics.hpp"

namespace fdmimo {

void write_report_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open report CSV for writing: " + path.string());
  os << "q,x,y,z,throughput_bits,throughput_mbps\n" << std::fixed;
  for (const auto& m : report.locations) {
    os << m.location.q << ',' << std::setprecision(3) << m.location.x() << ',' << m.location.y() << ','
       << m.location.z() << ',' << std::setprecision(6) << m.mean_throughput << ','
       << bits_per_tti_to_mbps(m.mean_throughput) << '\n';
  }
}

MetricsReport read_report_csv(const std::filesystem::path& path, std::string scheme, std::string split,
                              double zero_threshold) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open report CSV: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("q,x,y,z,throughput_bits", 0) != 0) {
    throw FormatError("report CSV header missing: " + path.string());
  }
  std::vector<LocationMetric> locs;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    LocationMetric m;
    if (!(ss >> m.location.q >> m.location.coords[0] >> m.location.coords[1] >> m.location.coords[2] >>
          m.mean_throughput)) {
      throw FormatError("bad report row: " + line);
    }
    locs.push_back(m);
  }
  return make_report(std::move(scheme), std::move(split), std::move(locs), zero_threshold);
}

void write_rows_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open row CSV for writing: " + path.string());
  os << "y,count,mean,min,max\n" << std::fixed;
  for (const auto& r : report.rows) {
    os << std::setprecision(3) << r.y << ',' << r.count << ',' << std::setprecision(6) << r.mean << ',' << r.min
       << ',' << r.max << '\n';
  }
}

namespace {

void check_same_grid(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw std::invalid_argument("no reports to compare");
  const auto& base = reports.front().locations;
  for (const auto& r : reports) {
    if (r.locations.size() != base.size()) throw Error("reports cover different grids");
    for (std::size_t i = 0; i < base.size(); ++i) {
      const auto& a = base[i].location;
      const auto& b = r.locations[i].location;
      if (a.q != b.q || std::abs(a.x() - b.x()) > 1e-3 || std::abs(a.y() - b.y()) > 1e-3) {
        throw Error("reports cover different grids");
      }
    }
  }
}

double safe_gap(double v, double base) { return base == 0.0 ? 0.0 : gap_ratio(v, base); }

}  // namespace

void write_summary(std::span<const MetricsReport> reports, std::ostream& os) {
  check_same_grid(reports);
  const auto& base = reports.front();
  os << std::fixed << std::setprecision(3);
  os << "baseline: " << base.scheme << " (" << base.split << ", " << base.locations.size() << " locations)\n\n";
  os << std::left << std::setw(20) << "scheme" << std::right << std::setw(16) << "mean bits/TTI" << std::setw(12)
     << "Mbit/s" << std::setw(12) << "gap" << std::setw(8) << "zeros" << '\n';
  for (const auto& r : reports) {
    os << std::left << std::setw(20) << r.scheme << std::right << std::setw(16) << r.overall_mean << std::setw(12)
       << bits_per_tti_to_mbps(r.overall_mean) << std::setw(11) << 100.0 * safe_gap(r.overall_mean, base.overall_mean)
       << '%' << std::setw(8) << r.zero_throughput.size() << '\n';
  }
  os << "\nper-row mean [min, max] in bits/TTI\n";
  for (std::size_t i = 0; i < base.rows.size(); ++i) {
    os << "y=" << std::setw(8) << base.rows[i].y;
    for (const auto& r : reports) {
      os << "  " << r.scheme << ' ' << r.rows[i].mean << " [" << r.rows[i].min << ", " << r.rows[i].max << ']';
    }
    os << '\n';
  }
  for (const auto& r : reports) {
    if (r.zero_throughput.empty()) continue;
    os << "\nzero throughput under " << r.scheme << ":";
    for (auto q : r.zero_throughput) {
      const auto& loc = std::find_if(r.locations.begin(), r.locations.end(),
                                     [q](const LocationMetric& m) { return m.location.q == q; })
                            ->location;
      os << " (" << loc.x() << ", " << loc.y() << ')';
    }
    os << '\n';
  }
}

void write_comparison(std::span<const MetricsReport> reports, const std::filesystem::path& dir) {
  check_same_grid(reports);
  std::filesystem::create_directories(dir);
  const auto& base = reports.front();
  {
    std::ofstream os(dir / "comparison.csv");
    if (!os) throw Error("cannot write comparison CSV in " + dir.string());
    os << "q,x,y";
    for (const auto& r : reports) os << ',' << r.scheme;
    for (std::size_t i = 1; i < reports.size(); ++i) os << ",gap_" << reports[i].scheme;
    os << '\n' << std::fixed;
    for (std::size_t l = 0; l < base.locations.size(); ++l) {
      const auto& loc = base.locations[l].location;
      os << loc.q << ',' << std::setprecision(3) << loc.x() << ',' << loc.y() << std::setprecision(6);
      for (const auto& r : reports) os << ',' << r.locations[l].mean_throughput;
      for (std::size_t i = 1; i < reports.size(); ++i) {
        os << ',' << safe_gap(reports[i].locations[l].mean_throughput, base.locations[l].mean_throughput);
      }
      os << '\n';
    }
  }
  {
    std::ofstream os(dir / "rows.csv");
    if (!os) throw Error("cannot write row CSV in " + dir.string());
    os << "scheme,y,count,mean,min,max\n" << std::fixed;
    for (const auto& r : reports) {
      for (const auto& row : r.rows) {
        os << r.scheme << ',' << std::setprecision(3) << row.y << ',' << row.count << ',' << std::setprecision(6)
           << row.mean << ',' << row.min << ',' << row.max << '\n';
      }
    }
  }
  std::ofstream os(dir / "summary.txt");
  if (!os) throw Error("cannot write summary in " + dir.string());
  write_summary(reports, os);
}

}  // namespace fdmimo
