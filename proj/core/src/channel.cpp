// SPDX-License-Identifier: Apache-2.0
#include "fdmimo/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include "fdmimo/binary_io.hpp"
#include "fdmimo/parallel.hpp"

namespace fdmimo {
namespace {

constexpr double kSpeedOfLight = 299'792'458.0;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Vec3 = std::array<double, 3>;

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double norm(const Vec3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

struct Scatterer {
  Vec3 position;
  double reflection_amplitude;
  cdouble pol_a;
  cdouble pol_b;
  std::vector<Vec3> ray_offsets;
  std::vector<double> ray_phases;
};

// One propagation path at one location, before Rician scaling.
struct Path {
  double amplitude;
  double delay_s;
  double base_phase;
  Eigen::VectorXcd tx;  // dual-polarized transmit response, length n_tx
  Eigen::VectorXcd rx;  // receive response, length n_rx
  bool los;
};

// Half-wavelength spaced arrays; direction cosines along the array axes.
// The transmit array lies in the x-z plane, the receive array along x.
Eigen::VectorXcd tx_response(const SceneConfig& cfg, const Vec3& dir, cdouble pol_a, cdouble pol_b) {
  const int n12 = cfg.n1 * cfg.n2;
  Eigen::VectorXcd v(2 * n12);
  for (int i1 = 0; i1 < cfg.n1; ++i1) {
    for (int i2 = 0; i2 < cfg.n2; ++i2) {
      const double phase = std::numbers::pi * (dir[0] * i1 + dir[2] * i2);
      const cdouble a = std::polar(1.0, phase);
      v(i1 * cfg.n2 + i2) = pol_a * a;
      v(n12 + i1 * cfg.n2 + i2) = pol_b * a;
    }
  }
  return v;
}

Eigen::VectorXcd rx_response(const SceneConfig& cfg, const Vec3& dir) {
  Eigen::VectorXcd v(cfg.n_rx);
  for (int m = 0; m < cfg.n_rx; ++m) v(m) = std::polar(1.0, std::numbers::pi * dir[0] * m);
  return v;
}

Vec3 unit(const Vec3& v) {
  const double n = norm(v);
  return {v[0] / n, v[1] / n, v[2] / n};
}

std::vector<Scatterer> draw_scatterers(const SceneConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed ^ 0x5ca77e5ULL));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double x_lo = cfg.first_col_x_m - 30.0;
  const double x_hi = cfg.first_col_x_m + (cfg.cols - 1) * cfg.spacing_m + 30.0;
  const double y_hi = cfg.first_row_y_m + (cfg.rows - 1) * cfg.spacing_m + 30.0;
  std::vector<Scatterer> out;
  for (int p = 1; p < cfg.num_paths; ++p) {
    Scatterer s;
    s.position = {x_lo + (x_hi - x_lo) * u01(rng), y_hi * u01(rng), 15.0 * u01(rng)};
    // 3..10 dB reflection loss
    s.reflection_amplitude = std::pow(10.0, -(3.0 + 7.0 * u01(rng)) / 20.0);
    const double psi = 0.5 * std::numbers::pi * u01(rng);
    s.pol_a = std::polar(std::cos(psi), kTwoPi * u01(rng));
    s.pol_b = std::polar(std::sin(psi), kTwoPi * u01(rng));
    for (int r = 0; r < cfg.rays_per_path; ++r) {
      const double rad = r == 0 ? 0.0 : cfg.cluster_radius_m * std::cbrt(u01(rng));
      const double az = kTwoPi * u01(rng);
      const double el = std::acos(2.0 * u01(rng) - 1.0);
      s.ray_offsets.push_back({rad * std::sin(el) * std::cos(az), rad * std::sin(el) * std::sin(az), rad * std::cos(el)});
      s.ray_phases.push_back(kTwoPi * u01(rng));
    }
    out.push_back(s);
  }
  return out;
}

std::vector<Path> location_paths(const SceneConfig& cfg, const std::vector<Scatterer>& scatterers,
                                 const Location& loc, cdouble los_pol_b) {
  std::vector<Path> paths;
  const Vec3& bs = cfg.bs_position;
  const Vec3& ue = loc.coords;
  const double kf = std::pow(10.0, cfg.k_factor_db / 10.0);
  auto pathloss = [&](double len) {
    return std::pow(cfg.reference_distance_m / std::max(len, cfg.reference_distance_m),
                    0.5 * cfg.pathloss_exponent);
  };

  {
    const Vec3 d = sub(ue, bs);
    const double len = norm(d);
    Path p;
    p.amplitude = pathloss(len);
    p.delay_s = len / kSpeedOfLight;
    p.base_phase = 0.0;
    p.tx = tx_response(cfg, unit(d), std::sqrt(0.5), los_pol_b);
    p.rx = rx_response(cfg, unit(sub(bs, ue)));
    p.los = true;
    paths.push_back(std::move(p));
  }
  for (const auto& s : scatterers) {
    const double ray_scale = 1.0 / std::sqrt(static_cast<double>(s.ray_offsets.size()));
    for (std::size_t r = 0; r < s.ray_offsets.size(); ++r) {
      const Vec3& o = s.ray_offsets[r];
      const Vec3 pos{s.position[0] + o[0], s.position[1] + o[1], s.position[2] + o[2]};
      const Vec3 d1 = sub(pos, bs);
      const Vec3 d2 = sub(ue, pos);
      const double len = norm(d1) + norm(d2);
      Path p;
      p.amplitude = ray_scale * s.reflection_amplitude * pathloss(len);
      p.delay_s = len / kSpeedOfLight;
      p.base_phase = s.ray_phases[r];
      p.tx = tx_response(cfg, unit(d1), s.pol_a, s.pol_b);
      p.rx = rx_response(cfg, unit(sub(pos, ue)));
      p.los = false;
      paths.push_back(std::move(p));
    }
  }

  // Rician composition: keep the geometric total power, give the LoS-like
  // term a K/(K+1) share and scale the scattered terms jointly.
  double total = 0.0;
  double nlos = 0.0;
  for (const auto& p : paths) {
    total += p.amplitude * p.amplitude;
    if (!p.los) nlos += p.amplitude * p.amplitude;
  }
  if (nlos > 0.0) {
    paths[0].amplitude = std::sqrt(total * kf / (kf + 1.0));
    const double scale = std::sqrt(total / (kf + 1.0) / nlos);
    for (std::size_t i = 1; i < paths.size(); ++i) paths[i].amplitude *= scale;
  }
  return paths;
}

}  // namespace

void SceneConfig::validate() const {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("scene grid must have positive extents");
  if (!(spacing_m > 0.0)) throw std::invalid_argument("grid spacing must be positive");
  if (num_paths < 1) throw std::invalid_argument("scene needs at least one path");
  if (rays_per_path < 1) throw std::invalid_argument("each scattered path needs at least one ray");
  if (!(cluster_radius_m >= 0.0)) throw std::invalid_argument("cluster radius must be non-negative");
  if (n1 < 1 || n2 < 1 || n_rx < 1) throw std::invalid_argument("antenna counts must be positive");
  if (n_tx() > 16) throw std::invalid_argument("at most 16 transmit ports are supported");
  if (n_rx > kMaxRx) throw std::invalid_argument("too many receive antennas");
  if (!(noise_variance > 0.0)) throw std::invalid_argument("noise variance must be positive");
  if (jitter < 0.0) throw std::invalid_argument("jitter must be non-negative");
  if (!(carrier_hz > 0.0) || !(subcarrier_spacing_hz > 0.0)) {
    throw std::invalid_argument("carrier and subcarrier spacing must be positive");
  }
}

ChannelDataset::ChannelDataset(DatasetShape shape, double carrier_hz, double subcarrier_spacing_hz,
                               std::uint64_t seed, std::vector<Location> locations,
                               std::vector<std::complex<float>> tensor)
    : shape_(shape),
      carrier_hz_(carrier_hz),
      subcarrier_spacing_hz_(subcarrier_spacing_hz),
      seed_(seed),
      locations_(std::move(locations)),
      tensor_(std::move(tensor)) {
  if (shape_.T == 0 || shape_.K == 0 || shape_.Q == 0 || shape_.n_rx == 0 || shape_.n_tx == 0) {
    throw std::invalid_argument("dataset extents must be positive");
  }
  if (locations_.size() != shape_.Q) throw std::invalid_argument("location count does not match Q");
  for (std::size_t i = 0; i < locations_.size(); ++i) {
    if (locations_[i].q != i) throw std::invalid_argument("location indices must be 0..Q-1 in order");
    for (double c : locations_[i].coords) {
      if (!std::isfinite(c)) throw std::invalid_argument("location coordinates must be finite");
    }
  }
  if (tensor_.size() != shape_.entry_count()) throw std::invalid_argument("tensor size does not match shape");
}

std::size_t ChannelDataset::offset(std::uint32_t t, std::uint32_t k, std::uint32_t q) const {
  if (t >= shape_.T || k >= shape_.K || q >= shape_.Q) throw std::out_of_range("channel index out of range");
  return ((std::size_t{t} * shape_.K + k) * shape_.Q + q) * shape_.n_rx * shape_.n_tx;
}

CMatrix ChannelDataset::matrix(std::uint32_t t, std::uint32_t k, std::uint32_t q) const {
  const std::size_t base = offset(t, k, q);
  CMatrix h(shape_.n_rx, shape_.n_tx);
  for (std::uint32_t r = 0; r < shape_.n_rx; ++r) {
    for (std::uint32_t c = 0; c < shape_.n_tx; ++c) {
      const auto v = tensor_[base + r * shape_.n_tx + c];
      h(r, c) = cdouble(v.real(), v.imag());
    }
  }
  return h;
}

std::vector<CMatrix> ChannelDataset::slice(std::uint32_t t, std::uint32_t q) const {
  std::vector<CMatrix> out;
  out.reserve(shape_.K);
  for (std::uint32_t k = 0; k < shape_.K; ++k) out.push_back(matrix(t, k, q));
  return out;
}

std::vector<Location> scene_locations(const SceneConfig& cfg) {
  std::vector<Location> locs;
  auto push = [&](double x, double y) {
    Location l;
    l.q = static_cast<std::uint32_t>(locs.size());
    l.coords = {x, y, cfg.ue_height_m};
    locs.push_back(l);
  };
  for (int r = 0; r < cfg.rows; ++r) {
    for (int c = 0; c < cfg.cols; ++c) {
      push(cfg.first_col_x_m + c * cfg.spacing_m, cfg.first_row_y_m + r * cfg.spacing_m);
    }
  }
  if (cfg.interleaved_test_grid) {
    for (int r = 0; r + 1 < cfg.rows; r += 2) {
      for (int c = 0; c + 1 < cfg.cols; c += 2) {
        push(cfg.first_col_x_m + (c + 0.5) * cfg.spacing_m, cfg.first_row_y_m + (r + 0.5) * cfg.spacing_m);
      }
    }
  }
  return locs;
}

ChannelDataset generate_dataset(const SceneConfig& cfg, std::uint64_t seed, std::uint32_t T, std::uint32_t K,
                                int workers) {
  cfg.validate();
  if (T == 0 || K == 0) throw std::invalid_argument("time and subcarrier extents must be positive");

  std::vector<Location> locs = scene_locations(cfg);
  DatasetShape shape{T, K, static_cast<std::uint32_t>(locs.size()), static_cast<std::uint32_t>(cfg.n_rx),
                     static_cast<std::uint32_t>(cfg.n_tx())};
  const auto scatterers = draw_scatterers(cfg, seed);
  std::mt19937_64 scene_rng(splitmix64(seed ^ 0x105ULL));
  const cdouble los_pol_b = std::polar(std::sqrt(0.5), kTwoPi * std::uniform_real_distribution<double>(0, 1)(scene_rng));

  std::vector<std::complex<float>> tensor(shape.entry_count());
  const std::size_t per_matrix = std::size_t{shape.n_rx} * shape.n_tx;
  const double jitter_rad = cfg.jitter * std::numbers::pi;

  parallel_for(shape.Q, workers, [&](std::size_t q) {
    const auto paths = location_paths(cfg, scatterers, locs[q], los_pol_b);
    std::mt19937_64 rng(splitmix64(seed * 0x100000001b3ULL + q + 1));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Eigen::MatrixXcd> outer;
    outer.reserve(paths.size());
    for (const auto& p : paths) outer.push_back(p.rx * p.tx.adjoint());

    Eigen::MatrixXcd h(shape.n_rx, shape.n_tx);
    std::vector<double> phase(paths.size());
    for (std::uint32_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < paths.size(); ++i) {
        phase[i] = paths[i].base_phase;
        if (!paths[i].los) phase[i] += jitter_rad * gauss(rng);
      }
      for (std::uint32_t k = 0; k < K; ++k) {
        const double fk = cfg.carrier_hz + (static_cast<double>(k) - 0.5 * K) * cfg.subcarrier_spacing_hz;
        h.setZero();
        for (std::size_t i = 0; i < paths.size(); ++i) {
          const double ph = phase[i] - kTwoPi * std::fmod(fk * paths[i].delay_s, 1.0);
          h += (paths[i].amplitude * std::polar(1.0, ph)) * outer[i];
        }
        const std::size_t base = ((std::size_t{t} * K + k) * shape.Q + q) * per_matrix;
        for (std::uint32_t r = 0; r < shape.n_rx; ++r) {
          for (std::uint32_t c = 0; c < shape.n_tx; ++c) {
            const cdouble v = h(r, c);
            tensor[base + r * shape.n_tx + c] = {static_cast<float>(v.real()), static_cast<float>(v.imag())};
          }
        }
      }
    }
  });

  return ChannelDataset(shape, cfg.carrier_hz, cfg.subcarrier_spacing_hz, seed, std::move(locs), std::move(tensor));
}

void save_dataset(const ChannelDataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open dataset file for writing: " + path.string());
  io::write_magic(os, kDatasetMagic);
  io::write_u32(os, kDatasetVersion);
  io::write_u32(os, ds.T());
  io::write_u32(os, ds.K());
  io::write_u32(os, ds.Q());
  io::write_u32(os, ds.n_rx());
  io::write_u32(os, ds.n_tx());
  io::write_f64(os, ds.carrier_hz());
  io::write_f64(os, ds.subcarrier_spacing_hz());
  io::write_u64(os, ds.seed());
  for (const auto& l : ds.locations()) {
    io::write_u32(os, l.q);
    for (double c : l.coords) io::write_f64(os, c);
  }
  for (const auto& v : ds.raw()) {
    io::write_f32(os, v.real());
    io::write_f32(os, v.imag());
  }
  if (!os) throw Error("failed writing dataset file: " + path.string());
}

ChannelDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open dataset file: " + path.string());
  io::expect_magic(is, kDatasetMagic);
  const auto version = io::read_u32(is, "version");
  if (version != kDatasetVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version));
  }
  DatasetShape shape;
  shape.T = io::read_u32(is, "T");
  shape.K = io::read_u32(is, "K");
  shape.Q = io::read_u32(is, "Q");
  shape.n_rx = io::read_u32(is, "N_rx");
  shape.n_tx = io::read_u32(is, "N_tx");
  if (shape.T == 0 || shape.K == 0 || shape.Q == 0 || shape.n_rx == 0 || shape.n_tx == 0) {
    throw FormatError("dataset header has zero extents");
  }
  const double carrier = io::read_f64(is, "carrier_hz");
  const double scs = io::read_f64(is, "subcarrier_spacing_hz");
  const auto seed = io::read_u64(is, "seed");

  // Reject truncated payloads before allocating the tensor.
  const auto header_end = is.tellg();
  is.seekg(0, std::ios::end);
  const auto file_end = is.tellg();
  is.seekg(header_end);
  const std::uint64_t expected =
      std::uint64_t{shape.Q} * (4 + 3 * 8) + shape.entry_count() * 2 * sizeof(float);
  const auto available = static_cast<std::uint64_t>(file_end - header_end);
  if (available < expected) {
    throw FormatError("truncated dataset payload: expected " + std::to_string(expected) + " bytes, found " +
                      std::to_string(available));
  }
  if (available > expected) throw FormatError("trailing bytes after dataset payload");

  std::vector<Location> locs(shape.Q);
  for (auto& l : locs) {
    l.q = io::read_u32(is, "location index");
    for (double& c : l.coords) c = io::read_f64(is, "location coordinate");
  }
  std::vector<std::complex<float>> tensor(shape.entry_count());
  for (auto& v : tensor) {
    const float re = io::read_f32(is, "tensor");
    const float im = io::read_f32(is, "tensor");
    v = {re, im};
  }
  try {
    return ChannelDataset(shape, carrier, scs, seed, std::move(locs), std::move(tensor));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid dataset contents: ") + e.what());
  }
}

GridSplit split_grid(const ChannelDataset& ds, double test_ratio) {
  if (!(test_ratio > 0.0 && test_ratio < 1.0)) throw std::invalid_argument("split ratio must lie in (0, 1)");

  // Group locations into rows of equal y.
  std::vector<double> ys;
  for (const auto& l : ds.locations()) ys.push_back(l.y());
  std::sort(ys.begin(), ys.end());
  std::vector<double> rows;
  for (double y : ys) {
    if (rows.empty() || y - rows.back() > 1e-6) rows.push_back(y);
  }
  auto row_of = [&](const Location& l) {
    const auto it = std::lower_bound(rows.begin(), rows.end(), l.y() - 1e-6);
    return static_cast<std::size_t>(it - rows.begin());
  };
  std::vector<std::size_t> row_size(rows.size(), 0);
  for (const auto& l : ds.locations()) ++row_size[row_of(l)];

  const double total = static_cast<double>(ds.Q());
  std::size_t best_stride = 0;
  double best_gap = 0.0;
  for (std::size_t s = 2; s <= 2 * rows.size() + 1; ++s) {
    std::size_t n_test = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i % s == s / 2) n_test += row_size[i];
    }
    const double gap = std::abs(static_cast<double>(n_test) / total - test_ratio);
    if (best_stride == 0 || gap < best_gap - 1e-12) {
      best_stride = s;
      best_gap = gap;
    }
  }

  GridSplit split;
  for (const auto& l : ds.locations()) {
    const std::size_t i = row_of(l);
    (i % best_stride == best_stride / 2 ? split.test : split.train).push_back(l.q);
  }
  if (split.test.empty()) throw std::invalid_argument("split ratio leaves the test set empty");
  if (split.train.empty()) throw std::invalid_argument("split ratio leaves the training set empty");
  return split;
}

ChannelReader::ChannelReader(const ChannelDataset& ds) : ds_(ds) {}

void ChannelReader::set_stage(std::string stage) {
  std::lock_guard lock(mutex_);
  stage_ = std::move(stage);
}

std::string ChannelReader::stage() const {
  std::lock_guard lock(mutex_);
  return stage_;
}

std::vector<CMatrix> ChannelReader::slice(std::uint32_t t, std::uint32_t q) const {
  {
    std::lock_guard lock(mutex_);
    auto it = std::find_if(logs_.begin(), logs_.end(), [&](const StageLog& s) { return s.name == stage_; });
    if (it == logs_.end()) {
      logs_.push_back({stage_, std::vector<bool>(ds_.Q(), false)});
      it = std::prev(logs_.end());
    }
    if (q < ds_.Q()) it->touched[q] = true;
  }
  return ds_.slice(t, q);
}

std::vector<std::uint32_t> ChannelReader::locations_read(std::string_view stage) const {
  std::lock_guard lock(mutex_);
  std::vector<std::uint32_t> out;
  for (const auto& s : logs_) {
    if (s.name != stage) continue;
    for (std::uint32_t q = 0; q < s.touched.size(); ++q) {
      if (s.touched[q]) out.push_back(q);
    }
  }
  return out;
}

std::vector<std::string> ChannelReader::stages() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& s : logs_) out.push_back(s.name);
  return out;
}

}  // namespace fdmimo
