// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "fdmimo/types.hpp"

namespace fdmimo {

/// Geometry and propagation parameters of the synthetic multipath scene.
///
/// The scene is a rectangular training lattice of `rows` x `cols` user
/// locations in front of a single base station. When `interleaved_test_grid`
/// is set, a second lattice of (rows/2) x (cols/2) locations is placed midway
/// between training rows 2i/2i+1 and training columns 2j/2j+1.
///
/// The base-station array is a dual-polarized uniform planar array with
/// `n1` horizontal and `n2` vertical ports per polarization (n_tx = 2*n1*n2),
/// the user has an `n_rx` element single-polarized linear array.
struct SceneConfig {
  int rows = 20;
  int cols = 12;
  double spacing_m = 3.0;
  double first_row_y_m = 15.0;
  double first_col_x_m = -16.5;
  bool interleaved_test_grid = true;

  std::array<double, 3> bs_position{0.0, 0.0, 6.0};
  double ue_height_m = 2.0;

  int n1 = 8;
  int n2 = 1;
  int n_rx = 4;

  int num_paths = 6;  // one line-of-sight-like path plus num_paths-1 scatterers
  int rays_per_path = 8;  // unresolvable sub-rays per scattered path
  double cluster_radius_m = 10.0;
  double k_factor_db = 0.0;
  double jitter = 0.5;  // std-dev of the per-sample NLoS phase jitter, in units of pi
  double pathloss_exponent = 3.0;
  double reference_distance_m = 1.0;
  double noise_variance = 1e-6;

  double carrier_hz = 3.5e9;
  double subcarrier_spacing_hz = 15e3;

  int n_tx() const { return 2 * n1 * n2; }
  void validate() const;
};

struct DatasetShape {
  std::uint32_t T = 0;
  std::uint32_t K = 0;
  std::uint32_t Q = 0;
  std::uint32_t n_rx = 0;
  std::uint32_t n_tx = 0;

  std::uint64_t matrix_count() const { return std::uint64_t{T} * K * Q; }
  std::uint64_t entry_count() const { return matrix_count() * n_rx * n_tx; }
};

/// Immutable channel tensor H[t][k][q] plus grid geometry.
///
/// Entries are stored as complex<float>, which is also the on-disk precision,
/// so save/load round trips are bit exact. Location q is the q-th record.
class ChannelDataset {
 public:
  ChannelDataset(DatasetShape shape, double carrier_hz, double subcarrier_spacing_hz,
                 std::uint64_t seed, std::vector<Location> locations,
                 std::vector<std::complex<float>> tensor);

  const DatasetShape& shape() const { return shape_; }
  std::uint32_t T() const { return shape_.T; }
  std::uint32_t K() const { return shape_.K; }
  std::uint32_t Q() const { return shape_.Q; }
  std::uint32_t n_rx() const { return shape_.n_rx; }
  std::uint32_t n_tx() const { return shape_.n_tx; }
  double carrier_hz() const { return carrier_hz_; }
  double subcarrier_spacing_hz() const { return subcarrier_spacing_hz_; }
  std::uint64_t seed() const { return seed_; }

  const std::vector<Location>& locations() const { return locations_; }
  const Location& location(std::uint32_t q) const { return locations_.at(q); }
  const std::vector<std::complex<float>>& raw() const { return tensor_; }

  CMatrix matrix(std::uint32_t t, std::uint32_t k, std::uint32_t q) const;
  /// All K subcarrier matrices of one (t, q) pair.
  std::vector<CMatrix> slice(std::uint32_t t, std::uint32_t q) const;

 private:
  std::size_t offset(std::uint32_t t, std::uint32_t k, std::uint32_t q) const;

  DatasetShape shape_;
  double carrier_hz_;
  double subcarrier_spacing_hz_;
  std::uint64_t seed_;
  std::vector<Location> locations_;
  std::vector<std::complex<float>> tensor_;
};

/// Location records produced by the scene lattice, training lattice first.
std::vector<Location> scene_locations(const SceneConfig& config);

/// Deterministic synthetic multipath channel for (config, seed). Q is taken
/// from the scene lattice. Parallel generation partitions by location with
/// per-location derived seeds, so the result does not depend on `workers`.
ChannelDataset generate_dataset(const SceneConfig& config, std::uint64_t seed, std::uint32_t T,
                                std::uint32_t K, int workers = 1);

inline constexpr std::string_view kDatasetMagic = "FDMIMO01";
inline constexpr std::uint32_t kDatasetVersion = 1;

void save_dataset(const ChannelDataset& ds, const std::filesystem::path& path);
ChannelDataset load_dataset(const std::filesystem::path& path);

struct GridSplit {
  std::vector<std::uint32_t> train;
  std::vector<std::uint32_t> test;
};

/// Row-interleaved train/test split.
///
/// Rows are the distinct y coordinates in ascending order. For a stride s >= 2
/// the test rows are those with row index i where i % s == s / 2; the stride
/// whose location-level test fraction is closest to `test_ratio` wins
/// (smaller stride on ties). A toy grid with alternating rows and ratio 0.5
/// gives rows {1, 3, ...} as test; the interleaved scene lattice with ratio
/// 0.2 gives exactly the interleaved test lattice.
GridSplit split_grid(const ChannelDataset& ds, double test_ratio);

/// Wrapper through which pipelines read channel matrices. Every read is
/// recorded against the current stage label so tests can prove which
/// locations each stage touched.
class ChannelReader {
 public:
  explicit ChannelReader(const ChannelDataset& ds);

  const ChannelDataset& dataset() const { return ds_; }

  void set_stage(std::string stage);
  std::string stage() const;

  std::vector<CMatrix> slice(std::uint32_t t, std::uint32_t q) const;

  /// Sorted location indices read while `stage` was active.
  std::vector<std::uint32_t> locations_read(std::string_view stage) const;
  std::vector<std::string> stages() const;

 private:
  struct StageLog {
    std::string name;
    std::vector<bool> touched;
  };

  const ChannelDataset& ds_;
  mutable std::mutex mutex_;
  std::string stage_ = "default";
  mutable std::vector<StageLog> logs_;
};

}  // namespace fdmimo
