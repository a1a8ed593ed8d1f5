// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "fdmimo/channel.hpp"

using namespace fdmimo;
namespace fs = std::filesystem;

namespace {

SceneConfig small_scene() {
  SceneConfig s;
  s.rows = 4;
  s.cols = 4;
  return s;
}

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "fdmimo_test_channel";
  fs::create_directories(dir);
  return dir / name;
}

ChannelDataset toy_rows(int rows, int cols) {
  std::vector<Location> locs;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Location l;
      l.q = static_cast<std::uint32_t>(locs.size());
      l.coords = {1.0 * c, 10.0 + 2.0 * r, 2.0};
      locs.push_back(l);
    }
  }
  DatasetShape shape{1, 1, static_cast<std::uint32_t>(locs.size()), 1, 2};
  std::vector<std::complex<float>> tensor(shape.entry_count(), {1.0f, 0.0f});
  return ChannelDataset(shape, 3.5e9, 15e3, 0, std::move(locs), std::move(tensor));
}

double correlation(const CMatrix& a, const CMatrix& b) {
  const cdouble ip = (a.array().conjugate() * b.array()).sum();
  return std::abs(ip) / (a.norm() * b.norm());
}

}  // namespace

TEST(Channel, PaperScaleShapeArithmetic) {
  const DatasetShape shape{100, 72, 3780, 4, 16};
  EXPECT_EQ(shape.matrix_count(), 27'216'000u);
}

TEST(Channel, GeneratesDeclaredShape) {
  const auto scene = small_scene();
  const auto ds = generate_dataset(scene, 3, 5, 6);
  EXPECT_EQ(ds.T(), 5u);
  EXPECT_EQ(ds.K(), 6u);
  EXPECT_EQ(ds.Q(), 16u + 4u);
  EXPECT_EQ(ds.n_rx(), 4u);
  EXPECT_EQ(ds.n_tx(), 16u);
  EXPECT_EQ(ds.raw().size(), ds.shape().entry_count());
  const auto H = ds.matrix(4, 5, 19);
  EXPECT_EQ(H.rows(), 4);
  EXPECT_EQ(H.cols(), 16);
}

TEST(Channel, SinglePathWithoutJitterIsStatic) {
  auto scene = small_scene();
  scene.num_paths = 1;
  scene.jitter = 0.0;
  const auto ds = generate_dataset(scene, 11, 6, 3);
  for (std::uint32_t q = 0; q < ds.Q(); ++q) {
    for (std::uint32_t k = 0; k < ds.K(); ++k) {
      const auto ref = ds.matrix(0, k, q);
      for (std::uint32_t t = 1; t < ds.T(); ++t) EXPECT_EQ((ds.matrix(t, k, q) - ref).norm(), 0.0);
    }
  }
}

TEST(Channel, DeterministicAndWorkerIndependent) {
  const auto scene = small_scene();
  const auto a = generate_dataset(scene, 9, 4, 3, 1);
  const auto b = generate_dataset(scene, 9, 4, 3, 4);
  EXPECT_EQ(a.raw(), b.raw());
  const auto c = generate_dataset(scene, 10, 4, 3, 1);
  EXPECT_NE(a.raw(), c.raw());
}

TEST(Channel, AllEntriesFinite) {
  const auto ds = generate_dataset(small_scene(), 5, 6, 4);
  for (const auto& v : ds.raw()) {
    ASSERT_TRUE(std::isfinite(v.real()) && std::isfinite(v.imag()));
  }
}

TEST(Channel, TimeVariationPresentWithJitter) {
  const auto ds = generate_dataset(small_scene(), 5, 4, 2);
  EXPECT_GT((ds.matrix(0, 0, 3) - ds.matrix(1, 0, 3)).norm(), 0.0);
}

TEST(Channel, AdjacentLocationsCorrelateMoreThanDistantOnes) {
  SceneConfig scene;  // default desk-scale lattice
  scene.interleaved_test_grid = false;
  const auto ds = generate_dataset(scene, 21, 2, 2, 4);
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> row(0, scene.rows - 1), col(0, scene.cols - 1);
  auto q_of = [&](int r, int c) { return static_cast<std::uint32_t>(r * scene.cols + c); };
  double near = 0.0, far = 0.0;
  int n_near = 0, n_far = 0;
  while (n_near < 200 || n_far < 200) {
    const int r1 = row(rng), c1 = col(rng), r2 = row(rng), c2 = col(rng);
    const int steps = std::abs(r1 - r2) + std::abs(c1 - c2);
    const double rho = correlation(ds.matrix(0, 0, q_of(r1, c1)), ds.matrix(0, 0, q_of(r2, c2)));
    if (steps >= 10 && n_far < 200) {
      far += rho;
      ++n_far;
    }
    if (r1 + 1 < scene.rows && n_near < 200) {
      near += correlation(ds.matrix(0, 0, q_of(r1, c1)), ds.matrix(0, 0, q_of(r1 + 1, c1)));
      ++n_near;
    }
  }
  EXPECT_GT(near / n_near, far / n_far);
}

TEST(Channel, SaveLoadRoundTripIsBitExact) {
  const auto ds = generate_dataset(small_scene(), 2, 3, 2);
  const auto path = temp_file("roundtrip.bin");
  save_dataset(ds, path);
  const auto back = load_dataset(path);
  EXPECT_EQ(back.shape().T, ds.T());
  EXPECT_EQ(back.Q(), ds.Q());
  EXPECT_EQ(back.seed(), ds.seed());
  EXPECT_EQ(back.carrier_hz(), ds.carrier_hz());
  EXPECT_EQ(back.raw(), ds.raw());
  for (std::uint32_t q = 0; q < ds.Q(); ++q) EXPECT_EQ(back.location(q).coords, ds.location(q).coords);
}

TEST(Channel, WrongMagicIsFormatError) {
  const auto ds = generate_dataset(small_scene(), 2, 1, 1);
  const auto path = temp_file("magic.bin");
  save_dataset(ds, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXXXXXX", 8);
  }
  EXPECT_THROW(load_dataset(path), FormatError);
}

TEST(Channel, VersionMismatchIsFormatError) {
  const auto ds = generate_dataset(small_scene(), 2, 1, 1);
  const auto path = temp_file("version.bin");
  save_dataset(ds, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const std::uint32_t bad = 99;
    f.write(reinterpret_cast<const char*>(&bad), 4);
  }
  EXPECT_THROW(load_dataset(path), FormatError);
}

TEST(Channel, TruncatedPayloadIsFormatError) {
  // header (T, K, Q) = (2, 3, 4) with the payload of 23 matrices
  std::vector<Location> locs(4);
  for (std::uint32_t q = 0; q < 4; ++q) {
    locs[q].q = q;
    locs[q].coords = {1.0 * q, 0.0, 0.0};
  }
  const DatasetShape shape{2, 3, 4, 2, 2};
  ChannelDataset ds(shape, 3.5e9, 15e3, 1, locs, std::vector<std::complex<float>>(shape.entry_count()));
  const auto path = temp_file("truncated.bin");
  save_dataset(ds, path);
  const auto matrix_bytes = std::uintmax_t{2} * 2 * 8;
  fs::resize_file(path, fs::file_size(path) - matrix_bytes);
  EXPECT_THROW(load_dataset(path), FormatError);
}

TEST(Channel, ConstructorRejectsInconsistentData) {
  std::vector<Location> locs(1);
  const DatasetShape shape{1, 1, 1, 1, 1};
  EXPECT_THROW(ChannelDataset(shape, 1, 1, 0, locs, {}), std::invalid_argument);
  EXPECT_THROW(ChannelDataset(DatasetShape{0, 1, 1, 1, 1}, 1, 1, 0, locs, {}), std::invalid_argument);
}

TEST(Channel, SceneValidation) {
  auto s = small_scene();
  s.num_paths = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = small_scene();
  s.spacing_m = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_THROW(generate_dataset(small_scene(), 1, 0, 1), std::invalid_argument);
}

TEST(Split, FourRowToyAlternates) {
  const auto ds = toy_rows(4, 3);
  const auto split = split_grid(ds, 0.5);
  std::set<double> train_rows, test_rows;
  for (auto q : split.train) train_rows.insert(ds.location(q).y());
  for (auto q : split.test) test_rows.insert(ds.location(q).y());
  EXPECT_EQ(train_rows, (std::set<double>{10.0, 14.0}));
  EXPECT_EQ(test_rows, (std::set<double>{12.0, 16.0}));
}

TEST(Split, SceneLatticeSplitsIntoInterleavedGrid) {
  SceneConfig scene;
  const auto locs = scene_locations(scene);
  const DatasetShape shape{1, 1, static_cast<std::uint32_t>(locs.size()), 1, 1};
  ChannelDataset ds(shape, 1, 1, 0, locs, std::vector<std::complex<float>>(shape.entry_count()));
  const auto split = split_grid(ds, 0.2);
  EXPECT_EQ(split.train.size(), 240u);
  EXPECT_EQ(split.test.size(), 60u);
  for (std::size_t i = 0; i < split.train.size(); ++i) EXPECT_EQ(split.train[i], i);
}

TEST(Split, DisjointAndCovering) {
  const auto ds = toy_rows(9, 2);
  const auto split = split_grid(ds, 0.3);
  std::set<std::uint32_t> all(split.train.begin(), split.train.end());
  for (auto q : split.test) EXPECT_TRUE(all.insert(q).second);
  EXPECT_EQ(all.size(), ds.Q());
}

TEST(Split, Errors) {
  const auto ds = toy_rows(4, 2);
  EXPECT_THROW(split_grid(ds, 0.0), std::invalid_argument);
  EXPECT_THROW(split_grid(ds, 1.0), std::invalid_argument);
  EXPECT_THROW(split_grid(toy_rows(1, 5), 0.2), std::invalid_argument);
}

TEST(Reader, LogsLocationsPerStage) {
  const auto ds = generate_dataset(small_scene(), 2, 2, 1);
  ChannelReader reader(ds);
  reader.set_stage("fixing");
  reader.slice(0, 3);
  reader.slice(1, 1);
  reader.set_stage("evaluation");
  reader.slice(0, 7);
  EXPECT_EQ(reader.locations_read("fixing"), (std::vector<std::uint32_t>{1, 3}));
  EXPECT_EQ(reader.locations_read("evaluation"), (std::vector<std::uint32_t>{7}));
  EXPECT_TRUE(reader.locations_read("other").empty());
  const auto s = reader.slice(1, 3);
  EXPECT_EQ(s.size(), ds.K());
  EXPECT_EQ((s[0] - ds.matrix(1, 0, 3)).norm(), 0.0);
}
