// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fdmimo {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// Small complex matrices used in the per-subcarrier link computations. The
// fixed upper bound keeps them on the stack.
inline constexpr int kMaxLayers = 8;
inline constexpr int kMaxRx = 8;
using SmallCMatrix = Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxLayers, kMaxLayers>;
using SmallCVector = Eigen::Matrix<cdouble, Eigen::Dynamic, 1, 0, kMaxLayers, 1>;
using SmallRVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxLayers, 1>;

inline constexpr int kMinCqi = 1;
inline constexpr int kMaxCqi = 15;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed, truncated or mismatched file contents.
struct FormatError : Error {
  using Error::Error;
};

/// A numerical routine could not produce a finite or well-conditioned result.
struct NumericalError : Error {
  using Error::Error;
};

struct Location {
  std::uint32_t q = 0;
  std::array<double, 3> coords{0.0, 0.0, 0.0};

  double x() const { return coords[0]; }
  double y() const { return coords[1]; }
  double z() const { return coords[2]; }
};

/// Seed derivation for independent per-location and per-stage streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double squared_distance(const Location& a, const Location& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = a.coords[i] - b.coords[i];
    s += d * d;
  }
  return s;
}

}  // namespace fdmimo
