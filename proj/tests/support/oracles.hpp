// SPDX-License-Identifier: Apache-2.0
// Reference implementations used only by tests. They deliberately avoid the
// library's fast paths: plain loops, hand-written elimination, Monte-Carlo.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fdmimo/codebook.hpp"
#include "fdmimo/linkphy.hpp"
#include "fdmimo/types.hpp"

namespace oracle {

using fdmimo::cdouble;
using fdmimo::CMatrix;

inline CMatrix random_channel(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5) * scale);
  CMatrix h(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) h(r, c) = {g(rng), g(rng)};
  }
  return h;
}

inline std::vector<CMatrix> random_slice(std::mt19937_64& rng, int K, int rows, int cols, double scale = 1.0) {
  std::vector<CMatrix> s;
  for (int k = 0; k < K; ++k) s.push_back(random_channel(rng, rows, cols, scale));
  return s;
}

/// Gauss-Jordan with partial pivoting; solves M X = B.
inline CMatrix solve(CMatrix M, CMatrix B) {
  const int n = static_cast<int>(M.rows());
  for (int c = 0; c < n; ++c) {
    int p = c;
    for (int r = c + 1; r < n; ++r) {
      if (std::abs(M(r, c)) > std::abs(M(p, c))) p = r;
    }
    M.row(c).swap(M.row(p));
    B.row(c).swap(B.row(p));
    const cdouble piv = M(c, c);
    for (int j = 0; j < n; ++j) M(c, j) /= piv;
    for (int j = 0; j < B.cols(); ++j) B(c, j) /= piv;
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const cdouble f = M(r, c);
      if (f == cdouble(0.0)) continue;
      for (int j = 0; j < n; ++j) M(r, j) -= f * M(c, j);
      for (int j = 0; j < B.cols(); ++j) B(r, j) -= f * B(c, j);
    }
  }
  return B;
}

inline CMatrix product(const CMatrix& A, const CMatrix& B) {
  CMatrix C = CMatrix::Zero(A.rows(), B.cols());
  for (int i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < B.cols(); ++j) {
      for (int k = 0; k < A.cols(); ++k) C(i, j) += A(i, k) * B(k, j);
    }
  }
  return C;
}

inline CMatrix adjoint(const CMatrix& A) {
  CMatrix B(A.cols(), A.rows());
  for (int i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < A.cols(); ++j) B(j, i) = std::conj(A(i, j));
  }
  return B;
}

inline CMatrix mmse(const CMatrix& H, const CMatrix& W, double noise) {
  const CMatrix A = product(H, W);
  CMatrix M = product(adjoint(A), A);
  for (int i = 0; i < M.rows(); ++i) M(i, i) += noise;
  return solve(M, adjoint(A));
}

inline std::vector<double> layer_sinrs(const CMatrix& H, const CMatrix& W, const CMatrix& E, double noise,
                                       bool squared = true) {
  const CMatrix G = product(product(E, H), W);
  const auto mag = [squared](cdouble z) { return squared ? std::norm(z) : std::abs(z); };
  std::vector<double> out;
  for (int l = 0; l < G.rows(); ++l) {
    double interf = 0.0;
    for (int i = 0; i < G.cols(); ++i) {
      if (i != l) interf += mag(G(l, i));
    }
    double enoise = 0.0;
    for (int i = 0; i < E.cols(); ++i) enoise += mag(E(l, i));
    out.push_back(mag(G(l, l)) / (interf + noise * enoise));
  }
  return out;
}

inline std::vector<double> slice_sinrs(std::span<const CMatrix> slice, const CMatrix& W, double noise) {
  std::vector<double> all;
  for (const auto& H : slice) {
    const auto s = layer_sinrs(H, W, mmse(H, W, noise), noise);
    all.insert(all.end(), s.begin(), s.end());
  }
  return all;
}

inline double sum_mi(std::span<const CMatrix> slice, const CMatrix& W, double noise) {
  double acc = 0.0;
  for (double s : slice_sinrs(slice, W, noise)) acc += std::log2(1.0 + s);
  return acc;
}

/// Brute-force codebook search over full matrices, first strict maximum wins.
inline int best_pmi(std::span<const CMatrix> slice, const fdmimo::Codebook& cb, double noise) {
  int best = -1;
  double best_v = -1.0;
  for (const auto& e : cb.entries()) {
    const double v = sum_mi(slice, e.W, noise);
    if (v > best_v) {
      best_v = v;
      best = e.pmi;
    }
  }
  return best;
}

/// Right singular vectors via the Hermitian eigenproblem of H^H H, sorted by
/// descending eigenvalue.
inline CMatrix right_singular_vectors(const CMatrix& H) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(adjoint(H) * H);
  const int n = static_cast<int>(H.cols());
  CMatrix V(n, n);
  for (int i = 0; i < n; ++i) V.col(i) = es.eigenvectors().col(n - 1 - i);
  return V;
}

struct SvdChoice {
  int k = -1;
  int rank = 0;
};

inline SvdChoice best_svd(std::span<const CMatrix> slice, double noise, int only_rank = 0) {
  SvdChoice best;
  double best_v = -1.0;
  const int max_rank = static_cast<int>(std::min(slice[0].rows(), slice[0].cols()));
  for (int k = 0; k < static_cast<int>(slice.size()); ++k) {
    const CMatrix V = right_singular_vectors(slice[k]);
    for (int L = 1; L <= max_rank; ++L) {
      if (only_rank != 0 && L != only_rank) continue;
      const CMatrix W = V.leftCols(L) / std::sqrt(static_cast<double>(L));
      const double v = sum_mi(slice, W, noise);
      if (v > best_v) {
        best_v = v;
        best = {k, L};
      }
    }
  }
  return best;
}

/// Gray-labelled square QAM with unit average energy.
struct Qam {
  std::vector<cdouble> points;
  std::vector<unsigned> labels;
  int bits = 0;
};

inline Qam square_qam(int m) {
  Qam q;
  q.bits = m;
  const int side = 1 << (m / 2);
  const double norm = std::sqrt(2.0 * (side * side - 1.0) / 3.0);
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      const unsigned gi = static_cast<unsigned>(i ^ (i >> 1));
      const unsigned gj = static_cast<unsigned>(j ^ (j >> 1));
      q.points.emplace_back((2.0 * i - side + 1) / norm, (2.0 * j - side + 1) / norm);
      q.labels.push_back((gi << (m / 2)) | gj);
    }
  }
  return q;
}

/// Monte-Carlo BICM capacity: m - sum_b E[log2(sum_x p(y|x) / sum_{x: bit b = c} p(y|x))].
inline double mc_bicm(double sinr, int m, int draws, std::uint64_t seed) {
  const Qam q = square_qam(m);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, q.points.size() - 1);
  const double n0 = 1.0 / sinr;
  std::normal_distribution<double> g(0.0, std::sqrt(0.5 * n0));
  std::vector<double> lik(q.points.size());
  double loss = 0.0;
  for (int d = 0; d < draws; ++d) {
    const std::size_t s = pick(rng);
    const cdouble y = q.points[s] + cdouble(g(rng), g(rng));
    double dmin = 1e300;
    for (std::size_t i = 0; i < q.points.size(); ++i) dmin = std::min(dmin, std::norm(y - q.points[i]));
    double total = 0.0;
    for (std::size_t i = 0; i < q.points.size(); ++i) {
      lik[i] = std::exp(-(std::norm(y - q.points[i]) - dmin) / n0);
      total += lik[i];
    }
    for (int b = 0; b < m; ++b) {
      const unsigned bit = (q.labels[s] >> b) & 1U;
      double same = 0.0;
      for (std::size_t i = 0; i < q.points.size(); ++i) {
        if (((q.labels[i] >> b) & 1U) == bit) same += lik[i];
      }
      loss += std::log2(total / same);
    }
  }
  return m - loss / draws;
}

}  // namespace oracle
