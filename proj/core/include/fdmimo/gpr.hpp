// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include <Eigen/Cholesky>

#include "fdmimo/types.hpp"

namespace fdmimo {

/// gamma^2 * exp(-|a - b|^2 / (2 zeta^2)).
double rbf_kernel(const RVector& a, const RVector& b, double gamma, double zeta);

/// Kernel matrix between the rows of A and the rows of B.
RMatrix kernel_matrix(const RMatrix& A, const RMatrix& B, double gamma, double zeta);

struct GPRConfig {
  double jitter_rel = 1e-8;   // jitter variance as a fraction of gamma^2
  double zeta_min = 0.0;      // 0 selects a quarter of the smallest pairwise distance
  double zeta_max = 0.0;      // 0 selects ten times the largest pairwise distance
  int grid_points = 48;
  int refine_iterations = 60;

  void validate() const;
};

/// Zero-mean GP with a single RBF kernel shared by all output columns.
struct GPRModel {
  int rank = 0;
  double gamma = 1.0;
  double zeta = 1.0;
  double jitter = 0.0;  // absolute jitter variance added to the diagonal
  RMatrix inputs;       // N x input_dim
  RMatrix outputs;      // N x output_dim
  RMatrix weights;      // (K + jitter I)^-1 outputs
  double log_likelihood = 0.0;
};

/// Sum over output columns of log N(y_d; 0, K + jitter I).
double gpr_log_likelihood(const RMatrix& X, const RMatrix& Y, double gamma, double zeta, double jitter);

/// Model at fixed hyperparameters. Throws NumericalError when the jittered
/// kernel is not positive definite.
GPRModel gpr_fit_fixed(const RMatrix& X, const RMatrix& Y, double gamma, double zeta, double jitter);

/// Maximum-likelihood fit. gamma^2 is profiled out in closed form for each
/// zeta; zeta is found by a log-grid search refined by golden section.
/// Needs at least two distinct input rows.
GPRModel gpr_fit(const RMatrix& X, const RMatrix& Y, const GPRConfig& cfg = {});

/// Posterior mean at the rows of Xq (M x output_dim).
RMatrix gpr_predict(const GPRModel& model, const RMatrix& Xq);

/// Binary file: magic "FDGPR001", u32 rank, N, input_dim, output_dim, f64
/// gamma, zeta, jitter, then inputs and outputs as column-major f64.
void save_gpr(const GPRModel& model, const std::filesystem::path& path);
GPRModel load_gpr(const std::filesystem::path& path);

}  // namespace fdmimo
