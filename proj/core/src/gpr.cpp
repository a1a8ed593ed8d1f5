// SPDX-License-Identifier: Apache-2.0
#include "fdmimo/gpr.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "fdmimo/binary_io.hpp"

namespace fdmimo {

double rbf_kernel(const RVector& a, const RVector& b, double gamma, double zeta) {
  if (!(gamma > 0.0) || !(zeta > 0.0)) throw std::invalid_argument("kernel hyperparameters must be positive");
  if (a.size() != b.size()) throw std::invalid_argument("kernel input dimension mismatch");
  return gamma * gamma * std::exp(-(a - b).squaredNorm() / (2.0 * zeta * zeta));
}

RMatrix kernel_matrix(const RMatrix& A, const RMatrix& B, double gamma, double zeta) {
  if (!(gamma > 0.0) || !(zeta > 0.0)) throw std::invalid_argument("kernel hyperparameters must be positive");
  if (A.cols() != B.cols()) throw std::invalid_argument("kernel input dimension mismatch");
  RMatrix K(A.rows(), B.rows());
  const double g2 = gamma * gamma;
  const double inv = 1.0 / (2.0 * zeta * zeta);
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) K(i, j) = g2 * std::exp(-(A.row(i) - B.row(j)).squaredNorm() * inv);
  }
  return K;
}

void GPRConfig::validate() const {
  if (!(jitter_rel > 0.0)) throw std::invalid_argument("relative jitter must be positive");
  if (zeta_min < 0.0 || zeta_max < 0.0) throw std::invalid_argument("length-scale bounds must be non-negative");
  if (zeta_min > 0.0 && zeta_max > 0.0 && zeta_max <= zeta_min) {
    throw std::invalid_argument("zeta_max must exceed zeta_min");
  }
  if (grid_points < 3) throw std::invalid_argument("need at least three grid points");
  if (refine_iterations < 0) throw std::invalid_argument("refine iterations must be non-negative");
}

namespace {

void check_data(const RMatrix& X, const RMatrix& Y) {
  if (X.rows() != Y.rows()) throw std::invalid_argument("inputs and outputs differ in row count");
  if (X.rows() < 1 || X.cols() < 1 || Y.cols() < 1) throw std::invalid_argument("empty GPR data");
  if (!X.allFinite() || !Y.allFinite()) throw std::invalid_argument("non-finite GPR data");
}

void check_distinct(const RMatrix& X) {
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < X.rows(); ++j) {
      if ((X.row(i) - X.row(j)).squaredNorm() == 0.0) throw std::invalid_argument("duplicate GPR input location");
    }
  }
}

Eigen::LLT<RMatrix> factor(const RMatrix& X, double gamma, double zeta, double jitter) {
  RMatrix K = kernel_matrix(X, X, gamma, zeta);
  K.diagonal().array() += jitter;
  Eigen::LLT<RMatrix> llt(K);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("kernel matrix is not positive definite; increase the jitter");
  }
  return llt;
}

double log_det(const Eigen::LLT<RMatrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Log-likelihood at zeta with gamma^2 maximized in closed form.
double profiled(const RMatrix& X, const RMatrix& Y, double zeta, double jitter_rel, double* gamma2_out) {
  const double n = static_cast<double>(X.rows());
  const double d = static_cast<double>(Y.cols());
  Eigen::LLT<RMatrix> llt;
  try {
    llt = factor(X, 1.0, zeta, jitter_rel);
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  }
  const double quad = (Y.array() * llt.solve(Y).array()).sum();
  const double g2 = std::max(quad / (n * d), std::numeric_limits<double>::min());
  if (gamma2_out) *gamma2_out = g2;
  return -0.5 * n * d * (1.0 + std::log(g2) + std::log(2.0 * std::numbers::pi)) - 0.5 * d * log_det(llt);
}

}  // namespace

double gpr_log_likelihood(const RMatrix& X, const RMatrix& Y, double gamma, double zeta, double jitter) {
  check_data(X, Y);
  const auto llt = factor(X, gamma, zeta, jitter);
  const double n = static_cast<double>(X.rows());
  const double d = static_cast<double>(Y.cols());
  const double quad = (Y.array() * llt.solve(Y).array()).sum();
  return -0.5 * quad - 0.5 * d * log_det(llt) - 0.5 * n * d * std::log(2.0 * std::numbers::pi);
}

GPRModel gpr_fit_fixed(const RMatrix& X, const RMatrix& Y, double gamma, double zeta, double jitter) {
  check_data(X, Y);
  if (!(jitter >= 0.0)) throw std::invalid_argument("jitter must be non-negative");
  const auto llt = factor(X, gamma, zeta, jitter);
  GPRModel m;
  m.gamma = gamma;
  m.zeta = zeta;
  m.jitter = jitter;
  m.inputs = X;
  m.outputs = Y;
  m.weights = llt.solve(Y);
  const double n = static_cast<double>(X.rows());
  const double d = static_cast<double>(Y.cols());
  m.log_likelihood = -0.5 * (Y.array() * m.weights.array()).sum() - 0.5 * d * log_det(llt) -
                     0.5 * n * d * std::log(2.0 * std::numbers::pi);
  return m;
}

GPRModel gpr_fit(const RMatrix& X, const RMatrix& Y, const GPRConfig& cfg) {
  cfg.validate();
  check_data(X, Y);
  if (X.rows() < 2) throw std::invalid_argument("GPR fit needs at least two points");
  check_distinct(X);

  double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < X.rows(); ++j) {
      const double dist = (X.row(i) - X.row(j)).norm();
      dmin = std::min(dmin, dist);
      dmax = std::max(dmax, dist);
    }
  }
  const double lo = std::log(cfg.zeta_min > 0.0 ? cfg.zeta_min : 0.25 * dmin);
  const double hi = std::log(cfg.zeta_max > 0.0 ? cfg.zeta_max : 10.0 * dmax);

  auto objective = [&](double log_zeta) { return profiled(X, Y, std::exp(log_zeta), cfg.jitter_rel, nullptr); };

  const int n = cfg.grid_points;
  const double step = (hi - lo) / (n - 1);
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double v = objective(lo + i * step);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  if (!std::isfinite(best_val)) throw NumericalError("GPR likelihood is not finite anywhere on the grid");

  // Golden-section refinement inside the neighbouring grid cells.
  double a = lo + std::max(best - 1, 0) * step;
  double b = lo + std::min(best + 1, n - 1) * step;
  double best_x = lo + best * step;
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = objective(c), fd = objective(d);
  for (int it = 0; it < cfg.refine_iterations; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = objective(d);
    }
  }
  const double x_ref = fc >= fd ? c : d;
  if (std::max(fc, fd) > best_val) best_x = x_ref;

  const double zeta = std::exp(best_x);
  double g2 = 1.0;
  profiled(X, Y, zeta, cfg.jitter_rel, &g2);
  return gpr_fit_fixed(X, Y, std::sqrt(g2), zeta, cfg.jitter_rel * g2);
}

RMatrix gpr_predict(const GPRModel& model, const RMatrix& Xq) {
  if (Xq.cols() != model.inputs.cols()) throw std::invalid_argument("query dimension mismatch");
  if (model.weights.rows() != model.inputs.rows()) throw std::invalid_argument("GPR model is not fitted");
  return kernel_matrix(Xq, model.inputs, model.gamma, model.zeta) * model.weights;
}

namespace {
constexpr std::string_view kGprMagic = "FDGPR001";
}

void save_gpr(const GPRModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open GPR file for writing: " + path.string());
  io::write_magic(os, kGprMagic);
  io::write_u32(os, static_cast<std::uint32_t>(model.rank));
  io::write_u32(os, static_cast<std::uint32_t>(model.inputs.rows()));
  io::write_u32(os, static_cast<std::uint32_t>(model.inputs.cols()));
  io::write_u32(os, static_cast<std::uint32_t>(model.outputs.cols()));
  io::write_f64(os, model.gamma);
  io::write_f64(os, model.zeta);
  io::write_f64(os, model.jitter);
  for (Eigen::Index i = 0; i < model.inputs.size(); ++i) io::write_f64(os, model.inputs.data()[i]);
  for (Eigen::Index i = 0; i < model.outputs.size(); ++i) io::write_f64(os, model.outputs.data()[i]);
  if (!os) throw Error("failed writing GPR file: " + path.string());
}

GPRModel load_gpr(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open GPR file: " + path.string());
  io::expect_magic(is, kGprMagic);
  const int rank = static_cast<int>(io::read_u32(is, "rank"));
  const auto n = io::read_u32(is, "N");
  const auto din = io::read_u32(is, "input_dim");
  const auto dout = io::read_u32(is, "output_dim");
  if (n == 0 || din == 0 || dout == 0) throw FormatError("empty GPR model");
  const double gamma = io::read_f64(is, "gamma");
  const double zeta = io::read_f64(is, "zeta");
  const double jitter = io::read_f64(is, "jitter");
  RMatrix X(n, din), Y(n, dout);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = io::read_f64(is, "inputs");
  for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = io::read_f64(is, "outputs");
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in GPR file");
  GPRModel m = gpr_fit_fixed(X, Y, gamma, zeta, jitter);
  m.rank = rank;
  return m;
}

}  // namespace fdmimo
