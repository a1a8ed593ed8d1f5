// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "fdmimo/params.hpp"
#include "fdmimo/types.hpp"

namespace fdmimo {

struct CqiEntry {
  int cqi = 1;
  int modulation_order = 2;  // bits per symbol: 2, 4 or 6
  double efficiency = 0.0;   // information bits per resource element and layer
};

/// CQI index 1..15 -> (modulation order, spectral efficiency).
class CqiTable {
 public:
  /// 64QAM table used by 5G NR for CSI reporting.
  static CqiTable standard();
  /// CSV with header `cqi,modulation_order,efficiency`, 15 rows.
  static CqiTable load_csv(const std::filesystem::path& path);

  explicit CqiTable(std::vector<CqiEntry> entries);

  const CqiEntry& at(int cqi) const;
  const std::vector<CqiEntry>& entries() const { return entries_; }

 private:
  std::vector<CqiEntry> entries_;
};

/// How inter-layer interference and noise enter the per-layer SINR.
/// Squared uses power ratios; Literal keeps unsquared magnitudes.
enum class SinrForm { Squared, Literal };

struct LinkConfig {
  double noise_variance = 1e-6;
  double alpha = 1.0;          // MIESM adjustment factor
  double bler_slope = 2.0;     // logistic slope per dB
  double snr_gap_db = 2.0;     // gap added to the Shannon threshold
  double bler_target = 0.1;
  int n_re = 72 * 12;          // resource elements per TTI
  SinrForm sinr_form = SinrForm::Squared;
  CqiTable cqi_table = CqiTable::standard();

  void validate() const;
};

/// E = (W^H H^H H W + noise I)^-1 W^H H^H, shape L x N_rx.
CMatrix mmse_equalizer(const CMatrix& H, const CMatrix& W, double noise_variance);

/// Per-layer post-equalization SINR from G = E H W. The noise term sums
/// |E(l, i)|^2 over every receive antenna i.
RVector sinr_per_layer(const CMatrix& H, const CMatrix& W, const CMatrix& E, double noise_variance,
                       SinrForm form = SinrForm::Squared);

/// Fused MMSE + SINR for an effective channel A = H W (N_rx x L) on the stack.
/// Writes L values into `out`.
void mmse_layer_sinrs(const SmallCMatrix& A, double noise_variance, SinrForm form, double* out);

/// Squared-form MMSE SINRs of an effective channel with L fixed columns via
/// SINR_l = 1 / (noise * [M^-1]_ll) - 1 with M = A^H A + noise I, which is
/// algebraically identical to the term-by-term form.
template <int L, typename AMat>
void mmse_sinrs_fixed(const AMat& A, double noise_variance, double* out) {
  Eigen::Matrix<cdouble, L, L> M = A.adjoint() * A;
  M.diagonal().array() += noise_variance;
  const Eigen::Matrix<cdouble, L, L> inv = M.inverse();
  for (int l = 0; l < L; ++l) {
    const double s = 1.0 / (noise_variance * inv(l, l).real()) - 1.0;
    out[l] = s > 0.0 ? s : 0.0;
  }
}

/// BICM capacity of Gray-mapped square QAM with 2^m points, in bits per
/// symbol. Backed by a table built once by Gauss-Hermite quadrature.
double bicm_capacity(double sinr, int modulation_order);
/// Inverse of bicm_capacity over (0, m); values at or above the saturation
/// level map to the top of the table.
double bicm_capacity_inverse(double bits, int modulation_order);

/// alpha * f^-1(mean_i f(sinr_i / alpha)) with f = bicm_capacity for m.
double effective_sinr(std::span<const double> sinrs, double alpha, int modulation_order);

double linear_to_db(double x);
double db_to_linear(double db);

/// 10 log10(2^eta - 1) + gap: the SINR (dB) at which BLER is 0.5.
double cqi_threshold_db(int cqi, const LinkConfig& cfg);
double bler(double effective_sinr, int cqi, const LinkConfig& cfg);

/// Largest CQI whose BLER at this effective SINR is within target; 1 if none.
int cqi_from_sinr(double effective_sinr, const LinkConfig& cfg);

/// CQI for a set of per-layer per-subcarrier SINRs: each CQI level compresses
/// the SINRs with its own modulation order before the BLER check.
int select_cqi(std::span<const double> sinrs, const LinkConfig& cfg);

/// Per-layer per-subcarrier SINRs (k-major) of precoder W over a K-slice.
std::vector<double> slice_sinrs(std::span<const CMatrix> slice, const CMatrix& W, const LinkConfig& cfg);

/// select_cqi over the slice SINRs of precoder W.
int cqi_for_precoder(std::span<const CMatrix> slice, const CMatrix& W, const LinkConfig& cfg);

/// N_RE * eta(CQI) * L * (1 - BLER(SINR_eff(W), CQI)), in bits per TTI.
double throughput(std::span<const CMatrix> slice, const TransmissionParams& params, const LinkConfig& cfg);

}  // namespace fdmimo
