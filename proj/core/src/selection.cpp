// SPDX-License-Identifier: Apache-2.0
#include "fdmimo/selection.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include <Eigen/SVD>

namespace fdmimo {

namespace {

void check_slice(std::span<const CMatrix> slice) {
  if (slice.empty()) throw std::invalid_argument("empty channel slice");
  const auto rows = slice[0].rows();
  const auto cols = slice[0].cols();
  if (rows < 1 || rows > kMaxRx) throw std::invalid_argument("unsupported receive antenna count");
  for (const auto& H : slice) {
    if (H.rows() != rows || H.cols() != cols) throw std::invalid_argument("inconsistent channel slice shapes");
  }
}

double sum_log2(const double* s, Eigen::Index n) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += std::log2(1.0 + s[i]);
  return acc;
}

void canonicalize_phases(CMatrix& U, CMatrix& V, Eigen::Index paired) {
  for (Eigen::Index i = 0; i < V.cols(); ++i) {
    const cdouble lead = V(0, i);
    const double mag = std::abs(lead);
    if (mag == 0.0) continue;
    const cdouble rot = std::conj(lead / mag);
    V.col(i) *= rot;
    if (i < paired && i < U.cols()) U.col(i) *= rot;
    V(0, i) = cdouble(std::abs(V(0, i)), 0.0);
  }
}

template <int L>
double entry_sum_mi(const CodebookEntry& e, const std::vector<CMatrix>& ha, const std::vector<CMatrix>& hb,
                    Eigen::Index nrx, double noise) {
  Eigen::Matrix<cdouble, Eigen::Dynamic, L, 0, kMaxRx, L> A(nrx, L);
  double sinr[L];
  double acc = 0.0;
  for (std::size_t k = 0; k < ha.size(); ++k) {
    for (int c = 0; c < L; ++c) {
      const auto& col = e.columns[c];
      A.col(c) = e.column_scale * (ha[k].col(col.beam) + col.pol_coefficient * hb[k].col(col.beam));
    }
    mmse_sinrs_fixed<L>(A, noise, sinr);
    acc += sum_log2(sinr, L);
  }
  return acc;
}

}  // namespace

double sum_mutual_information(std::span<const CMatrix> slice, const CMatrix& W, const LinkConfig& cfg) {
  const auto sinrs = slice_sinrs(slice, W, cfg);
  return sum_log2(sinrs.data(), static_cast<Eigen::Index>(sinrs.size()));
}

SelectionRecord clsm_select(std::span<const CMatrix> slice, const Codebook& codebook, const LinkConfig& cfg) {
  if (codebook.size() == 0) throw std::invalid_argument("empty codebook");
  check_slice(slice);
  const BeamConfig& bc = codebook.config();
  if (slice[0].cols() != bc.n_tx()) throw std::invalid_argument("codebook port count does not match channel");

  // H W column c = scale * (H_A b + pol * H_B b) with H_A, H_B the two
  // polarization blocks, so the per-beam products are computed once.
  const int n12 = bc.n1 * bc.n2;
  const auto nrx = slice[0].rows();
  const auto nbeams = static_cast<Eigen::Index>(codebook.beams().size());
  CMatrix beams(n12, nbeams);
  for (Eigen::Index b = 0; b < nbeams; ++b) beams.col(b) = codebook.beams()[b];
  std::vector<CMatrix> ha(slice.size()), hb(slice.size());
  for (std::size_t k = 0; k < slice.size(); ++k) {
    ha[k].noalias() = slice[k].leftCols(n12) * beams;
    hb[k].noalias() = slice[k].rightCols(n12) * beams;
  }

  double best = -std::numeric_limits<double>::infinity();
  int best_pmi = -1;
  for (const auto& e : codebook.entries()) {
    double acc = 0.0;
    if (cfg.sinr_form == SinrForm::Squared && e.rank <= 4) {
      switch (e.rank) {
        case 1: acc = entry_sum_mi<1>(e, ha, hb, nrx, cfg.noise_variance); break;
        case 2: acc = entry_sum_mi<2>(e, ha, hb, nrx, cfg.noise_variance); break;
        case 3: acc = entry_sum_mi<3>(e, ha, hb, nrx, cfg.noise_variance); break;
        default: acc = entry_sum_mi<4>(e, ha, hb, nrx, cfg.noise_variance); break;
      }
    } else {
      SmallCMatrix A(nrx, e.rank);
      double sinr[kMaxLayers];
      for (std::size_t k = 0; k < ha.size(); ++k) {
        for (int c = 0; c < e.rank; ++c) {
          const auto& col = e.columns[c];
          A.col(c) = e.column_scale * (ha[k].col(col.beam) + col.pol_coefficient * hb[k].col(col.beam));
        }
        mmse_layer_sinrs(A, cfg.noise_variance, cfg.sinr_form, sinr);
        acc += sum_log2(sinr, e.rank);
      }
    }
    if (acc > best) {
      best = acc;
      best_pmi = e.pmi;
    }
  }

  const auto& win = codebook.at(best_pmi);
  SelectionRecord rec;
  rec.params.W = win.W;
  rec.params.rank = win.rank;
  rec.params.pmi = win.pmi;
  rec.params.source = ParamSource::Clsm;
  rec.params.cqi = select_cqi(slice_sinrs(slice, win.W, cfg), cfg);
  rec.sum_mi = best;
  return rec;
}

int svd_max_rank(const CMatrix& H) { return static_cast<int>(std::min(H.rows(), H.cols())); }

SvdResult svd(const CMatrix& H) {
  if (!H.allFinite()) throw std::invalid_argument("non-finite channel matrix");
  Eigen::JacobiSVD<CMatrix> solver(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdResult out{solver.matrixU(), solver.singularValues(), solver.matrixV()};
  canonicalize_phases(out.U, out.V, out.singular_values.size());
  return out;
}

SelectionRecord svd_select(std::span<const CMatrix> slice, const LinkConfig& cfg, std::optional<int> rank) {
  check_slice(slice);
  const int max_rank = svd_max_rank(slice[0]);
  if (max_rank > kMaxLayers) throw std::invalid_argument("too many layers for SVD selection");
  if (rank && (*rank < 1 || *rank > max_rank)) throw std::invalid_argument("rank constraint out of range");
  const int lo = rank ? *rank : 1;
  const int hi = rank ? *rank : max_rank;

  std::vector<CMatrix> vs(slice.size());
  for (std::size_t k = 0; k < slice.size(); ++k) {
    if (!slice[k].allFinite()) throw std::invalid_argument("non-finite channel matrix");
    Eigen::JacobiSVD<CMatrix> solver(slice[k], Eigen::ComputeThinU | Eigen::ComputeThinV);
    CMatrix U = solver.matrixU();
    vs[k] = solver.matrixV();
    canonicalize_phases(U, vs[k], max_rank);
  }

  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  int best_l = lo;
  CMatrix W;
  for (std::size_t k = 0; k < slice.size(); ++k) {
    for (int L = lo; L <= hi; ++L) {
      W = vs[k].leftCols(L) / std::sqrt(static_cast<double>(L));
      const double mi = sum_mutual_information(slice, W, cfg);
      if (mi > best) {
        best = mi;
        best_k = k;
        best_l = L;
      }
    }
  }

  SelectionRecord rec;
  rec.params.W = vs[best_k].leftCols(best_l) / std::sqrt(static_cast<double>(best_l));
  rec.params.rank = best_l;
  rec.params.source = ParamSource::Svd;
  rec.params.cqi = select_cqi(slice_sinrs(slice, rec.params.W, cfg), cfg);
  rec.sum_mi = best;
  rec.subcarrier = static_cast<int>(best_k);
  return rec;
}

void write_selection_csv(std::span<const SelectionRecord> records, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open selection CSV for writing: " + path.string());
  os << "t,q,pmi_or_kL,rank,cqi,sum_mi\n" << std::fixed << std::setprecision(6);
  for (const auto& r : records) {
    os << r.t << ',' << r.q << ',';
    if (r.params.pmi) {
      os << *r.params.pmi;
    } else {
      os << r.subcarrier << ':' << r.params.rank;
    }
    os << ',' << r.params.rank << ',' << r.params.cqi << ',' << r.sum_mi << '\n';
  }
}

}  // namespace fdmimo
