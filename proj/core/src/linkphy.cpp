// SPDX-License-Identifier: Apache-2.0
#include "fdmimo/linkphy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace fdmimo {

std::string_view to_string(ParamSource s) {
  switch (s) {
    case ParamSource::Clsm: return "clsm";
    case ParamSource::Svd: return "svd";
    case ParamSource::Fixed: return "fixed";
    case ParamSource::Inferred: return "inferred";
  }
  return "fixed";
}

ParamSource param_source_from_string(std::string_view s) {
  if (s == "clsm") return ParamSource::Clsm;
  if (s == "svd") return ParamSource::Svd;
  if (s == "fixed") return ParamSource::Fixed;
  if (s == "inferred") return ParamSource::Inferred;
  throw std::invalid_argument("unknown parameter source: " + std::string(s));
}

void TransmissionParams::validate(double tol) const {
  if (rank < 1 || W.cols() != rank) throw std::invalid_argument("precoder columns do not match rank");
  if (std::abs(W.norm() - 1.0) > tol) throw std::invalid_argument("precoder is not power normalized");
  if (cqi < kMinCqi || cqi > kMaxCqi) throw std::invalid_argument("CQI out of range");
}

// ---------------------------------------------------------------------------
// CQI table

CqiTable CqiTable::standard() {
  return CqiTable({{1, 2, 0.1523},  {2, 2, 0.2344},  {3, 2, 0.3770},  {4, 2, 0.6016},  {5, 2, 0.8770},
                   {6, 2, 1.1758},  {7, 4, 1.4766},  {8, 4, 1.9141},  {9, 4, 2.4063},  {10, 6, 2.7305},
                   {11, 6, 3.3223}, {12, 6, 3.9023}, {13, 6, 4.5234}, {14, 6, 5.1152}, {15, 6, 5.5547}});
}

CqiTable::CqiTable(std::vector<CqiEntry> entries) : entries_(std::move(entries)) {
  if (entries_.size() != kMaxCqi) throw std::invalid_argument("CQI table needs exactly 15 entries");
  std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.cqi < b.cqi; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.cqi != static_cast<int>(i) + 1) throw std::invalid_argument("CQI indices must be 1..15");
    if (e.modulation_order != 2 && e.modulation_order != 4 && e.modulation_order != 6) {
      throw std::invalid_argument("unsupported modulation order in CQI table");
    }
    if (!(e.efficiency > 0.0)) throw std::invalid_argument("CQI efficiency must be positive");
    if (i > 0 && !(e.efficiency > entries_[i - 1].efficiency)) {
      throw std::invalid_argument("CQI efficiencies must be increasing");
    }
  }
}

CqiTable CqiTable::load_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open CQI table: " + path.string());
  std::string line;
  std::vector<CqiEntry> entries;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.find("cqi") != std::string::npos) continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    CqiEntry e;
    if (!(ss >> e.cqi >> e.modulation_order >> e.efficiency)) throw FormatError("bad CQI table row: " + line);
    entries.push_back(e);
  }
  return CqiTable(std::move(entries));
}

const CqiEntry& CqiTable::at(int cqi) const {
  if (cqi < kMinCqi || cqi > kMaxCqi) throw std::out_of_range("CQI out of range");
  return entries_[cqi - 1];
}

void LinkConfig::validate() const {
  if (!(noise_variance > 0.0)) throw std::invalid_argument("noise variance must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(bler_slope > 0.0)) throw std::invalid_argument("BLER slope must be positive");
  if (!(bler_target > 0.0 && bler_target < 1.0)) throw std::invalid_argument("BLER target must lie in (0, 1)");
  if (n_re <= 0) throw std::invalid_argument("N_RE must be positive");
}

// ---------------------------------------------------------------------------
// Equalization and SINR

CMatrix mmse_equalizer(const CMatrix& H, const CMatrix& W, double noise_variance) {
  if (H.cols() != W.rows()) throw std::invalid_argument("channel and precoder shapes are incompatible");
  if (!(noise_variance > 0.0)) throw std::invalid_argument("noise variance must be positive");
  const CMatrix A = H * W;
  CMatrix gram = A.adjoint() * A;
  gram.diagonal().array() += noise_variance;
  Eigen::LDLT<CMatrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success) throw NumericalError("singular regularized Gram matrix");
  CMatrix E = ldlt.solve(A.adjoint());
  if (!E.allFinite()) throw NumericalError("non-finite MMSE equalizer");
  return E;
}

namespace {

template <typename GMat, typename EMat>
void layer_sinrs_from(const GMat& G, const EMat& E, double noise_variance, SinrForm form, double* out) {
  const Eigen::Index L = G.rows();
  for (Eigen::Index l = 0; l < L; ++l) {
    double signal, interference = 0.0, noise = 0.0;
    if (form == SinrForm::Squared) {
      signal = std::norm(G(l, l));
      for (Eigen::Index i = 0; i < L; ++i) {
        if (i != l) interference += std::norm(G(l, i));
      }
      for (Eigen::Index i = 0; i < E.cols(); ++i) noise += std::norm(E(l, i));
    } else {
      signal = std::abs(G(l, l));
      for (Eigen::Index i = 0; i < L; ++i) {
        if (i != l) interference += std::abs(G(l, i));
      }
      for (Eigen::Index i = 0; i < E.cols(); ++i) noise += std::abs(E(l, i));
    }
    const double denom = interference + noise_variance * noise;
    if (!(denom > 0.0)) throw NumericalError("zero SINR denominator");
    out[l] = signal / denom;
  }
}

}  // namespace

RVector sinr_per_layer(const CMatrix& H, const CMatrix& W, const CMatrix& E, double noise_variance,
                       SinrForm form) {
  if (E.cols() != H.rows() || E.rows() != W.cols()) throw std::invalid_argument("equalizer shape mismatch");
  const CMatrix G = E * H * W;
  RVector out(W.cols());
  layer_sinrs_from(G, E, noise_variance, form, out.data());
  return out;
}

void mmse_layer_sinrs(const SmallCMatrix& A, double noise_variance, SinrForm form, double* out) {
  if (!(noise_variance > 0.0)) throw std::invalid_argument("noise variance must be positive");
  if (form == SinrForm::Squared) {
    switch (A.cols()) {
      case 1: return mmse_sinrs_fixed<1>(A, noise_variance, out);
      case 2: return mmse_sinrs_fixed<2>(A, noise_variance, out);
      case 3: return mmse_sinrs_fixed<3>(A, noise_variance, out);
      case 4: return mmse_sinrs_fixed<4>(A, noise_variance, out);
      default: break;
    }
  }
  SmallCMatrix gram = A.adjoint() * A;
  gram.diagonal().array() += noise_variance;
  Eigen::LLT<SmallCMatrix> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("singular regularized Gram matrix");
  const SmallCMatrix E = llt.solve(A.adjoint());
  const SmallCMatrix G = E * A;
  layer_sinrs_from(G, E, noise_variance, form, out);
}

// ---------------------------------------------------------------------------
// BICM capacity tables

namespace {

constexpr double kTableMinDb = -20.0;
constexpr double kTableMaxDb = 40.0;
constexpr double kTableStepDb = 0.05;
constexpr int kQuadratureNodes = 64;

struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;  // normalized so that sum = 1 for E over N(0,1)
};

// Gauss-Hermite (probabilists' weight) via the Golub-Welsch eigenproblem.
Quadrature gauss_hermite(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    J(i, i - 1) = J(i - 1, i) = std::sqrt(static_cast<double>(i));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Quadrature q;
  for (int i = 0; i < n; ++i) {
    q.nodes.push_back(es.eigenvalues()(i));
    const double v0 = es.eigenvectors()(0, i);
    q.weights.push_back(v0 * v0);
  }
  return q;
}

// Capacity of one Gray-labelled PAM component with `bits` bits, signal
// energy 1/2 and noise variance sigma2 per real dimension.
double pam_bicm_capacity(int bits, double sigma2, const Quadrature& quad) {
  const int levels = 1 << bits;
  const double scale = std::sqrt(0.5 * 3.0 / (levels * levels - 1.0));
  std::vector<double> amp(levels);
  std::vector<int> label(levels);
  for (int i = 0; i < levels; ++i) {
    amp[i] = (2.0 * i - (levels - 1)) * scale;
    label[i] = i ^ (i >> 1);  // binary reflected Gray code
  }
  const double sigma = std::sqrt(sigma2);
  double loss = 0.0;  // sum over bits of E[log2(sum_all / sum_same_bit)]
  std::vector<double> logp(levels);
  for (int i = 0; i < levels; ++i) {
    for (std::size_t n = 0; n < quad.nodes.size(); ++n) {
      const double y = amp[i] + sigma * quad.nodes[n];
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < levels; ++j) {
        const double d = y - amp[j];
        logp[j] = -d * d / (2.0 * sigma2);
        mx = std::max(mx, logp[j]);
      }
      double all = 0.0;
      for (int j = 0; j < levels; ++j) all += std::exp(logp[j] - mx);
      for (int b = 0; b < bits; ++b) {
        const int bit = (label[i] >> b) & 1;
        double same = 0.0;
        for (int j = 0; j < levels; ++j) {
          if (((label[j] >> b) & 1) == bit) same += std::exp(logp[j] - mx);
        }
        loss += quad.weights[n] * std::log2(all / same);
      }
    }
  }
  return bits - loss / levels;
}

struct CapacityTable {
  std::vector<double> bits;  // capacity at kTableMinDb + i * kTableStepDb
  int modulation_order = 0;
};

const CapacityTable& capacity_table(int m) {
  static std::once_flag once;
  static std::array<CapacityTable, 3> tables;
  std::call_once(once, [] {
    const auto quad = gauss_hermite(kQuadratureNodes);
    const int n = static_cast<int>(std::lround((kTableMaxDb - kTableMinDb) / kTableStepDb)) + 1;
    for (int idx = 0; idx < 3; ++idx) {
      const int order = 2 * (idx + 1);
      CapacityTable& t = tables[idx];
      t.modulation_order = order;
      t.bits.resize(n);
      for (int i = 0; i < n; ++i) {
        const double snr = db_to_linear(kTableMinDb + i * kTableStepDb);
        const double c = 2.0 * pam_bicm_capacity(order / 2, 0.5 / snr, quad);
        t.bits[i] = std::clamp(c, 0.0, static_cast<double>(order));
        if (i > 0) t.bits[i] = std::max(t.bits[i], t.bits[i - 1]);
      }
    }
  });
  if (m != 2 && m != 4 && m != 6) throw std::invalid_argument("unsupported modulation order");
  return tables[m / 2 - 1];
}

}  // namespace

double linear_to_db(double x) { return 10.0 * std::log10(x); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double bicm_capacity(double sinr, int modulation_order) {
  const auto& t = capacity_table(modulation_order);
  if (!(sinr >= 0.0)) throw std::invalid_argument("SINR must be non-negative");
  if (sinr == 0.0) return 0.0;
  const double db = linear_to_db(sinr);
  if (db <= kTableMinDb) return t.bits.front() * sinr / db_to_linear(kTableMinDb);
  const double pos = (db - kTableMinDb) / kTableStepDb;
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= t.bits.size()) return t.bits.back();
  const double frac = pos - static_cast<double>(i);
  return t.bits[i] + frac * (t.bits[i + 1] - t.bits[i]);
}

double bicm_capacity_inverse(double bits, int modulation_order) {
  const auto& t = capacity_table(modulation_order);
  if (bits <= 0.0) return 0.0;
  if (bits <= t.bits.front()) return db_to_linear(kTableMinDb) * bits / t.bits.front();
  if (bits >= t.bits.back()) return db_to_linear(kTableMaxDb);
  const auto it = std::lower_bound(t.bits.begin(), t.bits.end(), bits);
  const auto i = static_cast<std::size_t>(it - t.bits.begin());  // t.bits[i] >= bits > t.bits[i-1]
  const double lo = t.bits[i - 1];
  const double hi = t.bits[i];
  const double frac = hi > lo ? (bits - lo) / (hi - lo) : 0.0;
  return db_to_linear(kTableMinDb + (static_cast<double>(i - 1) + frac) * kTableStepDb);
}

double effective_sinr(std::span<const double> sinrs, double alpha, int modulation_order) {
  if (sinrs.empty()) throw std::invalid_argument("effective SINR of an empty set");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  double acc = 0.0;
  for (double s : sinrs) acc += bicm_capacity(s / alpha, modulation_order);
  return alpha * bicm_capacity_inverse(acc / static_cast<double>(sinrs.size()), modulation_order);
}

// ---------------------------------------------------------------------------
// BLER / CQI / throughput

double cqi_threshold_db(int cqi, const LinkConfig& cfg) {
  const double eta = cfg.cqi_table.at(cqi).efficiency;
  return linear_to_db(std::exp2(eta) - 1.0) + cfg.snr_gap_db;
}

double bler(double effective_sinr, int cqi, const LinkConfig& cfg) {
  const double threshold = cqi_threshold_db(cqi, cfg);
  if (effective_sinr <= 0.0) return 1.0;
  const double x = cfg.bler_slope * (linear_to_db(effective_sinr) - threshold);
  // 1 / (1 + e^x), written to stay accurate in both tails
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

int cqi_from_sinr(double effective_sinr, const LinkConfig& cfg) {
  for (int cqi = kMaxCqi; cqi > kMinCqi; --cqi) {
    if (bler(effective_sinr, cqi, cfg) <= cfg.bler_target) return cqi;
  }
  return kMinCqi;
}

int select_cqi(std::span<const double> sinrs, const LinkConfig& cfg) {
  std::array<double, 7> eff{};
  std::array<bool, 7> have{};
  for (int cqi = kMaxCqi; cqi > kMinCqi; --cqi) {
    const int m = cfg.cqi_table.at(cqi).modulation_order;
    if (!have[m]) {
      eff[m] = effective_sinr(sinrs, cfg.alpha, m);
      have[m] = true;
    }
    if (bler(eff[m], cqi, cfg) <= cfg.bler_target) return cqi;
  }
  return kMinCqi;
}

std::vector<double> slice_sinrs(std::span<const CMatrix> slice, const CMatrix& W, const LinkConfig& cfg) {
  const auto L = W.cols();
  if (L < 1 || L > kMaxLayers) throw std::invalid_argument("unsupported precoder rank");
  std::vector<double> out(slice.size() * L);
  SmallCMatrix A;
  for (std::size_t k = 0; k < slice.size(); ++k) {
    if (slice[k].cols() != W.rows()) throw std::invalid_argument("channel and precoder shapes are incompatible");
    A.noalias() = slice[k] * W;
    mmse_layer_sinrs(A, cfg.noise_variance, cfg.sinr_form, out.data() + k * L);
  }
  return out;
}

int cqi_for_precoder(std::span<const CMatrix> slice, const CMatrix& W, const LinkConfig& cfg) {
  return select_cqi(slice_sinrs(slice, W, cfg), cfg);
}

double throughput(std::span<const CMatrix> slice, const TransmissionParams& params, const LinkConfig& cfg) {
  if (params.W.cols() != params.rank) throw std::invalid_argument("precoder rank does not match declared rank");
  const auto& entry = cfg.cqi_table.at(params.cqi);
  const auto sinrs = slice_sinrs(slice, params.W, cfg);
  const double eff = effective_sinr(sinrs, cfg.alpha, entry.modulation_order);
  const double p_err = bler(eff, params.cqi, cfg);
  return cfg.n_re * entry.efficiency * params.rank * (1.0 - p_err);
}

}  // namespace fdmimo
