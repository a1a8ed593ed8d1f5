// SPDX-License-Identifier: Apache-2.0
#include "fdmimo/codebook.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

namespace fdmimo {

void BeamConfig::validate() const {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("N1 and N2 must be positive");
  if (o1 < 1 || o2 < 1) throw std::invalid_argument("oversampling factors must be at least 1");
  if (n_tx() > 16) throw std::invalid_argument("at most 16 transmit ports are supported");
}

CVector dft_beam(int theta1, int theta2, const BeamConfig& cfg) {
  cfg.validate();
  if (theta1 < 0 || theta1 >= cfg.n1 * cfg.o1) throw std::out_of_range("theta1 out of range");
  if (theta2 < 0 || theta2 >= cfg.n2 * cfg.o2) throw std::out_of_range("theta2 out of range");
  CVector b(cfg.n1 * cfg.n2);
  for (int i1 = 0; i1 < cfg.n1; ++i1) {
    // Reduce the exponent modulo N*O so phases like e^{j pi} come out exact.
    const int k1 = (theta1 * i1) % (cfg.n1 * cfg.o1);
    const double p1 = 2.0 * std::numbers::pi * k1 / (cfg.n1 * cfg.o1);
    for (int i2 = 0; i2 < cfg.n2; ++i2) {
      const int k2 = (theta2 * i2) % (cfg.n2 * cfg.o2);
      const double p2 = 2.0 * std::numbers::pi * k2 / (cfg.n2 * cfg.o2);
      b(i1 * cfg.n2 + i2) = std::polar(1.0, p1 + p2);
    }
  }
  // polar(1, pi) leaves a 1e-16 imaginary residue; snap the four axis phases.
  for (auto& v : b) {
    if (std::abs(v.imag()) < 1e-15) v = cdouble(std::round(v.real()), 0.0);
    if (std::abs(v.real()) < 1e-15) v = cdouble(0.0, std::round(v.imag()));
  }
  return b;
}

Codebook::Codebook(BeamConfig cfg, int max_rank) : cfg_(cfg), max_rank_(max_rank) {
  cfg_.validate();
  if (max_rank < 1) throw std::invalid_argument("max_rank must be at least 1");
  if (max_rank > kMaxCodebookRank) throw std::invalid_argument("codebook supports ranks up to 4");
  if (max_rank > cfg_.n_tx()) throw std::invalid_argument("max_rank exceeds the number of ports");
  if (max_rank > 1 && cfg_.n1 * cfg_.n2 == 1) {
    throw std::invalid_argument("rank > 1 needs at least two ports per polarization");
  }

  const int n12 = cfg_.n1 * cfg_.n2;
  const int b1 = cfg_.n1 * cfg_.o1;
  const int b2 = cfg_.n2 * cfg_.o2;
  beams_.reserve(static_cast<std::size_t>(b1) * b2);
  for (int t1 = 0; t1 < b1; ++t1) {
    for (int t2 = 0; t2 < b2; ++t2) beams_.push_back(dft_beam(t1, t2, cfg_));
  }

  const cdouble j(0.0, 1.0);
  const std::vector<cdouble> phi_rank1{1.0, j, -1.0, -j};
  const std::vector<cdouble> phi_multi{1.0, j};

  for (int rank = 1; rank <= max_rank; ++rank) {
    const auto& phis = rank == 1 ? phi_rank1 : phi_multi;
    for (int t1 = 0; t1 < b1; ++t1) {
      for (int t2 = 0; t2 < b2; ++t2) {
        for (const cdouble phi : phis) {
          CodebookEntry e;
          e.pmi = static_cast<int>(entries_.size());
          e.rank = rank;
          e.theta1 = t1;
          e.theta2 = t2;
          e.phi = phi;
          const int own = beam_index(t1, t2);
          const int paired = beam_index((t1 + cfg_.eps1()) % b1, (t2 + cfg_.eps2()) % b2);
          // Column layout [b, b', b, b'; phi b, phi b', -phi b, -phi b'],
          // truncated to the rank; rank 1 is [b; phi b].
          const int layout_beam[4] = {own, paired, own, paired};
          const cdouble layout_pol[4] = {phi, phi, -phi, -phi};
          for (int c = 0; c < rank; ++c) e.columns.push_back({layout_beam[c], layout_pol[c]});
          e.column_scale = 1.0 / std::sqrt(static_cast<double>(rank) * cfg_.n_tx());
          e.W.resize(cfg_.n_tx(), rank);
          for (int c = 0; c < rank; ++c) {
            const CVector& b = beams_[e.columns[c].beam];
            e.W.col(c).head(n12) = e.column_scale * b;
            e.W.col(c).tail(n12) = e.column_scale * e.columns[c].pol_coefficient * b;
          }
          entries_.push_back(std::move(e));
        }
      }
    }
  }
}

Codebook build_codebook(const BeamConfig& cfg, int max_rank) { return Codebook(cfg, max_rank); }

void write_codebook_csv(const Codebook& cb, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open codebook CSV for writing: " + path.string());
  os << "pmi,rank,theta1,theta2,phi_re,phi_im,w\n";
  os << std::setprecision(17);
  for (const auto& e : cb.entries()) {
    os << e.pmi << ',' << e.rank << ',' << e.theta1 << ',' << e.theta2 << ',' << e.phi.real() << ','
       << e.phi.imag();
    for (Eigen::Index c = 0; c < e.W.cols(); ++c) {
      for (Eigen::Index r = 0; r < e.W.rows(); ++r) os << ',' << e.W(r, c).real() << ',' << e.W(r, c).imag();
    }
    os << '\n';
  }
}

}  // namespace fdmimo
