// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "fdmimo/types.hpp"

namespace fdmimo {

/// Single-panel Type I codebook configuration (codebook mode 1, wideband).
///
/// Paired beams for ranks 2..4 use the offset (O1, 0) when N1 > 1 and
/// (0, O2) otherwise, which keeps b and b' orthogonal DFT beams.
struct BeamConfig {
  int n1 = 8;
  int n2 = 1;
  int o1 = 4;
  int o2 = 1;

  int n_tx() const { return 2 * n1 * n2; }
  int beam_count() const { return n1 * n2 * o1 * o2; }
  int eps1() const { return n1 > 1 ? o1 : 0; }
  int eps2() const { return n1 > 1 ? 0 : o2; }
  void validate() const;
};

inline constexpr int kMaxCodebookRank = 4;

/// One column of a codebook precoder: coefficient * [b; sign * phi * b] where
/// b is beam `beam`. Used by the fast exhaustive search.
struct ColumnSpec {
  int beam = 0;
  cdouble pol_coefficient{1.0, 0.0};  // multiplies the second polarization block
};

struct CodebookEntry {
  int pmi = 0;
  int rank = 1;
  int theta1 = 0;
  int theta2 = 0;
  cdouble phi{1.0, 0.0};
  CMatrix W;  // n_tx x rank, unit Frobenius norm
  std::vector<ColumnSpec> columns;
  double column_scale = 1.0;
};

/// 2-D DFT beam a1(theta1) (x) a2(theta2), length N1*N2.
CVector dft_beam(int theta1, int theta2, const BeamConfig& cfg);

/// Ranks 1..max_rank, in rank-major order; within a rank theta1, then theta2,
/// then the co-phasing index. PMIs are 0-based and dense.
class Codebook {
 public:
  Codebook(BeamConfig cfg, int max_rank);

  const BeamConfig& config() const { return cfg_; }
  int max_rank() const { return max_rank_; }
  const std::vector<CodebookEntry>& entries() const { return entries_; }
  const CodebookEntry& at(int pmi) const { return entries_.at(pmi); }
  std::size_t size() const { return entries_.size(); }
  /// Beam vectors indexed by theta1 * (N2*O2) + theta2.
  const std::vector<CVector>& beams() const { return beams_; }
  int beam_index(int theta1, int theta2) const { return theta1 * cfg_.n2 * cfg_.o2 + theta2; }

 private:
  BeamConfig cfg_;
  int max_rank_;
  std::vector<CVector> beams_;
  std::vector<CodebookEntry> entries_;
};

Codebook build_codebook(const BeamConfig& cfg, int max_rank);

/// CSV: pmi,rank,theta1,theta2,phi_re,phi_im, then W flattened column-major
/// as (re, im) pairs.
void write_codebook_csv(const Codebook& cb, const std::filesystem::path& path);

}  // namespace fdmimo
