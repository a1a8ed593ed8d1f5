// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "fdmimo/codebook.hpp"
#include "fdmimo/linkphy.hpp"
#include "fdmimo/params.hpp"

namespace fdmimo {

struct SelectionRecord {
  std::uint32_t t = 0;
  std::uint32_t q = 0;
  TransmissionParams params;
  double sum_mi = 0.0;  // sum over k and layers of log2(1 + SINR)
  int subcarrier = -1;  // SVD winner's source subcarrier, -1 for codebook selections
};

/// Sum over subcarriers and layers of log2(1 + SINR) under MMSE equalization.
double sum_mutual_information(std::span<const CMatrix> slice, const CMatrix& W, const LinkConfig& cfg);

/// Exhaustive codebook search. Ties go to the smallest PMI.
SelectionRecord clsm_select(std::span<const CMatrix> slice, const Codebook& codebook, const LinkConfig& cfg);

struct SvdResult {
  CMatrix U;  // N_rx x N_rx
  RVector singular_values;  // descending, length min(N_rx, N_tx)
  CMatrix V;  // N_tx x N_tx
};

/// H = U diag(s) V^H. Each column of V is rotated so that its first entry is
/// real and non-negative (U is rotated to match), which fixes the per-column
/// phase ambiguity.
SvdResult svd(const CMatrix& H);

/// max rank for SVD precoding: min(N_rx, N_tx).
int svd_max_rank(const CMatrix& H);

/// Best of the K * max_rank candidates V_k^L / sqrt(L). With `rank` set only
/// L = rank is searched. Ties go to the smallest (k, L).
SelectionRecord svd_select(std::span<const CMatrix> slice, const LinkConfig& cfg,
                           std::optional<int> rank = std::nullopt);

/// Columns t, q, pmi_or_kL, rank, cqi, sum_mi. SVD records write `k:L`.
void write_selection_csv(std::span<const SelectionRecord> records, const std::filesystem::path& path);

}  // namespace fdmimo
