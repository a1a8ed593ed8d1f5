// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "fdmimo/types.hpp"

namespace fdmimo {

enum class ParamSource { Clsm, Svd, Fixed, Inferred };

std::string_view to_string(ParamSource s);
ParamSource param_source_from_string(std::string_view s);

/// Precoder, rank and CQI applied to every subcarrier at one location.
struct TransmissionParams {
  CMatrix W;  // n_tx x rank
  int rank = 1;
  int cqi = kMinCqi;
  ParamSource source = ParamSource::Fixed;
  std::optional<int> pmi;

  /// Throws std::invalid_argument on a broken invariant: unit Frobenius
  /// norm within `tol`, rank == columns, CQI within 1..15.
  void validate(double tol = 1e-10) const;
};

}  // namespace fdmimo
