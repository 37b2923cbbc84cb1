#pragma once

#include "srgf/autodiff.hpp"

namespace srgf {

/// Which similarities populate the InfoNCE denominator for anchor u.
enum class NceDenominator {
  /// s(a_u', b_u') over every u': the positive pairs of all rows.
  PositivePairs,
  /// s(a_u, b_u') over every u': the usual in-batch negatives.
  InBatch,
};

/// Cross-view InfoNCE summed over rows:
///   sum_u -log( exp(s(a_u, b_u) / tau) / sum_u' exp(.../tau) )
/// with s the cosine similarity (zero for a zero-norm row).
ad::Var info_nce(ad::Var a, ad::Var b, double tau, NceDenominator denominator = NceDenominator::PositivePairs);

/// Per-row cosine similarity, N x 1.
ad::Var row_cosine(ad::Var a, ad::Var b);

}  // namespace srgf
