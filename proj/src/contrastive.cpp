#include "srgf/contrastive.hpp"

#include <stdexcept>

namespace srgf {

ad::Var row_cosine(ad::Var a, ad::Var b) { return ad::row_dot(ad::l2_normalize_rows(a), ad::l2_normalize_rows(b)); }

ad::Var info_nce(ad::Var a, ad::Var b, double tau, NceDenominator denominator) {
  if (!(tau > 0.0)) throw std::invalid_argument("info_nce: temperature must be positive");
  if (!a.value().same_shape(b.value())) {
    throw ShapeError("info_nce: views " + shape_string(a.value()) + " and " + shape_string(b.value()) + " differ");
  }
  if (a.rows() == 0) throw ShapeError("info_nce: no rows");
  const ad::Var na = ad::l2_normalize_rows(a);
  const ad::Var nb = ad::l2_normalize_rows(b);
  const ad::Var positives = ad::scale(ad::row_dot(na, nb), 1.0 / tau);
  if (denominator == NceDenominator::InBatch) {
    const ad::Var logits = ad::scale(ad::matmul_nt(na, nb), 1.0 / tau);
    return ad::sub(ad::sum(ad::logsumexp_rows(logits)), ad::sum(positives));
  }
  // Every anchor shares the same denominator.
  const ad::Var shared = ad::logsumexp_rows(ad::transpose(positives));
  return ad::sub(ad::scale(shared, static_cast<double>(a.rows())), ad::sum(positives));
}

}  // namespace srgf
