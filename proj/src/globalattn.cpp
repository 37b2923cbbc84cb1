#include "srgf/globalattn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace srgf::attn {
namespace {

std::size_t head_width(ad::Var rows, ad::Var cols, const AttentionParams& params) {
  const std::size_t d = rows.cols();
  if (cols.cols() != d) {
    throw ShapeError("attention: rows " + shape_string(rows.value()) + " vs cols " + shape_string(cols.value()));
  }
  if (params.heads == 0 || d % params.heads != 0) {
    throw std::invalid_argument("attention: dimension " + std::to_string(d) + " not divisible by " +
                                std::to_string(params.heads) + " heads");
  }
  for (const ad::Var* w : {&params.query, &params.key, &params.value}) {
    if (w->rows() != d || w->cols() != d) {
      throw ShapeError("attention: projection " + shape_string(w->value()) + ", expected " + std::to_string(d) +
                       "x" + std::to_string(d));
    }
  }
  return d / params.heads;
}

struct HeadInputs {
  ad::Var q, k, v;
};

HeadInputs project_head(ad::Var rows, ad::Var cols, const AttentionParams& params, std::size_t h, std::size_t dh) {
  return {ad::matmul(rows, ad::slice_cols(params.query, h * dh, dh)),
          ad::matmul(cols, ad::slice_cols(params.key, h * dh, dh)),
          ad::matmul(cols, ad::slice_cols(params.value, h * dh, dh))};
}

}  // namespace

DenseAttention multi_head_attention(ad::Var rows, ad::Var cols, const AttentionParams& params) {
  const std::size_t dh = head_width(rows, cols, params);
  const double factor = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ad::Var> weights;
  std::vector<ad::Var> outputs;
  for (std::size_t h = 0; h < params.heads; ++h) {
    const HeadInputs in = project_head(rows, cols, params, h, dh);
    const ad::Var w = ad::softmax_rows(ad::scale(ad::matmul_nt(in.q, in.k), factor));
    weights.push_back(w);
    outputs.push_back(ad::matmul(w, in.v));
  }
  return {ad::mean_of(weights), ad::hstack(outputs)};
}

MaskedAttention masked_attention(const SparseMatrix& pattern, ad::Var rows, ad::Var cols,
                                 const AttentionParams& params) {
  const std::size_t dh = head_width(rows, cols, params);
  if (pattern.rows() != rows.rows() || pattern.cols() != cols.rows()) {
    throw ShapeError("masked_attention: pattern " + std::to_string(pattern.rows()) + "x" +
                     std::to_string(pattern.cols()) + " does not fit " + std::to_string(rows.rows()) + " rows over " +
                     std::to_string(cols.rows()) + " cols");
  }
  const double factor = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ad::Var> weights;
  std::vector<ad::Var> outputs;
  for (std::size_t h = 0; h < params.heads; ++h) {
    const HeadInputs in = project_head(rows, cols, params, h, dh);
    const ad::Var w = ad::segment_softmax(pattern, ad::sddmm(pattern, in.q, in.k, factor));
    weights.push_back(w);
    outputs.push_back(ad::pattern_spmm(pattern, w, in.v));
  }
  return {ad::mean_of(weights), ad::hstack(outputs)};
}

ad::Var apply_global(ad::Var att, ad::Var values) {
  if (att.cols() != values.rows()) {
    throw ShapeError("apply_global: att " + shape_string(att.value()) + " vs values " +
                     shape_string(values.value()));
  }
  return ad::matmul(att, values);
}

ad::Var apply_global(const SparseMatrix& pattern, ad::Var weights, ad::Var values) {
  return ad::pattern_spmm(pattern, weights, values);
}

AttentionMode resolve_mode(AttentionMode mode, std::size_t users, std::size_t items) {
  if (mode != AttentionMode::Auto) return mode;
  return users * items <= kDenseAttentionLimit ? AttentionMode::Dense : AttentionMode::Masked;
}

ad::Var global_embeddings(ad::Var collaborative, std::size_t user_count, const AttentionParams& params,
                          AttentionMode mode, const SparseMatrix& user_item, const SparseMatrix& item_user) {
  if (user_count > collaborative.rows()) {
    throw ShapeError("global_embeddings: " + std::to_string(user_count) + " users exceed " +
                     std::to_string(collaborative.rows()) + " rows");
  }
  const std::size_t item_count = collaborative.rows() - user_count;
  const ad::Var users = ad::slice_rows(collaborative, 0, user_count);
  const ad::Var items = ad::slice_rows(collaborative, user_count, item_count);
  if (resolve_mode(mode, user_count, item_count) == AttentionMode::Dense) {
    const DenseAttention ui = multi_head_attention(users, items, params);
    const DenseAttention iu = multi_head_attention(items, users, params);
    return ad::vstack(apply_global(ui.att, items), apply_global(iu.att, users));
  }
  const MaskedAttention ui = masked_attention(user_item, users, items, params);
  const MaskedAttention iu = masked_attention(item_user, items, users, params);
  return ad::vstack(apply_global(user_item, ui.weights, items), apply_global(item_user, iu.weights, users));
}

ad::Var fuse_structural(ad::Var global, ad::Var local, double alpha, double beta) {
  if (!global.value().same_shape(local.value())) {
    throw ShapeError("fuse_structural: " + shape_string(global.value()) + " vs " + shape_string(local.value()));
  }
  return ad::add(ad::scale(ad::l2_normalize_rows(global), alpha), ad::scale(ad::l2_normalize_rows(local), beta));
}

}  // namespace srgf::attn
