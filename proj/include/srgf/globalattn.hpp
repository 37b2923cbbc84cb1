#pragma once

#include <cstddef>

#include "srgf/autodiff.hpp"

// Attention-only transformer layer over collaborative embeddings and the
// fusion of its output with the hypergraph embedding.
namespace srgf::attn {

/// Projections are d x d; head h owns columns [h*d/H, (h+1)*d/H).
struct AttentionParams {
  ad::Var query;
  ad::Var key;
  ad::Var value;
  std::size_t heads = 1;
};

struct DenseAttention {
  ad::Var att;  ///< rows x cols, head-averaged, row-stochastic
  ad::Var res;  ///< rows x d, per-head att_h * V_h concatenated
};

/// Full attention of every `rows` entry over every `cols` entry.
DenseAttention multi_head_attention(ad::Var rows, ad::Var cols, const AttentionParams& params);

struct MaskedAttention {
  ad::Var weights;  ///< nnz x 1 head-averaged weights in pattern CSR order
  ad::Var res;
};

/// Attention restricted to the stored entries of `pattern` (rows x cols).
/// Rows with no stored entry produce zero weights and outputs.
MaskedAttention masked_attention(const SparseMatrix& pattern, ad::Var rows, ad::Var cols,
                                 const AttentionParams& params);

/// att * E for a dense attention matrix.
ad::Var apply_global(ad::Var att, ad::Var values);
/// Same product with pattern-restricted weights.
ad::Var apply_global(const SparseMatrix& pattern, ad::Var weights, ad::Var values);

enum class AttentionMode { Dense, Masked, Auto };

/// Auto switches to Masked above this many user x item score entries.
inline constexpr std::size_t kDenseAttentionLimit = 1u << 22;

AttentionMode resolve_mode(AttentionMode mode, std::size_t users, std::size_t items);

/// Global embedding for all users then items. User rows attend over items
/// and take the weighted item slice; item rows use the transposed direction
/// with the same parameters. `user_item` / `item_user` are only read in
/// masked mode and must outlive backward.
ad::Var global_embeddings(ad::Var collaborative, std::size_t user_count, const AttentionParams& params,
                          AttentionMode mode, const SparseMatrix& user_item, const SparseMatrix& item_user);

/// alpha * NORM(global) + beta * NORM(local), NORM being row-wise l2.
ad::Var fuse_structural(ad::Var global, ad::Var local, double alpha, double beta);

}  // namespace srgf::attn
