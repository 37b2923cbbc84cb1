#pragma once

#include <cstddef>
#include <vector>

#include "srgf/autodiff.hpp"
#include "srgf/contrastive.hpp"
#include "srgf/dataio.hpp"

// Collaborative and modality-specific propagation over the normalized
// user-item graph. Embedding matrices stack users first, then items.
namespace srgf::gcn {

/// One propagation layer: (D^-1/2 A D^-1/2) * E.
ad::Var cgprop(const data::NormalizedAdjacency& adj, ad::Var embeddings);

/// Elementwise mean of the layer stack E^0..E^S.
ad::Var layer_combine(const std::vector<ad::Var>& layers);

/// E^0 = ids, E^{s+1} = cgprop(E^s), combined by the layer mean.
ad::Var collaborative_embeddings(const data::NormalizedAdjacency& adj, ad::Var ids, std::size_t layers);

/// Raw item features (|I| x d_m) projected into the embedding space by W_m (d_m x d).
ad::Var transform_modal(ad::Var item_features, ad::Var projection);

/// User modal rows as the mean of their train neighbors' projected features.
/// `user_mean` is the row-normalized user x item interaction matrix; users
/// without neighbors get a zero row.
ad::Var init_user_modal(const SparseMatrix& user_mean, ad::Var projected_items);

/// Modal propagation; same kernel as cgprop.
ad::Var mgprop(const data::NormalizedAdjacency& adj, ad::Var modal);

/// Builds [users; items] modal matrix and returns the K-th propagated layer.
ad::Var modal_embeddings(const data::NormalizedAdjacency& adj, const SparseMatrix& user_mean, ad::Var item_features,
                         ad::Var projection, std::size_t layers);

/// Cross-modal InfoNCE between the same rows of two modal embedding matrices.
ad::Var mcl_loss(ad::Var first, ad::Var second, double tau,
                 NceDenominator denominator = NceDenominator::PositivePairs);

}  // namespace srgf::gcn
