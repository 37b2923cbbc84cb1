#pragma once

#include <cstddef>
#include <vector>

#include "srgf/autodiff.hpp"
#include "srgf/contrastive.hpp"
#include "srgf/noise.hpp"

// Learnable hyperedge structure for one modality and the two-step message
// passing it drives.
namespace srgf::hyper {

struct Dependencies {
  ad::Var items;  ///< |I| x A
  ad::Var users;  ///< |U| x A
};

/// H_i = E_i V^T from raw item features and hyperedge vectors (A x d_m);
/// H_u = A_u H_i with A_u the user x item block of the normalized adjacency.
Dependencies hyperedge_dependencies(ad::Var item_features, ad::Var hyperedges, const SparseMatrix& user_item);

/// Row-wise softmax((noise + h) / tau). `noise` holds log(delta) - log(1 - delta).
ad::Var gumbel_softmax_rows(ad::Var logits, double tau, const Matrix& noise);

/// Inverted dropout with a mask drawn from `noise`; identity outside training.
ad::Var dropout(ad::Var x, double p, NoiseSource& noise);

/// DROP(H_i) DROP(H_i^T) E_i.
ad::Var propagate_items(ad::Var items_relaxed, ad::Var item_embeddings, double p_drop, NoiseSource& noise);

/// DROP(H_u) DROP(H_i^T) E_i.
ad::Var propagate_users(ad::Var users_relaxed, ad::Var items_relaxed, ad::Var item_embeddings, double p_drop,
                        NoiseSource& noise);

/// Top layer of the local user/item stacks for one modality.
struct LocalEmbeddings {
  ad::Var users;
  ad::Var items;
};

/// Runs `layers` (>= 1) hypergraph layers starting from the collaborative item
/// embeddings.
LocalEmbeddings hypergraph_layers(ad::Var users_relaxed, ad::Var items_relaxed, ad::Var item_embeddings,
                                  std::size_t layers, double p_drop, NoiseSource& noise);

/// Sum over modalities of the stacked [users; items] local embeddings.
ad::Var fuse_local(const std::vector<LocalEmbeddings>& modalities);

/// Cross-modal InfoNCE between the same rows of two modalities' local embeddings.
ad::Var hcl_loss(ad::Var first, ad::Var second, double tau,
                 NceDenominator denominator = NceDenominator::PositivePairs);

}  // namespace srgf::hyper
