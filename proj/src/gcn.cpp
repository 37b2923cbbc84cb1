#include "srgf/gcn.hpp"

#include <string>

namespace srgf::gcn {

ad::Var cgprop(const data::NormalizedAdjacency& adj, ad::Var embeddings) {
  if (embeddings.rows() != adj.matrix.cols()) {
    throw ShapeError("cgprop: " + std::to_string(embeddings.rows()) + " embedding rows for a graph with " +
                     std::to_string(adj.matrix.cols()) + " nodes");
  }
  return ad::spmm(adj.matrix, embeddings);
}

ad::Var layer_combine(const std::vector<ad::Var>& layers) {
  if (layers.empty()) throw ShapeError("layer_combine: empty layer stack");
  return ad::mean_of(layers);
}

ad::Var collaborative_embeddings(const data::NormalizedAdjacency& adj, ad::Var ids, std::size_t layers) {
  std::vector<ad::Var> stack{ids};
  for (std::size_t s = 0; s < layers; ++s) stack.push_back(cgprop(adj, stack.back()));
  return layer_combine(stack);
}

ad::Var transform_modal(ad::Var item_features, ad::Var projection) {
  if (item_features.cols() != projection.rows()) {
    throw ShapeError("transform_modal: features " + shape_string(item_features.value()) + " vs projection " +
                     shape_string(projection.value()));
  }
  return ad::matmul(item_features, projection);
}

ad::Var init_user_modal(const SparseMatrix& user_mean, ad::Var projected_items) {
  return ad::spmm(user_mean, projected_items);
}

ad::Var mgprop(const data::NormalizedAdjacency& adj, ad::Var modal) { return cgprop(adj, modal); }

ad::Var modal_embeddings(const data::NormalizedAdjacency& adj, const SparseMatrix& user_mean, ad::Var item_features,
                         ad::Var projection, std::size_t layers) {
  const ad::Var items = transform_modal(item_features, projection);
  ad::Var current = ad::vstack(init_user_modal(user_mean, items), items);
  for (std::size_t k = 0; k < layers; ++k) current = mgprop(adj, current);
  return current;
}

ad::Var mcl_loss(ad::Var first, ad::Var second, double tau, NceDenominator denominator) {
  return info_nce(first, second, tau, denominator);
}

}  // namespace srgf::gcn
