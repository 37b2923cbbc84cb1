#include "srgf/hypergraph.hpp"

#include <stdexcept>
#include <string>

namespace srgf::hyper {

Dependencies hyperedge_dependencies(ad::Var item_features, ad::Var hyperedges, const SparseMatrix& user_item) {
  if (item_features.cols() != hyperedges.cols()) {
    throw ShapeError("hyperedge_dependencies: features " + shape_string(item_features.value()) +
                     " vs hyperedges " + shape_string(hyperedges.value()));
  }
  if (user_item.cols() != item_features.rows()) {
    throw ShapeError("hyperedge_dependencies: adjacency has " + std::to_string(user_item.cols()) +
                     " item columns but features have " + std::to_string(item_features.rows()) + " rows");
  }
  const ad::Var items = ad::matmul_nt(item_features, hyperedges);
  return {items, ad::spmm(user_item, items)};
}

ad::Var gumbel_softmax_rows(ad::Var logits, double tau, const Matrix& noise) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_softmax_rows: temperature must be positive");
  return ad::softmax_rows(ad::scale(ad::add_constant(logits, noise), 1.0 / tau));
}

ad::Var dropout(ad::Var x, double p, NoiseSource& noise) {
  if (!noise.training() || p <= 0.0) return x;
  return ad::mul_constant(x, noise.dropout_mask(x.rows(), x.cols(), p));
}

ad::Var propagate_items(ad::Var items_relaxed, ad::Var item_embeddings, double p_drop, NoiseSource& noise) {
  const ad::Var left = dropout(items_relaxed, p_drop, noise);
  const ad::Var right = dropout(items_relaxed, p_drop, noise);
  return ad::matmul(left, ad::matmul_tn(right, item_embeddings));
}

ad::Var propagate_users(ad::Var users_relaxed, ad::Var items_relaxed, ad::Var item_embeddings, double p_drop,
                        NoiseSource& noise) {
  if (users_relaxed.cols() != items_relaxed.cols()) {
    throw ShapeError("propagate_users: hyperedge counts differ between users and items");
  }
  const ad::Var left = dropout(users_relaxed, p_drop, noise);
  const ad::Var right = dropout(items_relaxed, p_drop, noise);
  return ad::matmul(left, ad::matmul_tn(right, item_embeddings));
}

LocalEmbeddings hypergraph_layers(ad::Var users_relaxed, ad::Var items_relaxed, ad::Var item_embeddings,
                                  std::size_t layers, double p_drop, NoiseSource& noise) {
  if (layers == 0) throw std::invalid_argument("hypergraph_layers: need at least one layer");
  LocalEmbeddings out{};
  ad::Var items = item_embeddings;
  for (std::size_t h = 0; h < layers; ++h) {
    out.users = propagate_users(users_relaxed, items_relaxed, items, p_drop, noise);
    items = propagate_items(items_relaxed, items, p_drop, noise);
  }
  out.items = items;
  return out;
}

ad::Var fuse_local(const std::vector<LocalEmbeddings>& modalities) {
  if (modalities.empty()) throw ShapeError("fuse_local: no modalities");
  ad::Var total = ad::vstack(modalities.front().users, modalities.front().items);
  for (std::size_t m = 1; m < modalities.size(); ++m) {
    const ad::Var stacked = ad::vstack(modalities[m].users, modalities[m].items);
    if (!stacked.value().same_shape(total.value())) {
      throw ShapeError("fuse_local: modality " + std::to_string(m) + " has shape " + shape_string(stacked.value()) +
                       ", expected " + shape_string(total.value()));
    }
    total = ad::add(total, stacked);
  }
  return total;
}

ad::Var hcl_loss(ad::Var first, ad::Var second, double tau, NceDenominator denominator) {
  return info_nce(first, second, tau, denominator);
}

}  // namespace srgf::hyper
