#include "srgf/model.hpp"

#include <cmath>

#include "srgf/gcn.hpp"
#include "srgf/globalattn.hpp"
#include "srgf/hypergraph.hpp"
#include "srgf/metrics.hpp"

namespace srgf {

namespace {

SparseMatrix interaction_pattern(const data::InteractionDataset& ds) {
  std::vector<Triplet> t;
  t.reserve(ds.train().size());
  for (const auto& r : ds.train()) t.push_back({r.user, r.item, 1.0});
  return SparseMatrix::from_triplets(ds.user_count(), ds.item_count(), std::move(t));
}

bool modality_dropped(const std::string& name, const Ablation& a) {
  return (name == "visual" && a.no_visual) || (name == "textual" && a.no_textual);
}

NceDenominator denominator(const TrainConfig& cfg) {
  return cfg.in_batch_negatives ? NceDenominator::InBatch : NceDenominator::PositivePairs;
}

}  // namespace

GraphContext GraphContext::build(const data::InteractionDataset& ds,
                                 const std::vector<data::ModalFeatureTable>& features, const Ablation& ablation) {
  GraphContext g;
  g.users = ds.user_count();
  g.items = ds.item_count();
  g.adjacency = data::build_normalized_adjacency(ds);
  g.user_mean = data::user_mean_operator(ds);
  g.user_item = interaction_pattern(ds);
  g.item_user = g.user_item.transposed();
  for (const auto& f : features) {
    if (f.features.rows() != g.items) {
      throw data::DataError("modality " + f.modality + " has " + std::to_string(f.features.rows()) +
                            " rows for " + std::to_string(g.items) + " items");
    }
    if (!modality_dropped(f.modality, ablation)) g.modalities.push_back(f);
  }
  return g;
}

void round_to_float(Matrix& m) {
  for (double& v : m.values()) v = static_cast<double>(static_cast<float>(v));
}

Model::Model(const TrainConfig& cfg, GraphContext graph) : cfg_(cfg), graph_(std::move(graph)) {
  validate(cfg_);
  adam_.config.lr = cfg_.lr;
  Rng rng = Rng(cfg_.seed).fork(1);
  const std::size_t d = cfg_.dim;
  id_index_ = add_parameter("E_id", graph_.users + graph_.items, d, rng);

  const std::size_t modal_count = graph_.modalities.size();
  const bool use_mcl = !cfg_.ablation.no_mcl && modal_count >= 2;
  projection_index_.assign(modal_count, std::nullopt);
  hyperedge_index_.assign(modal_count, std::nullopt);
  for (std::size_t m = 0; m < modal_count; ++m) {
    const auto& table = graph_.modalities[m];
    if (use_mcl) projection_index_[m] = add_parameter("W_" + table.modality, table.features.cols(), d, rng);
    if (!cfg_.ablation.no_hyper) {
      hyperedge_index_[m] = add_parameter("V_" + table.modality, cfg_.hyperedges, table.features.cols(), rng);
    }
  }
  if (!cfg_.ablation.no_global) {
    query_index_ = add_parameter("W_Q", d, d, rng);
    key_index_ = add_parameter("W_K", d, d, rng);
    value_index_ = add_parameter("W_V", d, d, rng);
  }
}

std::size_t Model::add_parameter(std::string name, std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  round_to_float(m);
  params_.push_back({std::move(name), std::move(m)});
  return params_.size() - 1;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

const Parameter* Model::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::vector<ad::Var> Model::leaves(ad::Tape& tape) const {
  std::vector<ad::Var> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(tape.leaf(p.value));
  return out;
}

Forward Model::forward(ad::Tape& tape, const std::vector<ad::Var>& leaves, NoiseSource& noise) const {
  if (leaves.size() != params_.size()) throw ShapeError("forward: expected one leaf per parameter");
  const std::size_t users = graph_.users;
  const std::size_t items = graph_.items;
  const std::size_t modal_count = graph_.modalities.size();

  Forward f;
  f.id = leaves[id_index_];
  f.collaborative = gcn::collaborative_embeddings(graph_.adjacency, f.id, cfg_.gcn_layers);
  const ad::Var item_slice = ad::slice_rows(f.collaborative, users, items);

  std::vector<ad::Var> features;
  for (const auto& table : graph_.modalities) features.push_back(tape.constant(table.features));

  std::optional<ad::Var> local;
  if (!cfg_.ablation.no_hyper && modal_count > 0) {
    std::vector<hyper::LocalEmbeddings> stacks;
    for (std::size_t m = 0; m < modal_count; ++m) {
      const auto deps = hyper::hyperedge_dependencies(features[m], leaves[*hyperedge_index_[m]], graph_.adjacency.user_item);
      const ad::Var ri =
          hyper::gumbel_softmax_rows(deps.items, cfg_.gumbel_tau, noise.logistic_noise(items, cfg_.hyperedges));
      const ad::Var ru =
          hyper::gumbel_softmax_rows(deps.users, cfg_.gumbel_tau, noise.logistic_noise(users, cfg_.hyperedges));
      stacks.push_back(hyper::hypergraph_layers(ru, ri, item_slice, cfg_.hyper_layers, cfg_.dropout, noise));
    }
    local = hyper::fuse_local(stacks);
    for (std::size_t a = 0; a < modal_count; ++a)
      for (std::size_t b = a + 1; b < modal_count; ++b) {
        const ad::Var lu = hyper::hcl_loss(stacks[a].users, stacks[b].users, cfg_.tau, denominator(cfg_));
        const ad::Var li = hyper::hcl_loss(stacks[a].items, stacks[b].items, cfg_.tau, denominator(cfg_));
        f.hcl_users = f.hcl_users ? ad::add(*f.hcl_users, lu) : lu;
        f.hcl_items = f.hcl_items ? ad::add(*f.hcl_items, li) : li;
      }
  }

  std::optional<ad::Var> global;
  if (!cfg_.ablation.no_global) {
    const attn::AttentionParams p{leaves[*query_index_], leaves[*key_index_], leaves[*value_index_], cfg_.heads};
    global = attn::global_embeddings(f.collaborative, users, p, cfg_.attention, graph_.user_item, graph_.item_user);
  }

  if (global && local) {
    f.structural = attn::fuse_structural(*global, *local, cfg_.alpha, cfg_.beta);
  } else if (global) {
    f.structural = ad::scale(ad::l2_normalize_rows(*global), cfg_.alpha);
  } else if (local) {
    f.structural = ad::scale(ad::l2_normalize_rows(*local), cfg_.beta);
  }
  f.final = f.structural ? final_embeddings(f.collaborative, *f.structural) : f.collaborative;

  std::vector<ad::Var> modal;
  for (std::size_t m = 0; m < modal_count; ++m) {
    if (!projection_index_[m]) continue;
    const ad::Var w = leaves[*projection_index_[m]];
    f.projections.push_back(w);
    modal.push_back(gcn::modal_embeddings(graph_.adjacency, graph_.user_mean, features[m], w, cfg_.modal_layers));
  }
  for (std::size_t a = 0; a < modal.size(); ++a)
    for (std::size_t b = a + 1; b < modal.size(); ++b) {
      const ad::Var mu = gcn::mcl_loss(ad::slice_rows(modal[a], 0, users), ad::slice_rows(modal[b], 0, users),
                                       cfg_.tau, denominator(cfg_));
      const ad::Var mi = gcn::mcl_loss(ad::slice_rows(modal[a], users, items), ad::slice_rows(modal[b], users, items),
                                       cfg_.tau, denominator(cfg_));
      f.mcl_users = f.mcl_users ? ad::add(*f.mcl_users, mu) : mu;
      f.mcl_items = f.mcl_items ? ad::add(*f.mcl_items, mi) : mi;
    }
  return f;
}

Matrix Model::embeddings() const {
  ad::Tape tape;
  std::vector<ad::Var> consts;
  for (const auto& p : params_) consts.push_back(tape.constant(p.value));
  ExpectedNoise noise;
  return forward(tape, consts, noise).final.value();
}

ad::Var final_embeddings(ad::Var collaborative, ad::Var structural) {
  if (!collaborative.value().same_shape(structural.value())) {
    throw ShapeError("final_embeddings: " + shape_string(collaborative.value()) + " vs " +
                     shape_string(structural.value()));
  }
  return ad::add(collaborative, structural);
}

ad::Var batch_id_rows(ad::Var id, std::size_t user_count, const std::vector<data::BprTriple>& triples) {
  std::vector<std::size_t> rows;
  rows.reserve(3 * triples.size());
  for (const auto& t : triples) {
    rows.push_back(t.user);
    rows.push_back(user_count + t.positive);
    rows.push_back(user_count + t.negative);
  }
  return ad::gather_rows(id, std::move(rows));
}

ad::Var bpr_loss(ad::Var final, std::size_t user_count, const std::vector<data::BprTriple>& triples, double lambda1,
                 const std::vector<ad::Var>& regularized, bool sum_margin) {
  if (triples.empty()) throw std::invalid_argument("bpr_loss: empty batch");
  std::vector<std::size_t> u, p, n;
  for (const auto& t : triples) {
    u.push_back(t.user);
    p.push_back(user_count + t.positive);
    n.push_back(user_count + t.negative);
  }
  const ad::Var eu = ad::gather_rows(final, std::move(u));
  const ad::Var pos = ad::row_dot(eu, ad::gather_rows(final, std::move(p)));
  const ad::Var neg = ad::row_dot(eu, ad::gather_rows(final, std::move(n)));
  const ad::Var margin = sum_margin ? ad::add(pos, neg) : ad::sub(pos, neg);
  ad::Var loss = ad::scale(ad::sum(ad::log_sigmoid(margin)), -1.0);
  for (const ad::Var& r : regularized) loss = ad::add(loss, ad::scale(ad::sum_squares(r), lambda1));
  return loss;
}

ad::Var joint_loss(ad::Var bpr, const std::optional<ad::Var>& hcl_users, const std::optional<ad::Var>& hcl_items,
                   const std::optional<ad::Var>& mcl_users, const std::optional<ad::Var>& mcl_items, double lambda2,
                   double gamma) {
  ad::Var total = bpr;
  for (const auto* term : {&hcl_users, &hcl_items})
    if (*term) total = ad::add(total, ad::scale(**term, lambda2));
  for (const auto* term : {&mcl_users, &mcl_items})
    if (*term) total = ad::add(total, ad::scale(**term, gamma));
  return total;
}

std::vector<double> predict_scores(const Matrix& final, std::size_t user_count, std::size_t user,
                                   const std::vector<std::size_t>& items) {
  return eval::score_items(final, user_count, user, items);
}

}  // namespace srgf
