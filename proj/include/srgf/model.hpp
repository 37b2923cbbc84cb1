#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "srgf/adam.hpp"
#include "srgf/autodiff.hpp"
#include "srgf/config.hpp"
#include "srgf/dataio.hpp"
#include "srgf/noise.hpp"

namespace srgf {

/// Non-finite loss or parameter during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Parameter {
  std::string name;
  Matrix value;
};

/// Graph operators derived from the train partition plus the modal features
/// that survive the ablation flags.
struct GraphContext {
  std::size_t users = 0;
  std::size_t items = 0;
  data::NormalizedAdjacency adjacency;
  SparseMatrix user_mean;
  SparseMatrix user_item;  ///< interaction pattern, users x items
  SparseMatrix item_user;
  std::vector<data::ModalFeatureTable> modalities;

  static GraphContext build(const data::InteractionDataset& ds, const std::vector<data::ModalFeatureTable>& features,
                            const Ablation& ablation);
};

/// Result of one forward pass. Optional terms are absent when the
/// corresponding component is switched off or fewer than two modalities are
/// active.
struct Forward {
  ad::Var id;             ///< E^id leaf
  ad::Var collaborative;  ///< E^id_lge
  std::optional<ad::Var> structural;
  ad::Var final;          ///< E*
  std::optional<ad::Var> hcl_users, hcl_items;
  std::optional<ad::Var> mcl_users, mcl_items;
  std::vector<ad::Var> projections;  ///< W_m leaves, regularized with the batch
};

class Model {
 public:
  /// Xavier-uniform initialization from `cfg.seed`. Values are rounded to
  /// float32 so that checkpoints reproduce the state exactly.
  Model(const TrainConfig& cfg, GraphContext graph);

  const TrainConfig& config() const { return cfg_; }
  const GraphContext& graph() const { return graph_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  const Parameter* find(const std::string& name) const;

  AdamState& optimizer() { return adam_; }
  const AdamState& optimizer() const { return adam_; }

  /// One leaf per parameter, in parameter order.
  std::vector<ad::Var> leaves(ad::Tape& tape) const;
  Forward forward(ad::Tape& tape, const std::vector<ad::Var>& leaves, NoiseSource& noise) const;

  /// E* from an evaluation pass (no noise, no dropout).
  Matrix embeddings() const;

 private:
  std::size_t add_parameter(std::string name, std::size_t rows, std::size_t cols, Rng& rng);

  TrainConfig cfg_;
  GraphContext graph_;
  std::vector<Parameter> params_;
  AdamState adam_;
  std::size_t id_index_ = 0;
  std::vector<std::optional<std::size_t>> projection_index_;
  std::vector<std::optional<std::size_t>> hyperedge_index_;
  std::optional<std::size_t> query_index_, key_index_, value_index_;
};

/// Rounds every entry to the nearest float32.
void round_to_float(Matrix& m);

/// E* = E^id_lge + E_str.
ad::Var final_embeddings(ad::Var collaborative, ad::Var structural);

/// -sum ln sigmoid(r+ - r-) + lambda1 * sum of squared entries of `regularized`.
/// `sum_margin` uses r+ + r- instead of the difference.
ad::Var bpr_loss(ad::Var final, std::size_t user_count, const std::vector<data::BprTriple>& triples, double lambda1,
                 const std::vector<ad::Var>& regularized, bool sum_margin = false);

/// Batch rows of E^id (user, positive and negative of every triple).
ad::Var batch_id_rows(ad::Var id, std::size_t user_count, const std::vector<data::BprTriple>& triples);

/// L_BPR + lambda2 (HCL_u + HCL_i) + gamma (MCL_u + MCL_i); absent terms count as zero.
ad::Var joint_loss(ad::Var bpr, const std::optional<ad::Var>& hcl_users, const std::optional<ad::Var>& hcl_items,
                   const std::optional<ad::Var>& mcl_users, const std::optional<ad::Var>& mcl_items, double lambda2,
                   double gamma);

/// Scores for `items` of `user` from the final embeddings. Throws
/// std::out_of_range on unknown ids.
std::vector<double> predict_scores(const Matrix& final, std::size_t user_count, std::size_t user,
                                   const std::vector<std::size_t>& items);

}  // namespace srgf
