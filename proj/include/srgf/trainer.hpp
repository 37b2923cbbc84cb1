#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "srgf/dataio.hpp"
#include "srgf/model.hpp"

namespace srgf {

struct EpochStats {
  std::size_t epoch = 0;
  double bpr = 0.0;
  double hcl = 0.0;
  double mcl = 0.0;
  double total = 0.0;
  std::optional<double> val_recall;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::vector<double> best_trace;  ///< best val R@20 so far, per epoch
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  std::string stop_reason;
};

/// Patience counter over a metric where larger is better.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records one epoch; returns true when training should stop.
  bool update(double metric);
  bool improved() const { return improved_; }
  double best() const { return best_; }
  std::size_t stale() const { return stale_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  double best_ = 0.0;
  bool seen_ = false;
  bool improved_ = false;
};

class Trainer {
 public:
  /// Metric checked after each epoch; nullopt means "no validation data".
  using Validator = std::function<std::optional<double>(const Model&)>;

  Trainer(Model& model, const data::InteractionDataset& ds);

  /// One pass over `samples_per_epoch` sampled triples in mini-batches.
  /// Throws NumericError on a non-finite loss or parameter.
  EpochStats train_epoch();

  /// Joint loss on fixed triples with dropout off and noise-free Gumbel
  /// draws. Leaves the model untouched.
  double probe_loss(const std::vector<data::BprTriple>& triples) const;

  /// Val R@20 with train items masked, or nullopt when no user has
  /// validation items.
  std::optional<double> validation_recall() const;

  /// Trains until early stopping or the epoch budget and restores the best
  /// parameters and optimizer state.
  TrainReport fit();
  TrainReport fit(const Validator& validator);

  std::size_t epoch() const { return epoch_; }

 private:
  Model& model_;
  const data::InteractionDataset& ds_;
  Rng sampler_;
  Rng noise_;
  std::size_t epoch_ = 0;
};

}  // namespace srgf
