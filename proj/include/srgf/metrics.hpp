#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "srgf/matrix.hpp"

namespace srgf::eval {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Top-n item ids by descending score, ties broken by ascending id. Items in
/// `excluded` (sorted) are never returned.
std::vector<std::size_t> rank_items(std::span<const double> scores, const std::vector<std::size_t>& excluded,
                                    std::size_t n);

/// |top-n ∩ relevant| / |relevant|; `relevant` must be non-empty.
double recall_at_n(const std::vector<std::size_t>& ranked, const std::vector<std::size_t>& relevant, std::size_t n);

/// Binary-gain DCG over the top n divided by the ideal DCG over
/// min(n, |relevant|) positions.
double ndcg_at_n(const std::vector<std::size_t>& ranked, const std::vector<std::size_t>& relevant, std::size_t n);

struct TopNMetrics {
  std::vector<std::size_t> cutoffs;
  std::vector<double> recall;
  std::vector<double> ndcg;
  std::size_t users = 0;  ///< users with a non-empty relevant set

  double recall_at(std::size_t n) const;
  double ndcg_at(std::size_t n) const;
};

/// Scores every item for every user as the dot product of rows of
/// `embeddings` (users first, then items), removes each user's `excluded`
/// items and averages the metrics over users with relevant items. Throws
/// EvalError when no user has relevant items.
TopNMetrics evaluate_topn(const Matrix& embeddings, std::size_t user_count,
                          const std::vector<std::vector<std::size_t>>& excluded,
                          const std::vector<std::vector<std::size_t>>& relevant, const std::vector<std::size_t>& cutoffs);

/// Dot products of one user's row with the listed item rows.
std::vector<double> score_items(const Matrix& embeddings, std::size_t user_count, std::size_t user,
                                const std::vector<std::size_t>& items);

}  // namespace srgf::eval
