#include "srgf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace srgf::eval {

std::vector<std::size_t> rank_items(std::span<const double> scores, const std::vector<std::size_t>& excluded,
                                    std::size_t n) {
  std::vector<std::size_t> candidates;
  candidates.reserve(scores.size());
  auto skip = excluded.begin();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    while (skip != excluded.end() && *skip < i) ++skip;
    if (skip != excluded.end() && *skip == i) continue;
    candidates.push_back(i);
  }
  const auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  const std::size_t keep = std::min(n, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                    better);
  candidates.resize(keep);
  return candidates;
}

namespace {

bool contains(const std::vector<std::size_t>& sorted, std::size_t x) {
  return std::binary_search(sorted.begin(), sorted.end(), x);
}

std::vector<std::size_t> sorted_copy(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

double recall_at_n(const std::vector<std::size_t>& ranked, const std::vector<std::size_t>& relevant, std::size_t n) {
  if (relevant.empty()) throw EvalError("recall_at_n: empty relevant set");
  const auto rel = sorted_copy(relevant);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < std::min(n, ranked.size()); ++k) hits += contains(rel, ranked[k]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(rel.size());
}

double ndcg_at_n(const std::vector<std::size_t>& ranked, const std::vector<std::size_t>& relevant, std::size_t n) {
  if (relevant.empty()) throw EvalError("ndcg_at_n: empty relevant set");
  const auto rel = sorted_copy(relevant);
  double dcg = 0.0;
  for (std::size_t k = 0; k < std::min(n, ranked.size()); ++k)
    if (contains(rel, ranked[k])) dcg += 1.0 / std::log2(static_cast<double>(k) + 2.0);
  double ideal = 0.0;
  for (std::size_t k = 0; k < std::min(n, rel.size()); ++k) ideal += 1.0 / std::log2(static_cast<double>(k) + 2.0);
  return ideal > 0.0 ? dcg / ideal : 0.0;
}

double TopNMetrics::recall_at(std::size_t n) const {
  for (std::size_t k = 0; k < cutoffs.size(); ++k)
    if (cutoffs[k] == n) return recall[k];
  throw EvalError("no recall at cutoff " + std::to_string(n));
}

double TopNMetrics::ndcg_at(std::size_t n) const {
  for (std::size_t k = 0; k < cutoffs.size(); ++k)
    if (cutoffs[k] == n) return ndcg[k];
  throw EvalError("no ndcg at cutoff " + std::to_string(n));
}

std::vector<double> score_items(const Matrix& embeddings, std::size_t user_count, std::size_t user,
                                const std::vector<std::size_t>& items) {
  if (user >= user_count || user_count > embeddings.rows()) {
    throw std::out_of_range("score_items: unknown user " + std::to_string(user));
  }
  const std::size_t item_count = embeddings.rows() - user_count;
  const auto u = embeddings.row(user);
  std::vector<double> out;
  out.reserve(items.size());
  for (std::size_t i : items) {
    if (i >= item_count) throw std::out_of_range("score_items: unknown item " + std::to_string(i));
    const auto e = embeddings.row(user_count + i);
    double acc = 0.0;
    for (std::size_t c = 0; c < e.size(); ++c) acc += u[c] * e[c];
    out.push_back(acc);
  }
  return out;
}

TopNMetrics evaluate_topn(const Matrix& embeddings, std::size_t user_count,
                          const std::vector<std::vector<std::size_t>>& excluded,
                          const std::vector<std::vector<std::size_t>>& relevant, const std::vector<std::size_t>& cutoffs) {
  if (user_count > embeddings.rows() || excluded.size() != user_count || relevant.size() != user_count) {
    throw ShapeError("evaluate_topn: inconsistent user counts");
  }
  if (cutoffs.empty()) throw EvalError("evaluate_topn: no cutoffs");
  const std::size_t item_count = embeddings.rows() - user_count;
  const std::size_t deepest = *std::max_element(cutoffs.begin(), cutoffs.end());

  TopNMetrics out;
  out.cutoffs = cutoffs;
  out.recall.assign(cutoffs.size(), 0.0);
  out.ndcg.assign(cutoffs.size(), 0.0);
  std::vector<double> scores(item_count);
  for (std::size_t u = 0; u < user_count; ++u) {
    if (relevant[u].empty()) continue;
    const auto row = embeddings.row(u);
    for (std::size_t i = 0; i < item_count; ++i) {
      const auto e = embeddings.row(user_count + i);
      double acc = 0.0;
      for (std::size_t c = 0; c < e.size(); ++c) acc += row[c] * e[c];
      scores[i] = acc;
    }
    const auto ranked = rank_items(scores, excluded[u], deepest);
    for (std::size_t k = 0; k < cutoffs.size(); ++k) {
      out.recall[k] += recall_at_n(ranked, relevant[u], cutoffs[k]);
      out.ndcg[k] += ndcg_at_n(ranked, relevant[u], cutoffs[k]);
    }
    ++out.users;
  }
  if (out.users == 0) throw EvalError("evaluate_topn: no user has relevant items");
  for (std::size_t k = 0; k < cutoffs.size(); ++k) {
    out.recall[k] /= static_cast<double>(out.users);
    out.ndcg[k] /= static_cast<double>(out.users);
  }
  return out;
}

}  // namespace srgf::eval
