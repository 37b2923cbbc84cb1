#pragma once

// Small graphs and dense reference computations shared by the model tests.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "srgf/autodiff.hpp"
#include "srgf/dataio.hpp"
#include "srgf/random.hpp"

namespace srgf::testing {

inline data::InteractionDataset make_dataset(std::size_t users, std::size_t items,
                                             const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<data::InteractionRecord> train;
  for (auto [u, i] : edges) train.push_back({u, i, std::nullopt});
  return data::InteractionDataset(users, items, std::move(train), {}, {});
}

inline data::InteractionDataset random_dataset(Rng& rng, std::size_t users, std::size_t items) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < users; ++u)
    for (std::size_t i = 0; i < items; ++i)
      if (rng.uniform() < 0.45) edges.emplace_back(u, i);
  if (edges.empty()) edges.emplace_back(rng.below(users), rng.below(items));
  return make_dataset(users, items, edges);
}

// Symmetric normalization computed on a dense adjacency.
inline Matrix dense_normalized(const data::InteractionDataset& ds) {
  const std::size_t u = ds.user_count();
  const std::size_t n = u + ds.item_count();
  Matrix a(n, n);
  for (std::size_t user = 0; user < u; ++user)
    for (std::size_t item : ds.train_items()[user]) {
      a(user, u + item) = 1.0;
      a(u + item, user) = 1.0;
    }
  std::vector<double> deg(n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) deg[r] += a(r, c);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      if (a(r, c) != 0.0) a(r, c) /= std::sqrt(deg[r] * deg[c]);
  return a;
}

inline Matrix eval(const std::function<ad::Var(ad::Tape&)>& build) {
  ad::Tape t;
  return build(t).value();
}

struct PlantedData {
  data::InteractionDataset dataset;
  std::vector<data::ModalFeatureTable> features;
};

/// Users fall into three groups that each interact with their own block of
/// five items (each edge kept with probability 0.8). Modal features are
/// random 8-d vectors. Every interaction is a train record unless
/// `holdout` moves one record per user into validation.
inline PlantedData planted_blocks(std::uint64_t seed, std::size_t users = 20, std::size_t items = 15,
                                  bool holdout = false) {
  Rng rng(seed);
  const std::size_t block = items / 3;
  std::vector<data::InteractionRecord> train, val;
  for (std::size_t u = 0; u < users; ++u) {
    const std::size_t b = u % 3;
    std::vector<data::InteractionRecord> mine;
    for (std::size_t i = b * block; i < (b + 1) * block; ++i)
      if (rng.uniform() < 0.8) mine.push_back({u, i, std::nullopt});
    if (mine.size() < 2) {
      mine.clear();
      mine.push_back({u, b * block, std::nullopt});
      mine.push_back({u, b * block + 1, std::nullopt});
    }
    if (holdout) {
      val.push_back(mine.back());
      mine.pop_back();
    }
    train.insert(train.end(), mine.begin(), mine.end());
  }
  PlantedData out{data::InteractionDataset(users, items, std::move(train), std::move(val), {}), {}};
  for (const char* name : {"visual", "textual"}) {
    Matrix f(items, 8);
    for (double& v : f.values()) v = rng.uniform(-1.0, 1.0);
    out.features.push_back({name, std::move(f)});
  }
  return out;
}

// Raw input for the command-line tool: 30 users in three taste groups over
// 30 items. Item ids are integers that do not follow first-appearance order;
// feature files carry one extra unused row.
inline void write_raw_input(const std::filesystem::path& dir, bool timestamps = true) {
  Rng rng(404);
  std::ofstream tsv(dir / "interactions.tsv");
  std::int64_t clock = 1'600'000'000;
  for (std::size_t u = 0; u < 30; ++u) {
    const std::size_t group = u % 3;
    for (std::size_t k = 0; k < 10; ++k) {
      if (rng.uniform() > 0.9) continue;
      const std::size_t item = (group * 10 + k) * 7 % 30;
      tsv << "user" << u << '\t' << item;
      if (timestamps) tsv << '\t' << clock;
      tsv << '\n';
      clock += 60 + static_cast<std::int64_t>(rng.below(600));
    }
    tsv << "user" << u << '\t' << (group * 10 + 10) * 7 % 30 << (timestamps ? "\t1700000000\n" : "\n");
  }
  for (const char* modality : {"visual", "textual"}) {
    Matrix f(31, 8);
    for (double& v : f.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    data::write_fmat(dir / (std::string("features.") + modality + ".fmat"), f);
  }
}

}  // namespace srgf::testing
