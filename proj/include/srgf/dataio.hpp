#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "srgf/matrix.hpp"
#include "srgf/random.hpp"

namespace srgf::data {

/// Malformed or inconsistent input data. Messages carry file and line where known.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InteractionRecord {
  std::size_t user = 0;
  std::size_t item = 0;
  std::optional<std::int64_t> timestamp;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

/// Raw string id <-> dense index, in order of first appearance.
class IdMap {
 public:
  std::size_t intern(const std::string& raw);
  std::optional<std::size_t> find(const std::string& raw) const;
  const std::string& raw(std::size_t index) const { return raw_.at(index); }
  std::size_t size() const { return raw_.size(); }
  const std::vector<std::string>& raw_ids() const { return raw_; }

  void save(const std::filesystem::path& path) const;
  static IdMap load(const std::filesystem::path& path);

 private:
  std::vector<std::string> raw_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct InteractionLog {
  std::vector<InteractionRecord> records;
  IdMap users;
  IdMap items;
};

/// Parses `user<TAB>item[<TAB>unix_timestamp]` lines. Duplicate (user, item)
/// pairs collapse onto their first occurrence and keep the earliest timestamp.
InteractionLog parse_interactions(std::istream& in, const std::string& source = "<stream>");
InteractionLog load_interactions(const std::filesystem::path& path);

struct SplitRatios {
  unsigned train = 8;
  unsigned val = 1;
  unsigned test = 1;
};

/// Train/validation/test partitions plus per-user item lookups.
class InteractionDataset {
 public:
  InteractionDataset() = default;
  /// Validates id ranges and partition disjointness.
  InteractionDataset(std::size_t user_count, std::size_t item_count, std::vector<InteractionRecord> train,
                     std::vector<InteractionRecord> val, std::vector<InteractionRecord> test);

  std::size_t user_count() const { return user_count_; }
  std::size_t item_count() const { return item_count_; }
  std::size_t node_count() const { return user_count_ + item_count_; }

  const std::vector<InteractionRecord>& train() const { return train_; }
  const std::vector<InteractionRecord>& val() const { return val_; }
  const std::vector<InteractionRecord>& test() const { return test_; }

  /// Sorted train items of each user (the neighbor sets of the train graph).
  const std::vector<std::vector<std::size_t>>& train_items() const { return train_items_; }
  const std::vector<std::vector<std::size_t>>& val_items() const { return val_items_; }
  const std::vector<std::vector<std::size_t>>& test_items() const { return test_items_; }

  bool has_train_edge(std::size_t user, std::size_t item) const;
  bool has_timestamps() const;

  /// 1 - |R| / (|U| |I|) over all partitions.
  double sparsity() const;

 private:
  std::size_t user_count_ = 0;
  std::size_t item_count_ = 0;
  std::vector<InteractionRecord> train_;
  std::vector<InteractionRecord> val_;
  std::vector<InteractionRecord> test_;
  std::vector<std::vector<std::size_t>> train_items_;
  std::vector<std::vector<std::size_t>> val_items_;
  std::vector<std::vector<std::size_t>> test_items_;
};

/// Per-user (train, val, test) sizes for a history of length n. Small
/// histories fill train first, then test, then validation.
struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};
SplitCounts split_counts(std::size_t n, const SplitRatios& ratios);

/// Random per-user partition, deterministic under `seed`.
InteractionDataset split_dataset(const std::vector<InteractionRecord>& records, std::size_t user_count,
                                 std::size_t item_count, const SplitRatios& ratios, std::uint64_t seed);

/// Symmetric D^{-1/2} A D^{-1/2} over the (users + items) bipartite train graph.
struct NormalizedAdjacency {
  SparseMatrix matrix;
  /// User rows x item columns block of `matrix`.
  SparseMatrix user_item;
  /// Node degrees, users first.
  std::vector<double> degree;
};

NormalizedAdjacency build_normalized_adjacency(const InteractionDataset& ds);

/// Row-normalized user x item train interactions, used to average item
/// features into user features.
SparseMatrix user_mean_operator(const InteractionDataset& ds);

struct ModalFeatureTable {
  std::string modality;
  Matrix features;
};

/// Binary feature file: "FMAT1", u64 rows, u64 cols, rows*cols little-endian
/// float32 values, row-major.
Matrix read_fmat(const std::filesystem::path& path);
void write_fmat(const std::filesystem::path& path, const Matrix& m);

/// Loads `features.<modality>.fmat`; the modality is taken from the file name.
ModalFeatureTable load_modal_features(const std::filesystem::path& path, std::size_t item_count);

struct BprTriple {
  std::size_t user = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;

  friend bool operator==(const BprTriple&, const BprTriple&) = default;
};

/// Users are drawn uniformly among those that have both a train item and an
/// unobserved item; positives uniformly from the user's train items and
/// negatives uniformly from the rest of the catalog by rejection.
std::vector<BprTriple> sample_bpr_triples(const InteractionDataset& ds, std::size_t count, Rng& rng);
std::vector<BprTriple> sample_bpr_triples(const InteractionDataset& ds, std::size_t count, std::uint64_t seed);

enum class MaskMode {
  /// Drop each user's k most recent train records.
  RecentK,
  /// Keep only each user's L most recent train records.
  KeepLastL,
};

/// Train-only masking; validation and test are untouched and every user keeps
/// at least one train record.
InteractionDataset mask_dataset(const InteractionDataset& ds, MaskMode mode, std::size_t k_or_l);

/// On-disk layout written by `prepare` and read back by every other command.
struct PreparedData {
  InteractionDataset dataset;
  IdMap users;
  IdMap items;
  std::vector<ModalFeatureTable> modalities;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

void save_prepared(const std::filesystem::path& dir, const PreparedData& data);
PreparedData load_prepared(const std::filesystem::path& dir);

void write_records(const std::filesystem::path& path, const std::vector<InteractionRecord>& records);
std::vector<InteractionRecord> read_records(const std::filesystem::path& path);

}  // namespace srgf::data
