#include "srgf/dataio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "srgf/log.hpp"

namespace srgf::data {

namespace fs = std::filesystem;

// ---- id maps ---------------------------------------------------------------

std::size_t IdMap::intern(const std::string& raw) {
  auto [it, inserted] = index_.try_emplace(raw, raw_.size());
  if (inserted) raw_.push_back(raw);
  return it->second;
}

std::optional<std::size_t> IdMap::find(const std::string& raw) const {
  auto it = index_.find(raw);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void IdMap::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < raw_.size(); ++i) out << i << '\t' << raw_[i] << '\n';
}

IdMap IdMap::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  IdMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected index<TAB>raw_id");
    if (map.intern(line.substr(tab + 1)) != line_no - 1) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": id map is not dense or has duplicates");
    }
  }
  return map;
}

// ---- interaction logs ------------------------------------------------------

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

std::string where(const std::string& source, std::size_t line_no) { return source + ":" + std::to_string(line_no); }

}  // namespace

InteractionLog parse_interactions(std::istream& in, const std::string& source) {
  InteractionLog log;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  std::size_t duplicates = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 2 || fields.size() > 3) {
      throw DataError(where(source, line_no) + ": expected 2 or 3 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) throw DataError(where(source, line_no) + ": empty user or item id");
    std::optional<std::int64_t> ts;
    if (fields.size() == 3 && !fields[2].empty()) {
      std::int64_t v = 0;
      if (!parse_int(fields[2], v)) {
        throw DataError(where(source, line_no) + ": timestamp '" + std::string(fields[2]) + "' is not an integer");
      }
      ts = v;
    }
    const std::size_t u = log.users.intern(std::string(fields[0]));
    const std::size_t i = log.items.intern(std::string(fields[1]));
    auto [it, inserted] = seen.try_emplace({u, i}, log.records.size());
    if (inserted) {
      log.records.push_back({u, i, ts});
      continue;
    }
    ++duplicates;
    auto& kept = log.records[it->second].timestamp;
    if (ts && (!kept || *ts < *kept)) kept = ts;
  }
  if (duplicates > 0) log::info("data.dedup", {{"source", source}, {"duplicates", log::num(duplicates)}});
  return log;
}

InteractionLog load_interactions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read interactions file " + path.string());
  return parse_interactions(in, path.string());
}

// ---- dataset ---------------------------------------------------------------

namespace {

std::vector<std::vector<std::size_t>> group_items(std::size_t users, const std::vector<InteractionRecord>& records) {
  std::vector<std::vector<std::size_t>> out(users);
  for (const auto& r : records) out[r.user].push_back(r.item);
  for (auto& items : out) std::sort(items.begin(), items.end());
  return out;
}

}  // namespace

InteractionDataset::InteractionDataset(std::size_t user_count, std::size_t item_count,
                                       std::vector<InteractionRecord> train, std::vector<InteractionRecord> val,
                                       std::vector<InteractionRecord> test)
    : user_count_(user_count),
      item_count_(item_count),
      train_(std::move(train)),
      val_(std::move(val)),
      test_(std::move(test)) {
  std::map<std::pair<std::size_t, std::size_t>, int> owner;
  int part = 0;
  for (const auto* records : {&train_, &val_, &test_}) {
    for (const auto& r : *records) {
      if (r.user >= user_count_ || r.item >= item_count_) {
        throw DataError("record (" + std::to_string(r.user) + "," + std::to_string(r.item) + ") outside " +
                        std::to_string(user_count_) + " users x " + std::to_string(item_count_) + " items");
      }
      auto [it, inserted] = owner.try_emplace({r.user, r.item}, part);
      if (!inserted) {
        throw DataError("pair (" + std::to_string(r.user) + "," + std::to_string(r.item) +
                        ") appears twice across partitions");
      }
    }
    ++part;
  }
  train_items_ = group_items(user_count_, train_);
  val_items_ = group_items(user_count_, val_);
  test_items_ = group_items(user_count_, test_);
}

bool InteractionDataset::has_train_edge(std::size_t user, std::size_t item) const {
  const auto& items = train_items_.at(user);
  return std::binary_search(items.begin(), items.end(), item);
}

bool InteractionDataset::has_timestamps() const {
  for (const auto* records : {&train_, &val_, &test_})
    for (const auto& r : *records)
      if (!r.timestamp) return false;
  return true;
}

double InteractionDataset::sparsity() const {
  const double total = static_cast<double>(train_.size() + val_.size() + test_.size());
  return 1.0 - total / (static_cast<double>(user_count_) * static_cast<double>(item_count_));
}

SplitCounts split_counts(std::size_t n, const SplitRatios& ratios) {
  const std::size_t total = ratios.train + ratios.val + ratios.test;
  if (total == 0 || ratios.train == 0) throw std::invalid_argument("split ratios need a positive train share");
  SplitCounts c;
  if (n == 0) return c;
  c.test = ratios.test ? std::max<std::size_t>(1, n * ratios.test / total) : 0;
  c.val = ratios.val ? std::max<std::size_t>(1, n * ratios.val / total) : 0;
  // Train keeps at least one record; validation yields first, then test.
  while (c.test + c.val >= n && c.val > 0) --c.val;
  while (c.test + c.val >= n && c.test > 0) --c.test;
  c.train = n - c.test - c.val;
  return c;
}

InteractionDataset split_dataset(const std::vector<InteractionRecord>& records, std::size_t user_count,
                                 std::size_t item_count, const SplitRatios& ratios, std::uint64_t seed) {
  if (records.empty()) throw DataError("split_dataset: no interaction records");
  std::vector<std::vector<InteractionRecord>> per_user(user_count);
  for (const auto& r : records) {
    if (r.user >= user_count) throw DataError("split_dataset: user id out of range");
    per_user[r.user].push_back(r);
  }
  Rng rng(seed);
  std::vector<InteractionRecord> train, val, test;
  for (std::size_t u = 0; u < user_count; ++u) {
    auto& history = per_user[u];
    if (history.empty()) throw DataError("split_dataset: user " + std::to_string(u) + " has no records");
    rng.shuffle(history);
    const SplitCounts c = split_counts(history.size(), ratios);
    std::size_t k = 0;
    for (; k < c.train; ++k) train.push_back(history[k]);
    for (; k < c.train + c.val; ++k) val.push_back(history[k]);
    for (; k < history.size(); ++k) test.push_back(history[k]);
  }
  return InteractionDataset(user_count, item_count, std::move(train), std::move(val), std::move(test));
}

// ---- graph -----------------------------------------------------------------

NormalizedAdjacency build_normalized_adjacency(const InteractionDataset& ds) {
  if (ds.train().empty()) throw DataError("build_normalized_adjacency: empty train partition");
  const std::size_t users = ds.user_count();
  const std::size_t nodes = ds.node_count();
  NormalizedAdjacency adj;
  adj.degree.assign(nodes, 0.0);
  for (const auto& r : ds.train()) {
    adj.degree[r.user] += 1.0;
    adj.degree[users + r.item] += 1.0;
  }
  std::vector<Triplet> full;
  std::vector<Triplet> block;
  full.reserve(2 * ds.train().size());
  block.reserve(ds.train().size());
  for (const auto& r : ds.train()) {
    const double w = 1.0 / std::sqrt(adj.degree[r.user] * adj.degree[users + r.item]);
    full.push_back({r.user, users + r.item, w});
    full.push_back({users + r.item, r.user, w});
    block.push_back({r.user, r.item, w});
  }
  adj.matrix = SparseMatrix::from_triplets(nodes, nodes, std::move(full));
  adj.user_item = SparseMatrix::from_triplets(users, ds.item_count(), std::move(block));
  return adj;
}

SparseMatrix user_mean_operator(const InteractionDataset& ds) {
  std::vector<Triplet> t;
  t.reserve(ds.train().size());
  for (const auto& r : ds.train()) t.push_back({r.user, r.item, 1.0});
  return SparseMatrix::from_triplets(ds.user_count(), ds.item_count(), std::move(t)).row_normalized();
}

// ---- modal features --------------------------------------------------------

namespace {

constexpr char kFmatMagic[5] = {'F', 'M', 'A', 'T', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

Matrix read_fmat(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read feature file " + path.string());
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, kFmatMagic, 5) != 0) {
    throw DataError(path.string() + ": not an FMAT1 feature file");
  }
  std::uint64_t rows = 0, cols = 0;
  try {
    rows = get_u64(in);
    cols = get_u64(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (cols == 0) throw DataError(path.string() + ": feature dimension is zero");
  std::vector<unsigned char> raw(rows * cols * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw DataError(path.string() + ": truncated payload, expected " + std::to_string(rows * cols) + " floats");
  }
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(raw[4 * i + b]) << (8 * b);
    const float f = std::bit_cast<float>(bits);
    if (!std::isfinite(f)) {
      throw DataError(path.string() + ": non-finite value at row " + std::to_string(i / cols) + ", column " +
                      std::to_string(i % cols));
    }
    m.values()[i] = f;
  }
  return m;
}

void write_fmat(const fs::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature file " + path.string());
  out.write(kFmatMagic, 5);
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  for (double v : m.values()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
  }
}

ModalFeatureTable load_modal_features(const fs::path& path, std::size_t item_count) {
  Matrix m = read_fmat(path);
  if (m.rows() != item_count) {
    throw DataError(path.string() + ": feature rows " + std::to_string(m.rows()) + " do not match item count " +
                    std::to_string(item_count));
  }
  std::string name = path.filename().string();
  if (name.starts_with("features.")) name = name.substr(9);
  if (name.ends_with(".fmat")) name = name.substr(0, name.size() - 5);
  return {name, std::move(m)};
}

// ---- negative sampling -----------------------------------------------------

std::vector<BprTriple> sample_bpr_triples(const InteractionDataset& ds, std::size_t count, Rng& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t u = 0; u < ds.user_count(); ++u) {
    const auto& items = ds.train_items()[u];
    if (items.empty()) continue;
    if (items.size() >= ds.item_count()) {
      log::warn("bpr.skip_user", {{"user", log::num(u)}, {"reason", "interacted with every item"}});
      continue;
    }
    eligible.push_back(u);
  }
  std::vector<BprTriple> out;
  if (eligible.empty()) return out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t u = eligible[rng.below(eligible.size())];
    const auto& items = ds.train_items()[u];
    const std::size_t pos = items[rng.below(items.size())];
    std::size_t neg = 0;
    do {
      neg = rng.below(ds.item_count());
    } while (std::binary_search(items.begin(), items.end(), neg));
    out.push_back({u, pos, neg});
  }
  return out;
}

std::vector<BprTriple> sample_bpr_triples(const InteractionDataset& ds, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  return sample_bpr_triples(ds, count, rng);
}

// ---- masking ---------------------------------------------------------------

InteractionDataset mask_dataset(const InteractionDataset& ds, MaskMode mode, std::size_t k_or_l) {
  std::vector<std::vector<std::size_t>> per_user(ds.user_count());
  for (std::size_t idx = 0; idx < ds.train().size(); ++idx) {
    const auto& r = ds.train()[idx];
    if (!r.timestamp) throw DataError("mask_dataset: train record without timestamp for user " + std::to_string(r.user));
    per_user[r.user].push_back(idx);
  }
  std::vector<bool> keep(ds.train().size(), false);
  for (auto& history : per_user) {
    if (history.empty()) continue;
    std::stable_sort(history.begin(), history.end(), [&](std::size_t a, std::size_t b) {
      return *ds.train()[a].timestamp < *ds.train()[b].timestamp;
    });
    const std::size_t n = history.size();
    const std::size_t kept = mode == MaskMode::RecentK ? (k_or_l >= n ? 1 : n - k_or_l)
                                                       : std::clamp<std::size_t>(k_or_l, 1, n);
    // RecentK keeps the oldest records, KeepLastL the newest.
    const std::size_t first = mode == MaskMode::RecentK ? 0 : n - kept;
    for (std::size_t j = first; j < first + kept; ++j) keep[history[j]] = true;
  }
  std::vector<InteractionRecord> train;
  for (std::size_t idx = 0; idx < ds.train().size(); ++idx)
    if (keep[idx]) train.push_back(ds.train()[idx]);
  return InteractionDataset(ds.user_count(), ds.item_count(), std::move(train), ds.val(), ds.test());
}

// ---- persistence -----------------------------------------------------------

void write_records(const fs::path& path, const std::vector<InteractionRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) {
    out << r.user << '\t' << r.item;
    if (r.timestamp) out << '\t' << *r.timestamp;
    out << '\n';
  }
}

std::vector<InteractionRecord> read_records(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<InteractionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    InteractionRecord r;
    bool ok = fields.size() >= 2 && fields.size() <= 3 && parse_int(fields[0], r.user) && parse_int(fields[1], r.item);
    if (ok && fields.size() == 3) {
      std::int64_t ts = 0;
      ok = parse_int(fields[2], ts);
      r.timestamp = ts;
    }
    if (!ok) throw DataError(where(path.string(), line_no) + ": malformed record");
    records.push_back(r);
  }
  return records;
}

void save_prepared(const fs::path& dir, const PreparedData& data) {
  fs::create_directories(dir);
  const auto& ds = data.dataset;
  write_records(dir / "train.tsv", ds.train());
  write_records(dir / "val.tsv", ds.val());
  write_records(dir / "test.tsv", ds.test());
  data.users.save(dir / "user_ids.tsv");
  data.items.save(dir / "item_ids.tsv");
  nlohmann::ordered_json modalities = nlohmann::ordered_json::array();
  for (const auto& m : data.modalities) {
    const std::string file = "features." + m.modality + ".fmat";
    write_fmat(dir / file, m.features);
    modalities.push_back({{"name", m.modality}, {"file", file}, {"dim", m.features.cols()}});
  }
  nlohmann::ordered_json manifest = {
      {"format", "srgf-split-1"},
      {"seed", data.seed},
      {"ratios", {data.ratios.train, data.ratios.val, data.ratios.test}},
      {"user_count", ds.user_count()},
      {"item_count", ds.item_count()},
      {"counts", {{"train", ds.train().size()}, {"val", ds.val().size()}, {"test", ds.test().size()}}},
      {"files",
       {{"train", "train.tsv"}, {"val", "val.tsv"}, {"test", "test.tsv"}, {"user_ids", "user_ids.tsv"},
        {"item_ids", "item_ids.tsv"}}},
      {"modalities", modalities},
  };
  std::ofstream out(dir / "split.json", std::ios::binary);
  if (!out) throw DataError("cannot write " + (dir / "split.json").string());
  out << manifest.dump(2) << '\n';
}

PreparedData load_prepared(const fs::path& dir) {
  const fs::path manifest_path = dir / "split.json";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw DataError("no prepared dataset at " + dir.string() + " (missing split.json)");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  PreparedData data;
  try {
    const auto& files = manifest.at("files");
    const std::size_t users = manifest.at("user_count").get<std::size_t>();
    const std::size_t items = manifest.at("item_count").get<std::size_t>();
    data.seed = manifest.at("seed").get<std::uint64_t>();
    const auto ratios = manifest.at("ratios").get<std::vector<unsigned>>();
    if (ratios.size() != 3) throw DataError(manifest_path.string() + ": ratios must have three entries");
    data.ratios = {ratios[0], ratios[1], ratios[2]};
    data.dataset = InteractionDataset(users, items, read_records(dir / files.at("train").get<std::string>()),
                                      read_records(dir / files.at("val").get<std::string>()),
                                      read_records(dir / files.at("test").get<std::string>()));
    data.users = IdMap::load(dir / files.at("user_ids").get<std::string>());
    data.items = IdMap::load(dir / files.at("item_ids").get<std::string>());
    for (const auto& m : manifest.at("modalities")) {
      auto table = load_modal_features(dir / m.at("file").get<std::string>(), items);
      table.modality = m.at("name").get<std::string>();
      data.modalities.push_back(std::move(table));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  return data;
}

}  // namespace srgf::data
