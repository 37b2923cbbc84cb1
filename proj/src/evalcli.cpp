#include "srgf/evalcli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "srgf/log.hpp"

namespace srgf::cli {

namespace fs = std::filesystem;

Matrix reindex_features(const Matrix& raw, const data::IdMap& items, const std::string& source) {
  Matrix out(items.size(), raw.cols());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string& id = items.raw(i);
    std::size_t row = 0;
    const auto [end, ec] = std::from_chars(id.data(), id.data() + id.size(), row);
    if (ec != std::errc() || end != id.data() + id.size()) {
      throw data::DataError(source + ": item id '" + id + "' is not a feature row index");
    }
    if (row >= raw.rows()) {
      throw data::DataError(source + ": item id " + id + " has no feature row (" + std::to_string(raw.rows()) +
                            " rows)");
    }
    std::copy(raw.row(row).begin(), raw.row(row).end(), out.row(i).begin());
  }
  return out;
}

data::PreparedData prepare_dataset(const fs::path& input_dir, const data::SplitRatios& ratios, std::uint64_t seed) {
  data::InteractionLog log = data::load_interactions(input_dir / "interactions.tsv");
  data::PreparedData out;
  out.seed = seed;
  out.ratios = ratios;
  out.dataset = data::split_dataset(log.records, log.users.size(), log.items.size(), ratios, seed);
  out.users = std::move(log.users);
  out.items = std::move(log.items);

  std::vector<fs::path> feature_files;
  if (fs::is_directory(input_dir)) {
    for (const auto& entry : fs::directory_iterator(input_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.starts_with("features.") && name.ends_with(".fmat")) feature_files.push_back(entry.path());
    }
  }
  std::sort(feature_files.begin(), feature_files.end());
  for (const auto& path : feature_files) {
    std::string name = path.filename().string();
    name = name.substr(9, name.size() - 9 - 5);
    out.modalities.push_back({name, reindex_features(data::read_fmat(path), out.items, path.string())});
  }
  log::info("prepare", {{"users", log::num(out.dataset.user_count())},
                        {"items", log::num(out.dataset.item_count())},
                        {"train", log::num(out.dataset.train().size())},
                        {"val", log::num(out.dataset.val().size())},
                        {"test", log::num(out.dataset.test().size())},
                        {"modalities", log::num(out.modalities.size())}});
  return out;
}

std::string dataset_variant_name(DatasetVariant v) {
  switch (v) {
    case DatasetVariant::Full: return "FID";
    case DatasetVariant::RecentMasked: return "RBM-D";
    case DatasetVariant::LongHistoryMasked: return "LHM-D";
  }
  return "?";
}

DatasetVariant parse_dataset_variant(const std::string& name) {
  for (auto v : {DatasetVariant::Full, DatasetVariant::RecentMasked, DatasetVariant::LongHistoryMasked})
    if (dataset_variant_name(v) == name) return v;
  throw ConfigError("unknown dataset variant '" + name + "' (expected FID, RBM-D or LHM-D)");
}

data::InteractionDataset apply_variant(const data::InteractionDataset& ds, DatasetVariant v, const MaskSettings& mask) {
  switch (v) {
    case DatasetVariant::RecentMasked: return data::mask_dataset(ds, data::MaskMode::RecentK, mask.recent_k);
    case DatasetVariant::LongHistoryMasked: return data::mask_dataset(ds, data::MaskMode::KeepLastL, mask.keep_last);
    case DatasetVariant::Full: break;
  }
  return ds;
}

eval::TopNMetrics evaluate_model(const Model& model, const data::InteractionDataset& ds) {
  return eval::evaluate_topn(model.embeddings(), ds.user_count(), ds.train_items(), ds.test_items(), {10, 20});
}

TrainOutcome train_and_evaluate(const TrainConfig& cfg, const data::InteractionDataset& ds,
                                const std::vector<data::ModalFeatureTable>& features) {
  Model model(cfg, GraphContext::build(ds, features, cfg.ablation));
  TrainReport report;
  {
    Trainer trainer(model, ds);
    report = trainer.fit();
  }
  const auto test = evaluate_model(model, ds);
  return {std::move(model), std::move(report), test};
}

EvalRow make_row(const Model& model, const std::string& dataset, const eval::TopNMetrics& metrics) {
  EvalRow row;
  row.variant = ablation_tag(model.config().ablation);
  row.dataset = dataset;
  row.config = model.config();
  row.parameters = model.parameter_count();
  row.recall10 = metrics.recall_at(10);
  row.recall20 = metrics.recall_at(20);
  row.ndcg10 = metrics.ndcg_at(10);
  row.ndcg20 = metrics.ndcg_at(20);
  row.users = metrics.users;
  return row;
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_table(std::ostream& out, const std::vector<EvalRow>& rows) {
  out << "variant\tdataset\tR@10\tR@20\tN@10\tN@20\tepoch\tseed\n";
  for (const auto& r : rows) {
    out << r.variant << '\t' << r.dataset << '\t';
    if (r.ok()) {
      out << fixed(r.recall10) << '\t' << fixed(r.recall20) << '\t' << fixed(r.ndcg10) << '\t' << fixed(r.ndcg20);
    } else {
      out << "NA\tNA\tNA\tNA";
    }
    out << '\t' << r.epoch << '\t' << r.config.seed << '\n';
  }
}

nlohmann::ordered_json report_json(const std::vector<EvalRow>& rows) {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["variant"] = r.variant;
    j["dataset"] = r.dataset;
    j["status"] = r.ok() ? "ok" : "failed";
    if (!r.ok()) j["error"] = r.error;
    if (r.ok()) {
      j["metrics"] = {{"R@10", r.recall10}, {"R@20", r.recall20}, {"N@10", r.ndcg10}, {"N@20", r.ndcg20}};
      j["users"] = r.users;
    }
    j["epoch"] = r.epoch;
    j["epochs_run"] = r.epochs_run;
    if (!r.stop_reason.empty()) j["stop_reason"] = r.stop_reason;
    j["seed"] = r.config.seed;
    j["parameters"] = r.parameters;
    j["config_digest"] = digest_hex(config_digest(r.config));
    j["config"] = to_json(r.config);
    list.push_back(std::move(j));
  }
  return {{"format", "srgf-report-1"}, {"rows", std::move(list)}};
}

void write_report(const fs::path& path, const std::vector<EvalRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream tsv(path, std::ios::binary);
  if (!tsv) throw data::DataError("cannot write report " + path.string());
  write_table(tsv, rows);
  fs::path sidecar = path;
  sidecar.replace_extension(".json");
  std::ofstream json(sidecar, std::ios::binary);
  if (!json) throw data::DataError("cannot write report " + sidecar.string());
  json << report_json(rows).dump(2) << '\n';
}

std::vector<EvalRow> run_ablation(const data::PreparedData& data, const AblationPlan& plan) {
  std::vector<Ablation> variants{plan.base.ablation};
  for (const Ablation& v : plan.variants) {
    Ablation merged = plan.base.ablation;
    merged.no_global |= v.no_global;
    merged.no_mcl |= v.no_mcl;
    merged.no_visual |= v.no_visual;
    merged.no_textual |= v.no_textual;
    merged.no_hyper |= v.no_hyper;
    if (std::find(variants.begin(), variants.end(), merged) == variants.end()) variants.push_back(merged);
  }

  std::vector<EvalRow> rows;
  for (DatasetVariant dv : plan.datasets) {
    const std::string dname = dataset_variant_name(dv);
    std::optional<data::InteractionDataset> ds;
    std::string dataset_error;
    try {
      ds = apply_variant(data.dataset, dv, plan.mask);
    } catch (const std::exception& e) {
      dataset_error = e.what();
    }
    for (const Ablation& a : variants) {
      TrainConfig cfg = plan.base;
      cfg.ablation = a;
      EvalRow row;
      row.variant = ablation_tag(a);
      row.dataset = dname;
      row.config = cfg;
      if (!ds) {
        row.error = dataset_error;
      } else {
        log::info("ablation.run", {{"variant", row.variant}, {"dataset", dname}});
        try {
          TrainOutcome outcome = train_and_evaluate(cfg, *ds, data.modalities);
          row = make_row(outcome.model, dname, outcome.test);
          row.epoch = outcome.report.best_epoch;
          row.epochs_run = outcome.report.epochs.size();
          row.stop_reason = outcome.report.stop_reason;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
      }
      if (!row.ok()) log::error("ablation.failed", {{"variant", row.variant}, {"dataset", dname}, {"error", row.error}});
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace srgf::cli
