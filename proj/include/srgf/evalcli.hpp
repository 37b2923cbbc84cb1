#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "srgf/config.hpp"
#include "srgf/dataio.hpp"
#include "srgf/metrics.hpp"
#include "srgf/model.hpp"
#include "srgf/trainer.hpp"

namespace srgf::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

/// Feature rows in the input files are addressed by integer raw item id;
/// the result follows the dense item order of `items`.
Matrix reindex_features(const Matrix& raw, const data::IdMap& items, const std::string& source);

/// Reads `interactions.tsv` and every `features.<modality>.fmat` from
/// `input_dir` and splits per user.
data::PreparedData prepare_dataset(const std::filesystem::path& input_dir, const data::SplitRatios& ratios,
                                   std::uint64_t seed);

// FID is the unmasked data; RBM-D drops each user's k most recent train
// records, LHM-D keeps only the L most recent.
enum class DatasetVariant { Full, RecentMasked, LongHistoryMasked };

std::string dataset_variant_name(DatasetVariant v);
DatasetVariant parse_dataset_variant(const std::string& name);

struct MaskSettings {
  std::size_t recent_k = 2;
  std::size_t keep_last = 5;
};

data::InteractionDataset apply_variant(const data::InteractionDataset& ds, DatasetVariant v, const MaskSettings& mask);

struct TrainOutcome {
  Model model;
  TrainReport report;
  eval::TopNMetrics test;
};

/// Fits on the train partition with early stopping on validation and
/// scores the restored best state on the test partition at n = 10, 20.
TrainOutcome train_and_evaluate(const TrainConfig& cfg, const data::InteractionDataset& ds,
                                const std::vector<data::ModalFeatureTable>& features);

/// Test metrics of a model already in memory.
eval::TopNMetrics evaluate_model(const Model& model, const data::InteractionDataset& ds);

struct EvalRow {
  std::string variant;  ///< ablation tag
  std::string dataset;  ///< FID, RBM-D or LHM-D
  TrainConfig config;
  std::size_t parameters = 0;
  std::size_t epoch = 0;  ///< best epoch; 0 when not trained here
  std::size_t epochs_run = 0;
  std::string stop_reason;
  double recall10 = 0.0, recall20 = 0.0, ndcg10 = 0.0, ndcg20 = 0.0;
  std::size_t users = 0;
  std::string error;  ///< non-empty when the run failed

  bool ok() const { return error.empty(); }
};

EvalRow make_row(const Model& model, const std::string& dataset, const eval::TopNMetrics& metrics);

/// Tab-separated table, one line per row.
void write_table(std::ostream& out, const std::vector<EvalRow>& rows);
nlohmann::ordered_json report_json(const std::vector<EvalRow>& rows);

/// Writes `path` as TSV and the JSON sidecar next to it with extension .json.
void write_report(const std::filesystem::path& path, const std::vector<EvalRow>& rows);

struct AblationPlan {
  TrainConfig base;
  std::vector<Ablation> variants;  ///< combined with the base flags; base itself always runs first
  std::vector<DatasetVariant> datasets{DatasetVariant::Full};
  MaskSettings mask;
};

/// One row per (dataset, variant). A failing run is reported in its row and
/// the remaining runs continue.
std::vector<EvalRow> run_ablation(const data::PreparedData& data, const AblationPlan& plan);

/// Entry point of the `srgf` tool. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace srgf::cli
