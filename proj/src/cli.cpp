#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <ostream>

#include "srgf/checkpoint.hpp"
#include "srgf/evalcli.hpp"
#include "srgf/log.hpp"

namespace srgf::cli {

namespace fs = std::filesystem;

namespace {

struct ConfigFlags {
  std::string config_file;
  std::string preset;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--preset", preset, "baby, sports or clothing");
    cmd->add_option("--set", overrides, "override a config key, key=value (repeatable)");
    cmd->add_option("--seed", seed, "random seed (wins over SRGF_SEED)");
  }

  TrainConfig resolve() const {
    TrainConfig cfg = config_file.empty() ? preset_config(preset.empty() ? "baby" : preset) : load_config(config_file);
    if (!config_file.empty() && !preset.empty()) apply_override(cfg, "preset=" + preset);
    for (const auto& kv : overrides) apply_override(cfg, kv);
    if (const char* env = std::getenv("SRGF_SEED"); env != nullptr && *env != '\0') apply_override(cfg, std::string("seed=") + env);
    if (seed) cfg.seed = *seed;
    validate(cfg);
    return cfg;
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string part = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!part.empty()) out.push_back(part);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

data::SplitRatios parse_ratios(const std::string& s) {
  unsigned a = 0, b = 0, c = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%u:%u:%u%c", &a, &b, &c, &tail) != 3 || a == 0 || a + b + c == 0) {
    throw ConfigError("bad split ratios '" + s + "' (expected a:b:c, e.g. 8:1:1)");
  }
  return {a, b, c};
}

struct LoadedModel {
  TrainConfig config;
  std::unique_ptr<Model> model;
};

LoadedModel load_model(const fs::path& model_dir, const fs::path& checkpoint, const data::PreparedData& data) {
  const fs::path ckpt = checkpoint.empty() ? model_dir / "model.ckpt" : checkpoint;
  if (!fs::exists(ckpt)) throw data::DataError("checkpoint not found: " + ckpt.string());
  const fs::path cfg_path = (checkpoint.empty() ? model_dir : ckpt.parent_path()) / "config.json";
  if (!fs::exists(cfg_path)) throw data::DataError("config not found next to checkpoint: " + cfg_path.string());
  LoadedModel out;
  out.config = load_config(cfg_path);
  out.model = std::make_unique<Model>(out.config, GraphContext::build(data.dataset, data.modalities, out.config.ablation));
  load_checkpoint(ckpt, *out.model);
  return out;
}

std::uint64_t env_seed(std::uint64_t fallback) {
  const char* env = std::getenv("SRGF_SEED");
  if (env == nullptr || *env == '\0') return fallback;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw ConfigError(std::string("SRGF_SEED is not an integer: ") + env);
  return v;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal graph recommender: prepare data, train, evaluate, ablate, recommend."};
  app.name("srgf");
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "debug, info, warn, error or off")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

  // prepare
  auto* prepare = app.add_subcommand("prepare", "split interactions and collect modal features");
  std::string in_dir, prep_out, ratios = "8:1:1";
  std::optional<std::uint64_t> prep_seed;
  prepare->add_option("--input", in_dir, "directory with interactions.tsv and features.<modality>.fmat")
      ->required()
      ->check(CLI::ExistingDirectory);
  prepare->add_option("--out", prep_out, "output directory")->required();
  prepare->add_option("--ratios", ratios, "train:val:test per user");
  prepare->add_option("--seed", prep_seed, "split seed");

  // train
  auto* train = app.add_subcommand("train", "train a model and report test metrics");
  std::string data_dir, train_out;
  ConfigFlags train_cfg;
  train->add_option("--data", data_dir, "prepared dataset directory")->required();
  train->add_option("--out", train_out, "output directory for checkpoint, config and report")->required();
  train_cfg.attach(train);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score a trained model on the test partition");
  std::string eval_data, eval_model, eval_ckpt, eval_report;
  evaluate->add_option("--data", eval_data, "prepared dataset directory")->required();
  evaluate->add_option("--model", eval_model, "training output directory");
  evaluate->add_option("--checkpoint", eval_ckpt, "checkpoint file (config.json must sit beside it)");
  evaluate->add_option("--out", eval_report, "write the report here (TSV plus JSON sidecar)");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train and evaluate ablation variants");
  std::string abl_data, abl_out, variants, datasets = "FID";
  MaskSettings mask;
  ConfigFlags abl_cfg;
  ablate->add_option("--data", abl_data, "prepared dataset directory")->required();
  ablate->add_option("--out", abl_out, "report path (TSV; JSON sidecar alongside)")->required();
  ablate->add_option("--variants", variants, "comma list of w/GT, w/MCL, w/v, w/t, w/h (use + to combine)");
  ablate->add_option("--datasets", datasets, "comma list of FID, RBM-D, LHM-D");
  ablate->add_option("--mask-k", mask.recent_k, "records dropped per user for RBM-D");
  ablate->add_option("--mask-l", mask.keep_last, "records kept per user for LHM-D");
  abl_cfg.attach(ablate);

  // recommend
  auto* recommend = app.add_subcommand("recommend", "top-n items for one user");
  std::string rec_data, rec_model, rec_ckpt, rec_user;
  std::size_t rec_n = 10;
  recommend->add_option("--data", rec_data, "prepared dataset directory")->required();
  recommend->add_option("--model", rec_model, "training output directory");
  recommend->add_option("--checkpoint", rec_ckpt, "checkpoint file (config.json must sit beside it)");
  recommend->add_option("--user", rec_user, "raw user id")->required();
  recommend->add_option("--n", rec_n, "list length")->check(CLI::PositiveNumber);

  for (auto* cmd : {evaluate, recommend}) {
    cmd->callback([cmd] {
      if (cmd->count("--model") == 0 && cmd->count("--checkpoint") == 0) {
        throw CLI::RequiredError("--model or --checkpoint");
      }
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  static const std::map<std::string, log::Level> levels{{"debug", log::Level::Debug},
                                                        {"info", log::Level::Info},
                                                        {"warn", log::Level::Warn},
                                                        {"error", log::Level::Error},
                                                        {"off", log::Level::Off}};
  log::set_level(levels.at(log_level));

  try {
    if (*prepare) {
      const std::uint64_t seed = prep_seed ? *prep_seed : env_seed(TrainConfig{}.seed);
      const auto prepared = prepare_dataset(in_dir, parse_ratios(ratios), seed);
      data::save_prepared(prep_out, prepared);
      out << "prepared " << prepared.dataset.user_count() << " users, " << prepared.dataset.item_count()
          << " items into " << prep_out << '\n';
    } else if (*train) {
      const TrainConfig cfg = train_cfg.resolve();
      const auto prepared = data::load_prepared(data_dir);
      TrainOutcome outcome = train_and_evaluate(cfg, prepared.dataset, prepared.modalities);
      fs::create_directories(train_out);
      save_checkpoint(fs::path(train_out) / "model.ckpt", outcome.model);
      save_config(fs::path(train_out) / "config.json", cfg);
      EvalRow row = make_row(outcome.model, dataset_variant_name(DatasetVariant::Full), outcome.test);
      row.epoch = outcome.report.best_epoch;
      row.epochs_run = outcome.report.epochs.size();
      row.stop_reason = outcome.report.stop_reason;
      write_report(fs::path(train_out) / "report.tsv", {row});
      write_table(out, {row});
    } else if (*evaluate) {
      const auto prepared = data::load_prepared(eval_data);
      const LoadedModel loaded = load_model(eval_model, eval_ckpt, prepared);
      const EvalRow row = make_row(*loaded.model, "FID", evaluate_model(*loaded.model, prepared.dataset));
      if (!eval_report.empty()) write_report(eval_report, {row});
      write_table(out, {row});
    } else if (*ablate) {
      AblationPlan plan;
      plan.base = abl_cfg.resolve();
      for (const auto& v : split_list(variants)) plan.variants.push_back(parse_ablation(v));
      plan.datasets.clear();
      for (const auto& d : split_list(datasets)) plan.datasets.push_back(parse_dataset_variant(d));
      if (plan.datasets.empty()) throw ConfigError("--datasets is empty");
      plan.mask = mask;
      const auto prepared = data::load_prepared(abl_data);
      const auto rows = run_ablation(prepared, plan);
      write_report(abl_out, rows);
      write_table(out, rows);
      for (const auto& r : rows)
        if (!r.ok()) return kDataError;
    } else if (*recommend) {
      const auto prepared = data::load_prepared(rec_data);
      const auto user = prepared.users.find(rec_user);
      if (!user) throw data::DataError("unknown user id '" + rec_user + "'");
      const LoadedModel loaded = load_model(rec_model, rec_ckpt, prepared);
      const Matrix emb = loaded.model->embeddings();
      std::vector<std::size_t> all(prepared.dataset.item_count());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const auto scores = predict_scores(emb, prepared.dataset.user_count(), *user, all);
      const auto ranked = eval::rank_items(scores, prepared.dataset.train_items()[*user], rec_n);
      for (std::size_t i : ranked) out << prepared.items.raw(i) << '\n';
      if (ranked.size() < rec_n) {
        log::warn("recommend.short_list", {{"user", rec_user},
                                           {"requested", log::num(rec_n)},
                                           {"available", log::num(ranked.size())}});
        err << "warning: only " << ranked.size() << " candidate items for user " << rec_user << '\n';
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

}  // namespace srgf::cli
