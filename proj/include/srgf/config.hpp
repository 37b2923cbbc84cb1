#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "srgf/globalattn.hpp"

namespace srgf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Components that can be switched off. Every flag only removes terms and
/// their parameters.
struct Ablation {
  bool no_global = false;   ///< w/GT
  bool no_mcl = false;      ///< w/MCL
  bool no_visual = false;   ///< w/v
  bool no_textual = false;  ///< w/t
  bool no_hyper = false;    ///< w/h

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

/// "full" or the active flags joined by '+', e.g. "w/GT+w/h".
std::string ablation_tag(const Ablation& a);
/// Parses "full", a single flag, or a '+'-joined list.
Ablation parse_ablation(const std::string& tag);

struct TrainConfig {
  std::string preset = "baby";
  std::size_t dim = 64;
  std::size_t gcn_layers = 2;
  std::size_t modal_layers = 1;
  std::size_t hyperedges = 16;
  std::size_t hyper_layers = 2;
  std::size_t heads = 4;
  double alpha = 0.1;
  double beta = 0.3;
  double gamma = 1e-6;
  double lambda1 = 1e-4;
  double lambda2 = 1e-3;
  double tau = 0.2;
  double gumbel_tau = 0.2;
  double dropout = 0.2;
  double lr = 1e-3;
  std::size_t batch_size = 2048;
  /// Triples per epoch; 0 means one per train interaction.
  std::size_t samples_per_epoch = 0;
  std::size_t patience = 20;
  std::size_t max_epochs = 1000;
  std::uint64_t seed = 2024;
  bool in_batch_negatives = false;
  bool bpr_sum_margin = false;
  attn::AttentionMode attention = attn::AttentionMode::Auto;
  Ablation ablation;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Per-dataset defaults: "baby", "sports", "clothing".
TrainConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Throws ConfigError on out-of-range values.
void validate(const TrainConfig& cfg);

nlohmann::ordered_json to_json(const TrainConfig& cfg);
/// Starts from the preset named in `j` (or the defaults) and applies every
/// other key. Unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j);

TrainConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const TrainConfig& cfg);

/// Applies `key=value`; the value is read as JSON when it parses, otherwise
/// as a string.
void apply_override(TrainConfig& cfg, const std::string& assignment);

/// FNV-1a over the canonical JSON form.
std::uint64_t config_digest(const TrainConfig& cfg);
std::string digest_hex(std::uint64_t digest);

}  // namespace srgf
