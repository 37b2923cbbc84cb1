#include "srgf/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace srgf {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct FlagName {
  const char* tag;
  bool Ablation::*flag;
};

constexpr FlagName kFlags[] = {
    {"w/GT", &Ablation::no_global}, {"w/MCL", &Ablation::no_mcl}, {"w/v", &Ablation::no_visual},
    {"w/t", &Ablation::no_textual}, {"w/h", &Ablation::no_hyper},
};

const char* mode_name(attn::AttentionMode m) {
  switch (m) {
    case attn::AttentionMode::Dense: return "dense";
    case attn::AttentionMode::Masked: return "masked";
    case attn::AttentionMode::Auto: break;
  }
  return "auto";
}

attn::AttentionMode parse_mode(const std::string& s) {
  if (s == "dense") return attn::AttentionMode::Dense;
  if (s == "masked") return attn::AttentionMode::Masked;
  if (s == "auto") return attn::AttentionMode::Auto;
  throw ConfigError("attention: expected dense, masked or auto, got '" + s + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  try {
    out = j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

void read_size(const json& j, const char* key, std::size_t& out) {
  const bool ok = j.is_number_unsigned() || (j.is_number_integer() && j.get<long long>() >= 0);
  if (!ok) throw ConfigError(std::string(key) + ": expected a non-negative integer");
  out = j.get<std::size_t>();
}

void read_number(const json& j, const char* key, double& out) {
  if (!j.is_number()) throw ConfigError(std::string(key) + ": expected a number");
  out = j.get<double>();
}

void read_bool(const json& j, const char* key, bool& out) {
  if (!j.is_boolean()) throw ConfigError(std::string(key) + ": expected true or false");
  out = j.get<bool>();
}

// Applies one top-level key. Returns false when the key is unknown.
bool apply_key(TrainConfig& cfg, const std::string& key, const json& v) {
  const char* k = key.c_str();
  if (key == "dim") read_size(v, k, cfg.dim);
  else if (key == "gcn_layers") read_size(v, k, cfg.gcn_layers);
  else if (key == "modal_layers") read_size(v, k, cfg.modal_layers);
  else if (key == "hyperedges") read_size(v, k, cfg.hyperedges);
  else if (key == "hyper_layers") read_size(v, k, cfg.hyper_layers);
  else if (key == "heads") read_size(v, k, cfg.heads);
  else if (key == "alpha") read_number(v, k, cfg.alpha);
  else if (key == "beta") read_number(v, k, cfg.beta);
  else if (key == "gamma") read_number(v, k, cfg.gamma);
  else if (key == "lambda1") read_number(v, k, cfg.lambda1);
  else if (key == "lambda2") read_number(v, k, cfg.lambda2);
  else if (key == "tau") read_number(v, k, cfg.tau);
  else if (key == "gumbel_tau") read_number(v, k, cfg.gumbel_tau);
  else if (key == "dropout") read_number(v, k, cfg.dropout);
  else if (key == "lr") read_number(v, k, cfg.lr);
  else if (key == "batch_size") read_size(v, k, cfg.batch_size);
  else if (key == "samples_per_epoch") read_size(v, k, cfg.samples_per_epoch);
  else if (key == "patience") read_size(v, k, cfg.patience);
  else if (key == "max_epochs") read_size(v, k, cfg.max_epochs);
  else if (key == "seed") {
    if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("seed: expected an integer");
    cfg.seed = v.get<std::uint64_t>();
  } else if (key == "in_batch_negatives") read_bool(v, k, cfg.in_batch_negatives);
  else if (key == "bpr_sum_margin") read_bool(v, k, cfg.bpr_sum_margin);
  else if (key == "attention") {
    std::string s;
    read(v, k, s);
    cfg.attention = parse_mode(s);
  } else if (key == "ablation") {
    if (v.is_string()) {
      cfg.ablation = parse_ablation(v.get<std::string>());
    } else if (v.is_object()) {
      for (const auto& [name, flag] : v.items()) {
        bool found = false;
        for (const FlagName& f : kFlags) {
          if (name == f.tag) {
            read_bool(flag, f.tag, cfg.ablation.*f.flag);
            found = true;
          }
        }
        if (!found) throw ConfigError("ablation: unknown flag '" + name + "'");
      }
    } else {
      throw ConfigError("ablation: expected a tag string or an object of flags");
    }
  } else {
    return false;
  }
  return true;
}

}  // namespace

std::string ablation_tag(const Ablation& a) {
  std::string out;
  for (const FlagName& f : kFlags) {
    if (!(a.*f.flag)) continue;
    if (!out.empty()) out += '+';
    out += f.tag;
  }
  return out.empty() ? "full" : out;
}

Ablation parse_ablation(const std::string& tag) {
  Ablation a;
  if (tag == "full" || tag.empty()) return a;
  std::stringstream ss(tag);
  std::string part;
  while (std::getline(ss, part, '+')) {
    bool found = false;
    for (const FlagName& f : kFlags) {
      if (part == f.tag) {
        a.*f.flag = true;
        found = true;
      }
    }
    if (!found) throw ConfigError("unknown ablation '" + part + "' (expected w/GT, w/MCL, w/v, w/t or w/h)");
  }
  return a;
}

TrainConfig preset_config(const std::string& name) {
  TrainConfig cfg;
  cfg.preset = name;
  cfg.heads = 4;
  cfg.gamma = 1e-6;
  if (name == "baby") {
    cfg.alpha = 0.1;
    cfg.beta = 0.3;
  } else if (name == "sports") {
    cfg.alpha = 0.6;
    cfg.beta = 0.3;
  } else if (name == "clothing") {
    cfg.alpha = 0.2;
    cfg.beta = 0.4;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected baby, sports or clothing)");
  }
  return cfg;
}

std::vector<std::string> preset_names() { return {"baby", "sports", "clothing"}; }

void validate(const TrainConfig& cfg) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(cfg.dim > 0, "dim must be positive");
  require(cfg.heads > 0 && cfg.dim % cfg.heads == 0, "dim must be divisible by heads");
  require(cfg.hyperedges > 0, "hyperedges must be positive");
  require(cfg.hyper_layers > 0, "hyper_layers must be positive");
  require(cfg.alpha >= 0.0 && cfg.alpha <= 1.0, "alpha must lie in [0, 1]");
  require(cfg.beta >= 0.0 && cfg.beta <= 1.0, "beta must lie in [0, 1]");
  require(cfg.gamma >= 0.0, "gamma must be non-negative");
  require(cfg.lambda1 >= 0.0, "lambda1 must be non-negative");
  require(cfg.lambda2 >= 0.0, "lambda2 must be non-negative");
  require(cfg.tau > 0.0, "tau must be positive");
  require(cfg.gumbel_tau > 0.0, "gumbel_tau must be positive");
  require(cfg.dropout >= 0.0 && cfg.dropout < 1.0, "dropout must lie in [0, 1)");
  require(cfg.lr > 0.0, "lr must be positive");
  require(cfg.batch_size > 0, "batch_size must be positive");
  require(cfg.max_epochs > 0, "max_epochs must be positive");
}

ordered_json to_json(const TrainConfig& cfg) {
  ordered_json j;
  j["preset"] = cfg.preset;
  j["dim"] = cfg.dim;
  j["gcn_layers"] = cfg.gcn_layers;
  j["modal_layers"] = cfg.modal_layers;
  j["hyperedges"] = cfg.hyperedges;
  j["hyper_layers"] = cfg.hyper_layers;
  j["heads"] = cfg.heads;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["gamma"] = cfg.gamma;
  j["lambda1"] = cfg.lambda1;
  j["lambda2"] = cfg.lambda2;
  j["tau"] = cfg.tau;
  j["gumbel_tau"] = cfg.gumbel_tau;
  j["dropout"] = cfg.dropout;
  j["lr"] = cfg.lr;
  j["batch_size"] = cfg.batch_size;
  j["samples_per_epoch"] = cfg.samples_per_epoch;
  j["patience"] = cfg.patience;
  j["max_epochs"] = cfg.max_epochs;
  j["seed"] = cfg.seed;
  j["in_batch_negatives"] = cfg.in_batch_negatives;
  j["bpr_sum_margin"] = cfg.bpr_sum_margin;
  j["attention"] = mode_name(cfg.attention);
  ordered_json flags = ordered_json::object();
  for (const FlagName& f : kFlags) flags[f.tag] = cfg.ablation.*f.flag;
  j["ablation"] = flags;
  return j;
}

TrainConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  TrainConfig cfg;
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) throw ConfigError("preset: expected a string");
    cfg = preset_config(j["preset"].get<std::string>());
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") continue;
    if (!apply_key(cfg, key, value)) throw ConfigError("unknown config key '" + key + "'");
  }
  validate(cfg);
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const TrainConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << to_json(cfg).dump(2) << '\n';
}

void apply_override(TrainConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  if (key == "preset") {
    if (!value.is_string()) throw ConfigError("preset: expected a name");
    const Ablation keep = cfg.ablation;
    const std::uint64_t seed = cfg.seed;
    cfg = preset_config(value.get<std::string>());
    cfg.ablation = keep;
    cfg.seed = seed;
  } else if (!apply_key(cfg, key, value)) {
    throw ConfigError("unknown config key '" + key + "'");
  }
  validate(cfg);
}

std::uint64_t config_digest(const TrainConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace srgf
