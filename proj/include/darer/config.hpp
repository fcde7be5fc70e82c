#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "darer/model.hpp"
#include "darer/training.hpp"

namespace darer {

/// Flat run configuration: model keys plus training and path keys.
///
/// Model defaults follow the chosen variant's Mastodon presets
/// (rgcn: d=128, T=3, gamma 3/3, dropout 0.2; reteformer: d=256, T=5,
/// gamma 10/1, dropout 0.4). Training defaults: lr 1e-3, batch 16.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string data_dir;
  std::string word_vectors;            // optional pretrained vectors file
  std::string ignore_sentiment_label;  // label name, empty for none
  std::string sentiment_f1 = "macro";
  std::string act_f1 = "macro";
  std::uint64_t init_seed = 0;         // 0: derive from seed

  /// Unknown keys throw ConfigError naming the key.
  static RunConfig from_kv(const std::map<std::string, std::string>& kv);
  /// Every user-settable key with its effective value.
  std::map<std::string, std::string> to_kv() const;

  /// Metric settings with the ignored label resolved against `labels`.
  MetricConfig metric_config(const std::vector<std::string>& sentiment_labels) const;
};

/// Keys accepted in config files and `--set`.
const std::vector<std::string>& run_config_keys();

/// `key = value` lines; blank lines and `#` comments are skipped.
std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path);
/// Splits "KEY=VALUE".
std::pair<std::string, std::string> parse_assignment(const std::string& s);

/// File (optional) then overrides, later entries winning.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides);

F1Kind parse_f1_kind(const std::string& s);

}  // namespace darer
