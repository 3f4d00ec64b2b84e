#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clp/objective.hpp"
#include "json.hpp"

namespace clp {

struct TrainConfig {
  HyperParams hp;
  int neg_ratio = 1;
  bool share_params_across_time = false;
  SupervisionSource supervision_source = SupervisionSource::kNextSnapshotTrainSplit;
  TimeLossSign time_loss_sign = TimeLossSign::kStandard;
  bool literal_eq13 = false;
  ContrastiveComposition composition = ContrastiveComposition::kSubtractive;
  // Ingestion policy; at most one is set.
  std::optional<std::int64_t> window;
  std::optional<std::int64_t> snapshots;

  void validate() const;
  // Sets one key from its textual value. Throws ConfigError.
  void set(const std::string& key, const std::string& value);

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Parses flat `key = value` lines; '#' starts a comment.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

// Grid file: `key = v1, v2, ...` lines, expanded as a cross product over `base`.
// The grid-only key `lambda` sets lambda1..3 together.
std::vector<TrainConfig> expand_grid(const TrainConfig& base, const std::string& text);

// Tied lambdas (the reported optimum plus the searched range) x tau.
const std::string& default_grid();

// Every recognised key with its default, one per line.
std::string config_help();

}  // namespace clp
