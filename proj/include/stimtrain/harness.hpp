#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stimtrain/config.hpp"

namespace stimtrain::harness {

struct ExperimentPreset {
  std::string name;
  train::TrainConfig config;
  std::string description;
};

/// ct, st, st_klminus_snet6, st_sitrans, stpp_a1, in ladder order.
const std::vector<ExperimentPreset>& presets();
/// Throws ConfigError listing the known names.
const ExperimentPreset& find_preset(std::string_view name);

/// Defaults (or the preset), then the file, then overrides in order; the
/// result is validated. An empty file counts as {}.
train::TrainConfig load_config(const std::optional<std::filesystem::path>& path,
                               const std::optional<std::string>& preset = std::nullopt,
                               const std::vector<std::string>& overrides = {});

/// Process entry point; returns 0 on success, 1 on validation errors and 2
/// on runtime errors.
int run_cli(int argc, const char* const* argv);

}  // namespace stimtrain::harness
