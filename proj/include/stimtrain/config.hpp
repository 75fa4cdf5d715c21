#pragma once

// Experiment configuration. On disk it is UTF-8 JSON whose leaves are
// addressed by dotted keys (`model.stage_blocks`, `loss.lambda`, ...); nested
// objects and flat dotted keys are both accepted.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "stimtrain/imgops.hpp"
#include "stimtrain/losses.hpp"
#include "stimtrain/network.hpp"
#include "stimtrain/sampler.hpp"

namespace stimtrain::train {

enum class TrainMode { ct, st, st_pp };
enum class ScheduleKind { cosine, step };

struct OptimConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  ScheduleKind schedule = ScheduleKind::cosine;
  double decay_rate = 0.1;  // step schedule
  int decay_epochs = 30;    // step schedule

  bool operator==(const OptimConfig&) const = default;
};

struct SynthConfig {
  std::uint64_t seed = 0;
  int num_classes = 10;
  int samples_per_class = 500;
  int test_samples_per_class = 100;
  int size = 32;
  double noise = 0.1;

  bool operator==(const SynthConfig&) const = default;
};

struct DataConfig {
  std::string source = "cifar10";  // "cifar10" | "synth"
  std::string root;                // empty: $STIMTRAIN_DATA
  img::Normalization norm;
  bool augment = true;
  img::AugmentConfig augment_cfg;
  int train_limit = 0;  // 0: whole split
  int test_limit = 0;
  SynthConfig synth;

  bool operator==(const DataConfig&) const = default;
};

struct EvalConfig {
  int val_resize = 32;
  int val_crop = 32;
  int every = 1;
  std::string subnets = "enumerate";  // "enumerate" | "extremes" | "none"
  int batch_size = 256;

  bool operator==(const EvalConfig&) const = default;
};

struct TrainConfig {
  TrainMode mode = TrainMode::ct;
  int epochs = 1;
  int batch_size = 128;
  int k_subnets = 0;
  std::uint64_t seed = 0;
  int stop_after_epochs = 0;  // 0: run all epochs

  nn::NetworkSpec model = nn::cifar_resnet(20);
  loss::Variant variant = loss::Variant::kl;
  double lambda = 1.0;
  sampling::SamplingRule rule;  // empty choices: full stage depths
  std::uint64_t enumeration_cap = sampling::kDefaultEnumerationCap;
  img::ResolutionRange resolution{9, 32};
  OptimConfig optim;
  DataConfig data;
  EvalConfig eval;
  bool log_wall_time = false;

  /// Rule with empty choices expanded to the full stage depths.
  sampling::SamplingRule effective_rule() const;
  /// Throws ValidationError subclasses whose message names the dotted key.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

std::string_view to_string(TrainMode m);
std::string_view to_string(ScheduleKind s);

/// Nested JSON with every key present.
nlohmann::json to_json(const TrainConfig& cfg);

/// Applies the leaves of `j` (nested or dotted) onto `cfg`. Unknown keys and
/// type mismatches throw ConfigError naming the dotted key path.
void apply_json(TrainConfig& cfg, const nlohmann::json& j);

/// Applies one `key=value` override; the value is parsed as JSON and falls
/// back to a plain string.
void apply_override(TrainConfig& cfg, const std::string& assignment);

/// All dotted keys, in schema order.
std::vector<std::string> config_keys();

}  // namespace stimtrain::train
