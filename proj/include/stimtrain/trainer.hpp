#pragma once

// Training loop: one optimizer update per step over the summed main and
// subnetwork gradients.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stimtrain/checkpoint.hpp"
#include "stimtrain/config.hpp"
#include "stimtrain/imgops.hpp"
#include "stimtrain/losses.hpp"
#include "stimtrain/network.hpp"

namespace stimtrain::train {

/// Momentum buffers, one per trainable parameter, keyed by parameter index.
template <typename T>
struct SgdState {
  std::vector<std::vector<T>> velocity;
  std::uint64_t updates = 0;
};

/// v = momentum * v + (g + wd * theta), theta -= lr * v. Normalization scale and
/// shift are exempt from weight decay.
template <typename T>
void sgd_update(nn::ParameterSet<T>& params, SgdState<T>& state, double lr, double momentum,
                double weight_decay);

/// Learning rate after `step` optimizer steps.
double lr_at(const OptimConfig& optim, std::int64_t step, std::int64_t total_steps, std::int64_t steps_per_epoch);

struct MetricsRecord {
  std::int64_t step = 0;
  int epoch = 0;
  double ce = 0.0;
  double mean_kl = 0.0;
  double total = 0.0;
  double lr = 0.0;
  double main_top1 = 0.0;
  std::map<std::string, double> subnet_top1;  // keyed by mask string
  double wall_time = 0.0;

  nlohmann::json to_json() const;
  bool operator==(const MetricsRecord&) const = default;
};

/// Forces the per-step random choices; used by tests.
struct StepOverrides {
  std::optional<std::vector<nn::DepthMask>> masks;
  std::optional<std::vector<int>> resolutions;
};

struct StepRecord {
  loss::LossReport report;
  std::vector<nn::DepthMask> masks;
  std::vector<int> resolutions;  // 0 where the subnet saw the main input
  double lr = 0.0;
};

/// The subnet input for one step: the raw pixels resized to `l_s` (st_pp
/// mode only) then normalized.
Tensor<float> subnet_input(const img::ImageBatch& batch, TrainMode mode, int l_s);

/// One training step on raw [0, 1] pixels. The main network runs in train
/// mode and updates running statistics; subnets run in train mode without
/// touching them. Throws DivergenceError when the loss is non-finite or above
/// 1e4; trainable parameters are left unchanged in that case.
template <typename T>
StepRecord train_step(nn::Network<T>& net, SgdState<T>& opt, const img::ImageBatch& batch,
                      std::span<const int> labels, const TrainConfig& cfg, double lr, std::mt19937_64& rng,
                      const StepOverrides* overrides = nullptr);

struct EvalResult {
  double top1 = 0.0;
  double top5 = 0.0;
  double ce = 0.0;
  int samples = 0;
};

/// Logits of every sample after the validation transform (resize the shorter
/// side to val_resize, center-crop val_crop, normalize) in eval mode.
LogitsBatch<float> predict(const nn::Network<float>& net, const nn::DepthMask& mask, const img::Dataset& data,
                           const EvalConfig& eval);

EvalResult evaluate(const nn::Network<float>& net, const nn::DepthMask& mask, const img::Dataset& data,
                    const EvalConfig& eval);

/// Masks evaluated after each epoch according to eval.subnets.
std::vector<nn::DepthMask> eval_masks(const TrainConfig& cfg);

struct BoundCheck {
  int epoch = 0;
  double eps1 = 0.0;      // main-network CE
  double eps2 = 0.0;      // mean over subnets of the mean KL(p_main || p_sub)
  double mean_sub_ce = 0.0;
  double gap = 0.0;       // |mean_sub_ce - eps1|
  double bound = 0.0;
  int num_classes = 0;
  bool holds = false;

  nlohmann::json to_json() const;
};

struct ExperimentResult {
  std::vector<MetricsRecord> records;
  std::vector<BoundCheck> bounds;
  int epochs_completed = 0;
  std::int64_t steps = 0;
  std::filesystem::path final_checkpoint;
};

/// Loads train/test splits per cfg.data.
std::pair<img::Dataset, img::Dataset> load_datasets(const DataConfig& data, int num_classes);

/// Full run: writes resolved_config.json, metrics.jsonl, bound.jsonl,
/// ckpt_last.stpp after every epoch and ckpt_final.stpp at the end.
/// With `resume`, training continues from the checkpoint's epoch.
ExperimentResult run_experiment(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                                const std::optional<std::filesystem::path>& resume = std::nullopt);

/// Network parameters plus momentum buffers and progress counters.
nn::Checkpoint training_checkpoint(const nn::Network<float>& net, const SgdState<float>& opt, int epoch,
                                   std::int64_t step, const TrainConfig& cfg);

}  // namespace stimtrain::train
