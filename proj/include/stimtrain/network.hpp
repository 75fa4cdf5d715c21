#pragma once

// Residual classification networks whose forward pass takes a depth mask.
//
// A mask keeps a prefix of the blocks in every stage. Skipped blocks pass
// their input through unchanged, so every subnetwork reads exactly the same
// parameter storage as the full network.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stimtrain/tensor.hpp"

namespace stimtrain::nn {

enum class BlockKind { basic, bottleneck };
enum class Mode { train, eval };
enum class Backend { parallel, reference };

std::string_view to_string(BlockKind kind);
BlockKind parse_block_kind(std::string_view s);

struct StemSpec {
  int kernel = 3;
  int stride = 1;
  bool operator==(const StemSpec&) const = default;
};

struct NetworkSpec {
  std::vector<int> stage_blocks;
  std::vector<int> stage_widths;
  int num_classes = 10;
  StemSpec stem;
  BlockKind block_kind = BlockKind::basic;
  int input_channels = 3;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  int num_stages() const { return static_cast<int>(stage_blocks.size()); }
  int expansion() const { return block_kind == BlockKind::bottleneck ? 4 : 1; }
  int feature_channels() const { return stage_widths.back() * expansion(); }

  bool operator==(const NetworkSpec&) const = default;
};

/// CIFAR-style ResNet-{8,14,20,32,56,...}: basic blocks, widths [16, 32, 64].
NetworkSpec cifar_resnet(int depth, int num_classes = 10);
/// Bottleneck [3,4,6,3] at a quarter of the ResNet-50 widths.
NetworkSpec quarter_resnet50(int num_classes = 10);

struct DepthMask {
  std::vector<int> kept;

  static DepthMask full(const NetworkSpec& spec);
  /// Throws MaskError when the mask does not fit the spec.
  void validate(const NetworkSpec& spec) const;
  bool is_full(const NetworkSpec& spec) const;
  std::string to_string() const;  // "3,2,1"
  static DepthMask parse(std::string_view text);

  auto operator<=>(const DepthMask&) const = default;
};

enum class ParamRole { conv_weight, norm_scale, norm_shift, running_mean, running_var, linear_weight, linear_bias };

template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  ParamRole role = ParamRole::conv_weight;
  std::vector<T> value;
  std::vector<T> grad;

  bool trainable() const { return role != ParamRole::running_mean && role != ParamRole::running_var; }
  bool is_norm_affine() const { return role == ParamRole::norm_scale || role == ParamRole::norm_shift; }
};

template <typename T>
class ParameterSet {
 public:
  std::size_t add(std::string name, std::vector<int> shape, ParamRole role, T fill);

  std::size_t size() const { return params_.size(); }
  Param<T>& operator[](std::size_t i) { return params_[i]; }
  const Param<T>& operator[](std::size_t i) const { return params_[i]; }
  /// Throws std::out_of_range for unknown names.
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  std::size_t trainable_count() const;

 private:
  std::vector<Param<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct ForwardOptions {
  Mode mode = Mode::eval;
  /// Honored only for train-mode forwards of the full-depth network.
  bool update_running_stats = false;
};

struct ConvBnLayout {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  std::size_t weight = 0;
  std::size_t gamma = 0;
  std::size_t beta = 0;
  std::size_t running_mean = 0;
  std::size_t running_var = 0;
};

struct BlockLayout {
  std::vector<ConvBnLayout> units;  // 2 (basic) or 3 (bottleneck)
  std::optional<ConvBnLayout> shortcut;
};

template <typename T>
struct ConvBnCache {
  Tensor<T> input;
  Tensor<T> conv_out;
  std::vector<double> mean;
  std::vector<double> invstd;
  Mode mode = Mode::eval;
};

template <typename T>
struct BlockCache {
  int stage = 0;
  int block = 0;
  std::vector<ConvBnCache<T>> units;
  std::optional<ConvBnCache<T>> shortcut;
  Tensor<T> output;  // post-activation
};

/// Saved activations of one forward pass; consumed by exactly one backward.
template <typename T>
struct Trace {
  bool recorded = false;
  bool has_head = false;
  ConvBnCache<T> stem;
  Tensor<T> stem_out;
  std::vector<BlockCache<T>> blocks;
  Tensor<T> features;
  std::vector<T> pooled;  // B x C
};

template <typename T>
class Network {
 public:
  Network(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  void set_backend(Backend b) { backend_ = b; }
  Backend backend() const { return backend_; }

  /// Logits for `batch` under `mask`. Records activations into `trace` when given.
  LogitsBatch<T> forward(const Tensor<T>& batch, const DepthMask& mask, ForwardOptions opts,
                         Trace<T>* trace = nullptr);
  /// Main-network forward (full depth).
  LogitsBatch<T> forward(const Tensor<T>& batch, ForwardOptions opts, Trace<T>* trace = nullptr) {
    return forward(batch, DepthMask::full(spec_), opts, trace);
  }
  /// Read-only forward; never touches running statistics.
  LogitsBatch<T> forward(const Tensor<T>& batch, const DepthMask& mask, Mode mode,
                         Trace<T>* trace = nullptr) const;

  /// Final feature map (after the last block, before global pooling).
  Tensor<T> forward_features(const Tensor<T>& batch, const DepthMask& mask, Mode mode,
                             Trace<T>* trace = nullptr) const;

  /// Accumulates dLoss/dparam into the gradient slots. Returns dLoss/dinput.
  /// Throws StateError when `trace` holds no recorded forward.
  Tensor<T> backward(Trace<T>& trace, const LogitsBatch<T>& dlogits);
  /// Input gradient of a feature-map forward without touching gradient slots.
  Tensor<T> input_gradient(Trace<T>& trace, const Tensor<T>& dfeatures) const;

  /// Analytic multiply-accumulate count of a forward on one HxW sample.
  std::size_t forward_macs(const DepthMask& mask, int h, int w) const;

  const ConvBnLayout& stem_layout() const { return stem_; }
  const std::vector<std::vector<BlockLayout>>& stage_layouts() const { return stages_; }
  std::size_t fc_weight_index() const { return fc_weight_; }
  std::size_t fc_bias_index() const { return fc_bias_; }

  static constexpr double kNormEps = 1e-5;
  static constexpr double kNormMomentum = 0.1;

 private:
  // `stats` is the parameter set whose running statistics receive the batch
  // moments; null leaves them untouched.
  Tensor<T> run_features(const Tensor<T>& batch, const DepthMask& mask, Mode mode,
                         ParameterSet<T>* stats, Trace<T>* trace) const;
  Tensor<T> conv_bn(const ConvBnLayout& l, const Tensor<T>& x, Mode mode, ParameterSet<T>* stats,
                    ConvBnCache<T>* cache) const;
  LogitsBatch<T> head(const Tensor<T>& features, Trace<T>* trace) const;
  Tensor<T> conv_bn_backward(const ConvBnLayout& l, const ConvBnCache<T>& cache,
                             const Tensor<T>& dy, ParameterSet<T>* grads) const;
  Tensor<T> features_backward(Trace<T>& trace, Tensor<T> dfeat, ParameterSet<T>* grads) const;
  void validate_input(const Tensor<T>& batch) const;

  NetworkSpec spec_;
  ParameterSet<T> params_;
  ConvBnLayout stem_;
  std::vector<std::vector<BlockLayout>> stages_;
  std::size_t fc_weight_ = 0;
  std::size_t fc_bias_ = 0;
  Backend backend_ = Backend::parallel;
};

/// Deterministic initialization: fan-in scaled Gaussian convolutions and
/// classifier, zero biases, unit norm scale, zero-mean/unit-variance running stats.
template <typename T>
Network<T> build_network(const NetworkSpec& spec, std::uint64_t seed) {
  return Network<T>(spec, seed);
}

}  // namespace stimtrain::nn
