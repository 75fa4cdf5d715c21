#pragma once

// Read-only measurements on trained networks: subnetwork loafing, logit
// amplitude, effective receptive fields, and the CE-gap bound.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stimtrain/config.hpp"
#include "stimtrain/imgops.hpp"
#include "stimtrain/network.hpp"
#include "stimtrain/sampler.hpp"

namespace stimtrain::diag {

struct LoafingRow {
  nn::DepthMask mask;
  double in_ensemble_top1 = 0.0;
  std::optional<double> standalone_top1;
  std::optional<double> gap;  // standalone_top1 - in_ensemble_top1
};

struct LoafingReport {
  std::vector<LoafingRow> rows;

  const LoafingRow* find(const nn::DepthMask& mask) const;
  std::string to_csv() const;
};

/// Standalone checkpoints keyed by mask string ("1,1,1"). Each must hold a
/// network whose stage depths equal the mask.
using StandaloneCheckpoints = std::map<std::string, std::filesystem::path>;

/// Evaluates every mask of the space inside the shared-weight network. Rows
/// without a readable standalone checkpoint carry no gap.
LoafingReport measure_loafing(const nn::Network<float>& net, const sampling::SamplingRule& rule,
                              const img::Dataset& eval_set, const train::EvalConfig& eval,
                              const StandaloneCheckpoints& standalone = {},
                              std::uint64_t cap = sampling::kDefaultEnumerationCap);

struct Amplitude {
  double mean_magnitude = 0.0;  // dataset mean of per-sample ||Z||_2
  double top1 = 0.0;
};

Amplitude accumulate_amplitude(const nn::Network<float>& net, const nn::DepthMask& mask, const img::Dataset& data,
                               const train::EvalConfig& eval);

std::string amplitude_csv(const std::vector<std::pair<std::string, Amplitude>>& rows);

/// Anything that maps an image batch to a feature map and can return the
/// input gradient of the channel sum at the center of that map.
class FeatureModel {
 public:
  virtual ~FeatureModel() = default;
  virtual int input_channels() const = 0;
  /// d(sum_c F[n, c, h/2, w/2]) / d input, per sample.
  virtual Tensor<float> center_gradient(const Tensor<float>& batch) const = 0;
};

/// Masked network in eval mode.
class NetworkFeatures : public FeatureModel {
 public:
  NetworkFeatures(const nn::Network<float>& net, nn::DepthMask mask) : net_(net), mask_(std::move(mask)) {}
  int input_channels() const override { return net_.spec().input_channels; }
  Tensor<float> center_gradient(const Tensor<float>& batch) const override;

 private:
  const nn::Network<float>& net_;
  nn::DepthMask mask_;
};

/// Plain stack of convolutions with no nonlinearity, for exact receptive
/// field checks.
class ConvChain : public FeatureModel {
 public:
  struct Layer {
    int in_channels = 1;
    int out_channels = 1;
    int kernel = 3;
    int stride = 1;
    int pad = 1;
    std::vector<float> weight;
  };

  /// Gaussian weights drawn from `seed`.
  ConvChain(std::vector<Layer> layers, std::uint64_t seed);
  int input_channels() const override { return layers_.front().in_channels; }
  Tensor<float> center_gradient(const Tensor<float>& batch) const override;

 private:
  std::vector<Layer> layers_;
};

struct ERFMap {
  int h = 0;
  int w = 0;
  std::vector<double> mass;  // row-major, nonnegative, sums to 1

  double at(int y, int x) const { return mass[static_cast<std::size_t>(y) * w + x]; }
  /// Fraction of pixels in the smallest set carrying at least mass t.
  double area_ratio(double t) const;
  /// Pixels with nonzero mass.
  int support() const;
  std::string to_csv() const;
  /// Plain (P2) 16-bit grayscale, scaled so the maximum is 65535.
  std::string to_pgm() const;
};

inline constexpr double kErfThresholds[] = {0.2, 0.3, 0.5, 0.99};

/// Mean over random N(0, 1) inputs of |center gradient|, summed over
/// channels and normalized to mass 1. Throws StateError if every gradient is zero.
ERFMap compute_erf(const FeatureModel& model, int input_size, int num_samples, std::mt19937_64& rng,
                   int batch_size = 16);

/// (eps2 + ln N) / exp(-eps1) + eps1. Throws InputError for eps < 0 or N < 2.
double ce_gap_bound(double eps1, double eps2, int num_classes);

struct BoundTrials {
  int trials = 0;
  int counterexamples = 0;
  double worst_ratio = 0.0;  // max |CE gap| / bound
};

/// Draws random (p_m, p_s, y) on simplices of 2..max_classes classes, sets
/// eps1 >= CE(p_m) and eps2 >= KL(p_m || p_s), and counts trials where
/// |CE(p_m) - CE(p_s)| exceeds the bound.
BoundTrials validate_bound_on_simplex(int trials, std::mt19937_64& rng, int max_classes = 10);

}  // namespace stimtrain::diag
