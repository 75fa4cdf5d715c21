#pragma once

// Image data: datasets, resizing, normalization and augmentation.
//
// Pixel tensors are stored in [0, 1] before normalization. Resizing happens on
// un-normalized pixels; per-channel normalization is the last step.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "stimtrain/tensor.hpp"

namespace stimtrain::img {

struct Normalization {
  std::vector<float> mean{0.0f, 0.0f, 0.0f};
  std::vector<float> stddev{1.0f, 1.0f, 1.0f};

  bool operator==(const Normalization&) const = default;
};

/// Pixels in [0, 1] plus the constants that normalize them.
struct ImageBatch {
  Tensor<float> pixels;
  Normalization norm;
};

struct ResolutionRange {
  int l_min = 1;
  int l_max = 1;

  /// Throws ConfigError unless 1 <= l_min <= l_max.
  void validate() const;
  bool operator==(const ResolutionRange&) const = default;
};

/// Uniform over the inclusive integer interval [l_min, l_max].
int sample_resolution(const ResolutionRange& range, std::mt19937_64& rng);

/// Output size when the shorter side becomes `l_s`; the longer side is
/// rounded to nearest so the aspect ratio is kept.
std::pair<int, int> shorter_side_dims(int h, int w, int l_s);

/// Bilinear resize with half-pixel centers and edge clamping:
/// src = (dst + 0.5) * (in / out) - 0.5, clamped to [0, in - 1].
Tensor<float> resize_bilinear(const Tensor<float>& batch, int out_h, int out_w);

/// Resizes the shorter side to `l_s`; exact copy when it already has that size.
Tensor<float> resize_shorter_side(const Tensor<float>& batch, int l_s);
ImageBatch resize_shorter_side(const ImageBatch& batch, int l_s);

/// Centered size x size window. Throws InputError if the image is smaller.
Tensor<float> center_crop(const Tensor<float>& batch, int size);

/// (x - mean[c]) / stddev[c]. Throws InputError on a channel count mismatch.
Tensor<float> normalize(const Tensor<float>& pixels, const Normalization& norm);

struct Dataset {
  Tensor<float> images;  // N x C x H x W, [0, 1]
  std::vector<int> labels;
  int num_classes = 0;
  Normalization norm;

  int size() const { return static_cast<int>(labels.size()); }
  /// Copies the selected samples into a batch.
  Tensor<float> gather(std::span<const int> indices) const;
  std::vector<int> gather_labels(std::span<const int> indices) const;
};

enum class Split { train, test };

inline constexpr int kCifarSide = 32;
inline constexpr int kCifarRecordBytes = 1 + 3 * kCifarSide * kCifarSide;

/// Reads one CIFAR-10 binary file. Throws FormatError (with byte offset) for a
/// truncated record or a label above 9, IoError when the file cannot be read.
Dataset read_cifar10_file(const std::filesystem::path& file);

/// `path` is either a single .bin file or the directory holding
/// data_batch_{1..5}.bin / test_batch.bin.
Dataset load_cifar10_binary(const std::filesystem::path& path, Split split, Normalization norm = {});

/// Class-conditional textures: an oriented grating per class plus a Gaussian
/// blob near a class-specific location, with per-sample jitter and noise.
/// Labels cycle through the classes, so every class has exactly
/// `samples_per_class` samples. Class styles depend only on `seed`; the
/// split picks an independent sample stream. Throws ConfigError for size < 8.
Dataset synth_dataset(std::uint64_t seed, int num_classes, int samples_per_class, int size,
                      double noise = 0.1, Split split = Split::train);

struct AugmentConfig {
  bool horizontal_flip = true;
  int crop_padding = 4;  // 0 disables the random crop

  bool operator==(const AugmentConfig&) const = default;
};

/// Extension point applied to raw [0, 1] pixels before any resizing.
using AugmentHook = std::function<void(Tensor<float>& batch, std::mt19937_64& rng)>;

/// Random crop with zero padding followed by a random horizontal flip, per sample.
void standard_augment(Tensor<float>& batch, const AugmentConfig& cfg, std::mt19937_64& rng);

}  // namespace stimtrain::img
