#include <algorithm>
#include <string>

#include "stimtrain/error.hpp"
#include "stimtrain/imgops.hpp"

namespace stimtrain::img {

Tensor<float> normalize(const Tensor<float>& pixels, const Normalization& norm) {
  if (static_cast<int>(norm.mean.size()) != pixels.c || static_cast<int>(norm.stddev.size()) != pixels.c) {
    throw InputError("normalization has " + std::to_string(norm.mean.size()) +
                     " channels, images have " + std::to_string(pixels.c));
  }
  Tensor<float> out(pixels.n, pixels.c, pixels.h, pixels.w);
  const std::size_t plane = pixels.plane();
  for (int n = 0; n < pixels.n; ++n) {
    for (int c = 0; c < pixels.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * pixels.c + c) * plane;
      const float m = norm.mean[c];
      const float inv = 1.0f / norm.stddev[c];
      for (std::size_t i = 0; i < plane; ++i) out.data[off + i] = (pixels.data[off + i] - m) * inv;
    }
  }
  return out;
}

Tensor<float> Dataset::gather(std::span<const int> indices) const {
  Tensor<float> out(static_cast<int>(indices.size()), images.c, images.h, images.w);
  const std::size_t ss = images.sample_size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = images.sample(indices[i]);
    std::copy(src.begin(), src.end(), out.data.begin() + i * ss);
  }
  return out;
}

std::vector<int> Dataset::gather_labels(std::span<const int> indices) const {
  std::vector<int> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = labels[indices[i]];
  return out;
}

void standard_augment(Tensor<float>& batch, const AugmentConfig& cfg, std::mt19937_64& rng) {
  const int pad = cfg.crop_padding;
  std::uniform_int_distribution<int> shift(0, 2 * std::max(pad, 0));
  std::bernoulli_distribution flip(0.5);
  std::vector<float> tmp(batch.plane());
  for (int n = 0; n < batch.n; ++n) {
    const int dy = pad > 0 ? shift(rng) - pad : 0;
    const int dx = pad > 0 ? shift(rng) - pad : 0;
    const bool mirror = cfg.horizontal_flip && flip(rng);
    for (int c = 0; c < batch.c; ++c) {
      for (int y = 0; y < batch.h; ++y) {
        for (int x = 0; x < batch.w; ++x) {
          const int sy = y + dy;
          int sx = x + dx;
          float v = 0.0f;
          if (sy >= 0 && sy < batch.h && sx >= 0 && sx < batch.w) v = batch.at(n, c, sy, sx);
          tmp[static_cast<std::size_t>(y) * batch.w + (mirror ? batch.w - 1 - x : x)] = v;
        }
      }
      std::copy(tmp.begin(), tmp.end(), batch.data.begin() + (static_cast<std::size_t>(n) * batch.c + c) * batch.plane());
    }
  }
}

}  // namespace stimtrain::img
