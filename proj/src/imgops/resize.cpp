#include <algorithm>
#include <cmath>
#include <string>

#include "stimtrain/error.hpp"
#include "stimtrain/imgops.hpp"

namespace stimtrain::img {
namespace {

struct Tap {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;
};

std::vector<Tap> taps(int in, int out) {
  std::vector<Tap> t(out);
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double src = (d + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    t[d].lo = lo;
    t[d].hi = std::min(lo + 1, in - 1);
    t[d].frac = src - lo;
  }
  return t;
}

}  // namespace

void ResolutionRange::validate() const {
  if (l_min < 1 || l_min > l_max) {
    throw ConfigError("input.l_min/input.l_max: need 1 <= l_min <= l_max, got [" +
                      std::to_string(l_min) + ", " + std::to_string(l_max) + "]");
  }
}

int sample_resolution(const ResolutionRange& range, std::mt19937_64& rng) {
  range.validate();
  std::uniform_int_distribution<int> pick(range.l_min, range.l_max);
  return pick(rng);
}

std::pair<int, int> shorter_side_dims(int h, int w, int l_s) {
  if (l_s < 1) throw InputError("target shorter side must be >= 1");
  if (h <= w) {
    const int ow = std::max(1, static_cast<int>(std::lround(static_cast<double>(w) * l_s / h)));
    return {l_s, ow};
  }
  const int oh = std::max(1, static_cast<int>(std::lround(static_cast<double>(h) * l_s / w)));
  return {oh, l_s};
}

Tensor<float> resize_bilinear(const Tensor<float>& batch, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw InputError("resize target must be at least 1x1");
  if (out_h == batch.h && out_w == batch.w) return batch;
  Tensor<float> out(batch.n, batch.c, out_h, out_w);
  const auto ty = taps(batch.h, out_h);
  const auto tx = taps(batch.w, out_w);
  const int planes = batch.n * batch.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const float* src = batch.data.data() + static_cast<std::size_t>(p) * batch.plane();
    float* dst = out.data.data() + static_cast<std::size_t>(p) * out.plane();
    for (int y = 0; y < out_h; ++y) {
      const Tap& a = ty[y];
      const float* r0 = src + static_cast<std::size_t>(a.lo) * batch.w;
      const float* r1 = src + static_cast<std::size_t>(a.hi) * batch.w;
      for (int x = 0; x < out_w; ++x) {
        const Tap& b = tx[x];
        const double top = r0[b.lo] + (r0[b.hi] - static_cast<double>(r0[b.lo])) * b.frac;
        const double bot = r1[b.lo] + (r1[b.hi] - static_cast<double>(r1[b.lo])) * b.frac;
        dst[static_cast<std::size_t>(y) * out_w + x] = static_cast<float>(top + (bot - top) * a.frac);
      }
    }
  }
  return out;
}

Tensor<float> resize_shorter_side(const Tensor<float>& batch, int l_s) {
  const auto [oh, ow] = shorter_side_dims(batch.h, batch.w, l_s);
  return resize_bilinear(batch, oh, ow);
}

ImageBatch resize_shorter_side(const ImageBatch& batch, int l_s) {
  return {resize_shorter_side(batch.pixels, l_s), batch.norm};
}

Tensor<float> center_crop(const Tensor<float>& batch, int size) {
  if (size < 1 || size > batch.h || size > batch.w) {
    throw InputError("center crop " + std::to_string(size) + " does not fit a " +
                     std::to_string(batch.h) + "x" + std::to_string(batch.w) + " image");
  }
  if (size == batch.h && size == batch.w) return batch;
  const int oy = (batch.h - size) / 2;
  const int ox = (batch.w - size) / 2;
  Tensor<float> out(batch.n, batch.c, size, size);
  for (int n = 0; n < batch.n; ++n) {
    for (int c = 0; c < batch.c; ++c) {
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) out.at(n, c, y, x) = batch.at(n, c, y + oy, x + ox);
      }
    }
  }
  return out;
}

}  // namespace stimtrain::img
