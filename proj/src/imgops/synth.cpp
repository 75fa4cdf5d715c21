#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "stimtrain/error.hpp"
#include "stimtrain/imgops.hpp"

namespace stimtrain::img {
namespace {

struct ClassStyle {
  double angle = 0.0;      // grating orientation
  double frequency = 0.0;  // cycles across the image
  double blob_y = 0.0;     // blob center, fraction of size
  double blob_x = 0.0;
  double color[3] = {};
  double blob_color[3] = {};
};

}  // namespace

Dataset synth_dataset(std::uint64_t seed, int num_classes, int samples_per_class, int size, double noise, Split split) {
  if (size < 8) throw ConfigError("data.synth.size: must be >= 8, got " + std::to_string(size));
  if (num_classes < 2) throw ConfigError("data.synth.num_classes: must be >= 2");
  if (samples_per_class < 1) throw ConfigError("data.synth.samples_per_class: must be >= 1");

  std::mt19937_64 style_rng(seed * 0x9E3779B97F4A7C15ull + 0x5851F42D4C957F2Dull);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ClassStyle> styles(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    ClassStyle& s = styles[k];
    s.angle = std::numbers::pi * (k + 0.25 * unit(style_rng)) / num_classes;
    s.frequency = 1.5 + 2.5 * unit(style_rng);
    s.blob_y = 0.2 + 0.6 * unit(style_rng);
    s.blob_x = 0.2 + 0.6 * unit(style_rng);
    for (int c = 0; c < 3; ++c) {
      s.color[c] = 0.4 + 0.6 * unit(style_rng);
      s.blob_color[c] = unit(style_rng) * 2.0 - 1.0;
    }
  }

  const int total = num_classes * samples_per_class;
  Dataset ds;
  ds.num_classes = num_classes;
  ds.images = Tensor<float>(total, 3, size, size);
  ds.labels.resize(total);
  std::mt19937_64 rng(split == Split::train ? seed : seed ^ 0xD1B54A32D192ED03ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sigma = size / 6.0;
  for (int i = 0; i < total; ++i) {
    const int k = i % num_classes;
    ds.labels[i] = k;
    const ClassStyle& s = styles[k];
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    const double amp = 0.7 + 0.3 * unit(rng);
    const double angle = s.angle + 0.05 * gauss(rng);
    const double by = (s.blob_y + 0.08 * gauss(rng)) * size;
    const double bx = (s.blob_x + 0.08 * gauss(rng)) * size;
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double u = (x * ca + y * sa) / size;
        const double grating = std::sin(2.0 * std::numbers::pi * s.frequency * u + phase);
        const double dy = y - by;
        const double dx = x - bx;
        const double blob = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
        for (int c = 0; c < 3; ++c) {
          const double v = 0.5 + 0.25 * amp * grating * s.color[c] + 0.3 * blob * s.blob_color[c] +
                           noise * gauss(rng);
          ds.images.at(i, c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
  }
  return ds;
}

}  // namespace stimtrain::img
