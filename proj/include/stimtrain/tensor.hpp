#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace stimtrain {

/// Dense NCHW tensor.
template <typename T>
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  bool empty() const { return data.empty(); }

  T& at(int in, int ic, int iy, int ix) {
    return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  const T& at(int in, int ic, int iy, int ix) const {
    return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
  }

  std::span<T> sample(int in) {
    return {data.data() + in * sample_size(), sample_size()};
  }
  std::span<const T> sample(int in) const {
    return {data.data() + in * sample_size(), sample_size()};
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  bool operator==(const Tensor&) const = default;
};

/// Row-major B x N matrix of raw pre-softmax outputs.
template <typename T>
struct LogitsBatch {
  int batch = 0;
  int classes = 0;
  std::vector<T> values;

  LogitsBatch() = default;
  LogitsBatch(int b, int n, T fill = T(0))
      : batch(b), classes(n), values(static_cast<std::size_t>(b) * n, fill) {}

  std::span<T> row(int i) { return {values.data() + static_cast<std::size_t>(i) * classes, static_cast<std::size_t>(classes)}; }
  std::span<const T> row(int i) const {
    return {values.data() + static_cast<std::size_t>(i) * classes, static_cast<std::size_t>(classes)};
  }
  T& at(int i, int j) { return values[static_cast<std::size_t>(i) * classes + j]; }
  const T& at(int i, int j) const { return values[static_cast<std::size_t>(i) * classes + j]; }

  bool operator==(const LogitsBatch&) const = default;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  Tensor<To> out(src.n, src.c, src.h, src.w);
  for (std::size_t i = 0; i < src.size(); ++i) out.data[i] = static_cast<To>(src.data[i]);
  return out;
}

}  // namespace stimtrain
