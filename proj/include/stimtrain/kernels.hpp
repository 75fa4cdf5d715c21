#pragma once

// Compute kernels for the convolutional layers. Two implementations share one
// signature set: `reference` is a direct serial loop nest kept as the test
// oracle; `parallel` is im2col + BLAS GEMM with OpenMP over the batch and is
// what the network runs.

#include <cstddef>

namespace stimtrain::kernels {

struct ConvGeometry {
  int batch = 0;
  int in_channels = 0;
  int in_h = 0;
  int in_w = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;

  int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  std::size_t weight_size() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
  }
  std::size_t in_size() const {
    return static_cast<std::size_t>(batch) * in_channels * in_h * in_w;
  }
  std::size_t out_size() const {
    return static_cast<std::size_t>(batch) * out_channels * out_h() * out_w();
  }
  /// Multiply-accumulates for one forward pass.
  std::size_t macs() const { return out_size() * in_channels * kernel * kernel; }
};

namespace reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* weight, T* out);

/// `din` (if non-null) is overwritten; `dweight` is accumulated into.
template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* weight, const T* dout,
                     T* din, T* dweight);

}  // namespace reference

namespace parallel {

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* weight, T* out);

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* weight, const T* dout,
                     T* din, T* dweight);

}  // namespace parallel

// Batch normalization over (N, H, W) per channel. Statistics are accumulated
// in double. Channels are independent, so the OpenMP split is deterministic.

struct NormShape {
  int batch = 0;
  int channels = 0;
  int plane = 0;  // H * W
};

/// Writes batch mean and biased-variance-based inverse std for each channel.
template <typename T>
void batchnorm_forward_train(const NormShape& s, const T* x, const T* gamma, const T* beta,
                             double eps, T* y, double* mean, double* var, double* invstd);

template <typename T>
void batchnorm_forward_eval(const NormShape& s, const T* x, const T* gamma, const T* beta,
                            const T* running_mean, const T* running_var, double eps, T* y);

/// dgamma/dbeta are accumulated; dx is overwritten.
template <typename T>
void batchnorm_backward_train(const NormShape& s, const T* x, const T* gamma, const double* mean,
                              const double* invstd, const T* dy, T* dx, T* dgamma, T* dbeta);

template <typename T>
void batchnorm_backward_eval(const NormShape& s, const T* x, const T* gamma,
                             const T* running_mean, const T* running_var, double eps,
                             const T* dy, T* dx, T* dgamma, T* dbeta);

}  // namespace stimtrain::kernels
