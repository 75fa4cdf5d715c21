#include "stimtrain/kernels.hpp"

#include <cblas.h>
#include <omp.h>

#include <algorithm>
#include <vector>

namespace stimtrain::kernels::parallel {
namespace {

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel == 1 && g.stride == 1 && g.pad == 0;
}

// col is (C*k*k) x (oh*ow), row-major.
template <typename T>
void im2col(const ConvGeometry& g, const T* in, T* col) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  const int k = g.kernel;
  for (int ci = 0; ci < g.in_channels; ++ci) {
    const T* plane = in + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + (static_cast<std::size_t>(ci * k + ky) * k + kx) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * g.stride - g.pad + ky;
          T* dst = row + static_cast<std::size_t>(y) * ow;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.in_w;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * g.stride - g.pad + kx;
            dst[x] = (ix < 0 || ix >= g.in_w) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* in) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  const int k = g.kernel;
  for (int ci = 0; ci < g.in_channels; ++ci) {
    T* plane = in + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + (static_cast<std::size_t>(ci * k + ky) * k + kx) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          const T* src = row + static_cast<std::size_t>(y) * ow;
          T* dst = plane + static_cast<std::size_t>(iy) * g.in_w;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) dst[ix] += src[x];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* weight, T* out) {
  const int kk = g.in_channels * g.kernel * g.kernel;
  const int p = g.out_h() * g.out_w();
  const std::size_t in_stride = static_cast<std::size_t>(g.in_channels) * g.in_h * g.in_w;
  const std::size_t out_stride = static_cast<std::size_t>(g.out_channels) * p;
  const bool pointwise = is_pointwise(g);

#pragma omp parallel
  {
    std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(kk) * p);
#pragma omp for schedule(static)
    for (int n = 0; n < g.batch; ++n) {
      const T* src = in + n * in_stride;
      if (!pointwise) {
        im2col(g, src, col.data());
        src = col.data();
      }
      gemm(CblasNoTrans, CblasNoTrans, g.out_channels, p, kk, T(1), weight, kk, src, p, T(0),
           out + n * out_stride, p);
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* weight, const T* dout, T* din,
                     T* dweight) {
  const int kk = g.in_channels * g.kernel * g.kernel;
  const int p = g.out_h() * g.out_w();
  const std::size_t in_stride = static_cast<std::size_t>(g.in_channels) * g.in_h * g.in_w;
  const std::size_t out_stride = static_cast<std::size_t>(g.out_channels) * p;
  const std::size_t wsize = g.weight_size();
  const bool pointwise = is_pointwise(g);

  const int threads = omp_get_max_threads();
  // Per-thread weight-gradient partials, reduced in thread order below so the
  // result only depends on the thread count.
  std::vector<T> partial(static_cast<std::size_t>(threads) * wsize, T(0));

#pragma omp parallel num_threads(threads)
  {
    const int tid = omp_get_thread_num();
    T* dw = partial.data() + static_cast<std::size_t>(tid) * wsize;
    std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(kk) * p);
    std::vector<T> dcol(din != nullptr && !pointwise ? static_cast<std::size_t>(kk) * p : 0);
#pragma omp for schedule(static)
    for (int n = 0; n < g.batch; ++n) {
      const T* src = in + n * in_stride;
      const T* dy = dout + n * out_stride;
      if (!pointwise) {
        im2col(g, src, col.data());
        src = col.data();
      }
      // dW += dY (Cout x P) * col^T (P x K)
      gemm(CblasNoTrans, CblasTrans, g.out_channels, kk, p, T(1), dy, p, src, p, T(1), dw, kk);
      if (din != nullptr) {
        T* dx = din + n * in_stride;
        if (pointwise) {
          gemm(CblasTrans, CblasNoTrans, kk, p, g.out_channels, T(1), weight, kk, dy, p, T(0), dx,
               p);
        } else {
          gemm(CblasTrans, CblasNoTrans, kk, p, g.out_channels, T(1), weight, kk, dy, p, T(0),
               dcol.data(), p);
          std::fill(dx, dx + in_stride, T(0));
          col2im_add(g, dcol.data(), dx);
        }
      }
    }
  }
  for (int t = 0; t < threads; ++t) {
    const T* dw = partial.data() + static_cast<std::size_t>(t) * wsize;
    for (std::size_t i = 0; i < wsize; ++i) dweight[i] += dw[i];
  }
}

template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, double*);
template void conv2d_backward<float>(const ConvGeometry&, const float*, const float*, const float*,
                                     float*, float*);
template void conv2d_backward<double>(const ConvGeometry&, const double*, const double*,
                                      const double*, double*, double*);

}  // namespace stimtrain::kernels::parallel
