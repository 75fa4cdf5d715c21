#include <cmath>
#include <cstddef>

#include "stimtrain/kernels.hpp"

namespace stimtrain::kernels {
namespace {

inline std::size_t offset(const NormShape& s, int n, int c) {
  return (static_cast<std::size_t>(n) * s.channels + c) * s.plane;
}

}  // namespace

template <typename T>
void batchnorm_forward_train(const NormShape& s, const T* x, const T* gamma, const T* beta,
                             double eps, T* y, double* mean, double* var, double* invstd) {
  const double count = static_cast<double>(s.batch) * s.plane;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < s.channels; ++c) {
    double sum = 0.0;
    for (int n = 0; n < s.batch; ++n) {
      const T* p = x + offset(s, n, c);
      for (int i = 0; i < s.plane; ++i) sum += p[i];
    }
    const double mu = sum / count;
    double sq = 0.0;
    for (int n = 0; n < s.batch; ++n) {
      const T* p = x + offset(s, n, c);
      for (int i = 0; i < s.plane; ++i) {
        const double d = p[i] - mu;
        sq += d * d;
      }
    }
    const double v = sq / count;
    const double is = 1.0 / std::sqrt(v + eps);
    mean[c] = mu;
    var[c] = v;
    invstd[c] = is;
    const double g = gamma[c];
    const double b = beta[c];
    for (int n = 0; n < s.batch; ++n) {
      const T* p = x + offset(s, n, c);
      T* q = y + offset(s, n, c);
      for (int i = 0; i < s.plane; ++i) q[i] = static_cast<T>(g * ((p[i] - mu) * is) + b);
    }
  }
}

template <typename T>
void batchnorm_forward_eval(const NormShape& s, const T* x, const T* gamma, const T* beta,
                            const T* running_mean, const T* running_var, double eps, T* y) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < s.channels; ++c) {
    const double mu = running_mean[c];
    const double is = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps);
    const double g = gamma[c];
    const double b = beta[c];
    for (int n = 0; n < s.batch; ++n) {
      const T* p = x + offset(s, n, c);
      T* q = y + offset(s, n, c);
      for (int i = 0; i < s.plane; ++i) q[i] = static_cast<T>(g * ((p[i] - mu) * is) + b);
    }
  }
}

template <typename T>
void batchnorm_backward_train(const NormShape& s, const T* x, const T* gamma, const double* mean,
                              const double* invstd, const T* dy, T* dx, T* dgamma, T* dbeta) {
  const double count = static_cast<double>(s.batch) * s.plane;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < s.channels; ++c) {
    const double mu = mean[c];
    const double is = invstd[c];
    const double g = gamma[c];
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int n = 0; n < s.batch; ++n) {
      const T* px = x + offset(s, n, c);
      const T* pd = dy + offset(s, n, c);
      for (int i = 0; i < s.plane; ++i) {
        sum_dy += pd[i];
        sum_dy_xhat += pd[i] * ((px[i] - mu) * is);
      }
    }
    dgamma[c] += static_cast<T>(sum_dy_xhat);
    dbeta[c] += static_cast<T>(sum_dy);
    const double scale = g * is / count;
    for (int n = 0; n < s.batch; ++n) {
      const T* px = x + offset(s, n, c);
      const T* pd = dy + offset(s, n, c);
      T* pdx = dx + offset(s, n, c);
      for (int i = 0; i < s.plane; ++i) {
        const double xhat = (px[i] - mu) * is;
        pdx[i] = static_cast<T>(scale * (count * pd[i] - sum_dy - xhat * sum_dy_xhat));
      }
    }
  }
}

template <typename T>
void batchnorm_backward_eval(const NormShape& s, const T* x, const T* gamma,
                             const T* running_mean, const T* running_var, double eps,
                             const T* dy, T* dx, T* dgamma, T* dbeta) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < s.channels; ++c) {
    const double mu = running_mean[c];
    const double is = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps);
    const double g = gamma[c];
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int n = 0; n < s.batch; ++n) {
      const T* px = x + offset(s, n, c);
      const T* pd = dy + offset(s, n, c);
      T* pdx = dx + offset(s, n, c);
      for (int i = 0; i < s.plane; ++i) {
        sum_dy += pd[i];
        sum_dy_xhat += pd[i] * ((px[i] - mu) * is);
        pdx[i] = static_cast<T>(pd[i] * g * is);
      }
    }
    dgamma[c] += static_cast<T>(sum_dy_xhat);
    dbeta[c] += static_cast<T>(sum_dy);
  }
}

#define STIMTRAIN_BN_INSTANTIATE(T)                                                             \
  template void batchnorm_forward_train<T>(const NormShape&, const T*, const T*, const T*,     \
                                           double, T*, double*, double*, double*);             \
  template void batchnorm_forward_eval<T>(const NormShape&, const T*, const T*, const T*,      \
                                          const T*, const T*, double, T*);                     \
  template void batchnorm_backward_train<T>(const NormShape&, const T*, const T*,              \
                                            const double*, const double*, const T*, T*, T*,    \
                                            T*);                                               \
  template void batchnorm_backward_eval<T>(const NormShape&, const T*, const T*, const T*,     \
                                           const T*, double, const T*, T*, T*, T*);

STIMTRAIN_BN_INSTANTIATE(float)
STIMTRAIN_BN_INSTANTIATE(double)

#undef STIMTRAIN_BN_INSTANTIATE

}  // namespace stimtrain::kernels
