#include "stimtrain/kernels.hpp"

#include <algorithm>

namespace stimtrain::kernels::reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* weight, T* out) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  for (int n = 0; n < g.batch; ++n) {
    for (int co = 0; co < g.out_channels; ++co) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          T acc = 0;
          for (int ci = 0; ci < g.in_channels; ++ci) {
            for (int ky = 0; ky < g.kernel; ++ky) {
              const int iy = y * g.stride - g.pad + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int ix = x * g.stride - g.pad + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                acc += in[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix] *
                       weight[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx];
              }
            }
          }
          out[((n * g.out_channels + co) * oh + y) * ow + x] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* weight, const T* dout, T* din,
                     T* dweight) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  if (din != nullptr) std::fill(din, din + g.in_size(), T(0));
  for (int n = 0; n < g.batch; ++n) {
    for (int co = 0; co < g.out_channels; ++co) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          const T d = dout[((n * g.out_channels + co) * oh + y) * ow + x];
          for (int ci = 0; ci < g.in_channels; ++ci) {
            for (int ky = 0; ky < g.kernel; ++ky) {
              const int iy = y * g.stride - g.pad + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int ix = x * g.stride - g.pad + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                const std::size_t wi = ((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx;
                const std::size_t ii = ((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix;
                dweight[wi] += d * in[ii];
                if (din != nullptr) din[ii] += d * weight[wi];
              }
            }
          }
        }
      }
    }
  }
}

template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, double*);
template void conv2d_backward<float>(const ConvGeometry&, const float*, const float*, const float*,
                                     float*, float*);
template void conv2d_backward<double>(const ConvGeometry&, const double*, const double*,
                                      const double*, double*, double*);

}  // namespace stimtrain::kernels::reference
