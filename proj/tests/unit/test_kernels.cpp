#include <cmath>
#include <random>

#include <doctest.h>

#include "stimtrain/kernels.hpp"

using namespace stimtrain::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

float max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("parallel convolution matches the serial reference") {
  std::mt19937_64 rng(3);
  const ConvGeometry shapes[] = {
      {2, 3, 9, 7, 5, 3, 1, 1}, {3, 4, 8, 8, 6, 3, 2, 1}, {2, 6, 5, 5, 8, 1, 1, 0},
      {1, 2, 6, 6, 4, 1, 2, 0}, {2, 3, 11, 11, 4, 7, 2, 3},
  };
  for (const auto& g : shapes) {
    const auto x = random_vec(g.in_size(), rng);
    const auto w = random_vec(g.weight_size(), rng);
    const auto dy = random_vec(g.out_size(), rng);
    std::vector<float> y_ref(g.out_size()), y_par(g.out_size());
    reference::conv2d_forward(g, x.data(), w.data(), y_ref.data());
    parallel::conv2d_forward(g, x.data(), w.data(), y_par.data());
    CHECK(max_abs_diff(y_ref, y_par) < 1e-4f);

    std::vector<float> dx_ref(g.in_size()), dx_par(g.in_size());
    std::vector<float> dw_ref(g.weight_size(), 0.5f), dw_par(g.weight_size(), 0.5f);
    reference::conv2d_backward(g, x.data(), w.data(), dy.data(), dx_ref.data(), dw_ref.data());
    parallel::conv2d_backward(g, x.data(), w.data(), dy.data(), dx_par.data(), dw_par.data());
    CHECK(max_abs_diff(dx_ref, dx_par) < 1e-4f);
    CHECK(max_abs_diff(dw_ref, dw_par) < 1e-3f);
  }
}

TEST_CASE("convolution geometry") {
  const ConvGeometry g{1, 3, 32, 32, 16, 3, 2, 1};
  CHECK(g.out_h() == 16);
  CHECK(g.out_w() == 16);
  CHECK(g.macs() == 16u * 16 * 16 * 3 * 9);
}

TEST_CASE("hand-evaluated 1x1 convolution") {
  const ConvGeometry g{1, 2, 1, 2, 1, 1, 1, 0};
  const float x[] = {1.0f, 2.0f, 3.0f, 4.0f};  // channel 0: (1,2), channel 1: (3,4)
  const float w[] = {0.5f, -1.0f};
  float y[2];
  reference::conv2d_forward(g, x, w, y);
  CHECK(y[0] == doctest::Approx(0.5 - 3.0));
  CHECK(y[1] == doctest::Approx(1.0 - 4.0));
}

TEST_CASE("train-mode batch norm normalizes each channel") {
  const NormShape s{4, 2, 3};
  std::mt19937_64 rng(1);
  const auto x = random_vec(24, rng);
  const std::vector<float> gamma{1.0f, 1.0f}, beta{0.0f, 0.0f};
  std::vector<float> y(24);
  double mean[2], var[2], invstd[2];
  batchnorm_forward_train(s, x.data(), gamma.data(), beta.data(), 1e-5, y.data(), mean, var, invstd);
  for (int c = 0; c < 2; ++c) {
    double m = 0.0, v = 0.0, direct = 0.0;
    for (int n = 0; n < 4; ++n) {
      for (int i = 0; i < 3; ++i) {
        m += y[(n * 2 + c) * 3 + i];
        direct += x[(n * 2 + c) * 3 + i];
      }
    }
    CHECK(mean[c] == doctest::Approx(direct / 12.0).epsilon(1e-6));
    m /= 12.0;
    for (int n = 0; n < 4; ++n) {
      for (int i = 0; i < 3; ++i) v += (y[(n * 2 + c) * 3 + i] - m) * (y[(n * 2 + c) * 3 + i] - m);
    }
    CHECK(std::fabs(m) < 1e-6);
    CHECK(v / 12.0 == doctest::Approx(var[c] / (var[c] + 1e-5)).epsilon(1e-4));
  }
}

TEST_CASE("eval-mode batch norm uses running statistics") {
  const NormShape s{1, 1, 2};
  const float x[] = {3.0f, 5.0f};
  const float gamma[] = {2.0f}, beta[] = {1.0f}, rm[] = {1.0f}, rv[] = {4.0f};
  float y[2];
  batchnorm_forward_eval(s, x, gamma, beta, rm, rv, 0.0, y);
  CHECK(y[0] == doctest::Approx(2.0 * (3.0 - 1.0) / 2.0 + 1.0));
  CHECK(y[1] == doctest::Approx(2.0 * (5.0 - 1.0) / 2.0 + 1.0));
}
