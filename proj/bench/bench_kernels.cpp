// Serial reference kernels vs the OpenMP/BLAS kernels on ResNet layer shapes,
// plus one whole-network training forward/backward per backend.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "stimtrain/kernels.hpp"
#include "stimtrain/losses.hpp"
#include "stimtrain/network.hpp"

using namespace stimtrain;
using kernels::ConvGeometry;

namespace {

double best_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm-up
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

struct Shape {
  std::string name;
  ConvGeometry g;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convolution kernel benchmark"};
  int batch = 32;
  int reps = 5;
  std::string json_out;
  app.add_option("--batch", batch, "batch size")->check(CLI::PositiveNumber);
  app.add_option("--reps", reps, "timed repetitions (best is reported)")->check(CLI::PositiveNumber);
  app.add_option("--json", json_out, "also write results to this file");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Shape> shapes{
      {"stem 3->16 32x32 k3", {batch, 3, 32, 32, 16, 3, 1, 1}},
      {"stage1 16->16 32x32 k3", {batch, 16, 32, 32, 16, 3, 1, 1}},
      {"stage2 16->32 32x32 k3 s2", {batch, 16, 32, 32, 32, 3, 2, 1}},
      {"stage3 64->64 8x8 k3", {batch, 64, 8, 8, 64, 3, 1, 1}},
      {"bottleneck 64->16 8x8 k1", {batch, 64, 8, 8, 16, 1, 1, 0}},
  };

  std::printf("threads=%d batch=%d reps=%d\n", omp_get_max_threads(), batch, reps);
  std::printf("%-28s %12s %12s %9s %12s %12s %9s\n", "layer", "ref fwd ms", "par fwd ms", "speedup", "ref bwd ms",
              "par bwd ms", "speedup");
  nlohmann::json results = nlohmann::json::array();
  std::mt19937_64 rng(0);
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (const auto& s : shapes) {
    std::vector<float> in(s.g.in_size()), w(s.g.weight_size()), out(s.g.out_size()), dout(s.g.out_size());
    std::vector<float> din(s.g.in_size()), dw(s.g.weight_size());
    for (auto* v : {&in, &w, &dout}) {
      for (auto& x : *v) x = g(rng);
    }
    const double rf = best_ms(reps, [&] { kernels::reference::conv2d_forward(s.g, in.data(), w.data(), out.data()); });
    const double pf = best_ms(reps, [&] { kernels::parallel::conv2d_forward(s.g, in.data(), w.data(), out.data()); });
    const double rb = best_ms(reps, [&] {
      kernels::reference::conv2d_backward(s.g, in.data(), w.data(), dout.data(), din.data(), dw.data());
    });
    const double pb = best_ms(reps, [&] {
      kernels::parallel::conv2d_backward(s.g, in.data(), w.data(), dout.data(), din.data(), dw.data());
    });
    std::printf("%-28s %12.3f %12.3f %8.1fx %12.3f %12.3f %8.1fx\n", s.name.c_str(), rf, pf, rf / pf, rb, pb, rb / pb);
    results.push_back({{"layer", s.name}, {"macs", s.g.macs()}, {"reference_forward_ms", rf},
                       {"parallel_forward_ms", pf}, {"reference_backward_ms", rb}, {"parallel_backward_ms", pb}});
  }

  // One training-mode forward and backward of ResNet-20 per backend.
  nn::Network<float> net(nn::cifar_resnet(20), 0);
  Tensor<float> x(batch, 3, 32, 32);
  for (auto& v : x.data) v = g(rng);
  std::vector<int> labels(batch);
  for (int i = 0; i < batch; ++i) labels[i] = i % 10;
  auto step = [&] {
    nn::Trace<float> t;
    const auto z = net.forward(x, nn::ForwardOptions{nn::Mode::train, false}, &t);
    net.backward(t, loss::cross_entropy(z, labels).grad);
  };
  net.set_backend(nn::Backend::reference);
  const double rn = best_ms(std::max(1, reps / 2), step);
  net.set_backend(nn::Backend::parallel);
  const double pn = best_ms(std::max(1, reps / 2), step);
  std::printf("%-28s %12.3f %12.3f %8.1fx\n", "resnet20 fwd+bwd", rn, pn, rn / pn);
  results.push_back({{"layer", "resnet20 fwd+bwd"}, {"reference_ms", rn}, {"parallel_ms", pn}});

  if (!json_out.empty()) {
    std::FILE* f = std::fopen(json_out.c_str(), "w");
    if (f == nullptr) return 2;
    std::fputs((results.dump(2) + "\n").c_str(), f);
    std::fclose(f);
  }
  return 0;
}
