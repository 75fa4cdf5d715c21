#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>

#include "stimtrain/gradcheck.hpp"
#include "stimtrain/kernels.hpp"
#include "stimtrain/losses.hpp"
#include "stimtrain/network.hpp"

namespace stimtrain::gradcheck {
namespace {

constexpr double kStep = 1e-6;

struct Accumulator {
  std::string name;
  int probes = 0;
  int kinks = 0;
  double worst = 0.0;

  void add(double analytic, double numeric) {
    worst = std::max(worst, relative_error(analytic, numeric));
    ++probes;
  }
  SuiteResult result(int min_probes) const {
    return {name, probes, kinks, worst, probes >= min_probes && worst < kTolerance};
  }
};

double central(double& slot, const std::function<double()>& f, double h = kStep) {
  const double saved = slot;
  slot = saved + h;
  const double up = f();
  slot = saved - h;
  const double down = f();
  slot = saved;
  return (up - down) / (2.0 * h);
}

// Central difference, or nullopt when the one-sided slopes disagree, which
// means a ReLU kink lies inside [x - h, x + h].
std::optional<double> smooth_central(double& slot, const std::function<double()>& f, double h = kStep) {
  const double saved = slot;
  const double mid = f();
  slot = saved + h;
  const double up = f();
  slot = saved - h;
  const double down = f();
  slot = saved;
  const double fwd = (up - mid) / h;
  const double bwd = (mid - down) / h;
  if (std::fabs(fwd - bwd) > 1e-4 * std::max({std::fabs(fwd), std::fabs(bwd), 1e-2})) return std::nullopt;
  return (up - down) / (2.0 * h);
}

std::vector<double> gaussian(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

std::size_t pick(std::size_t n, std::mt19937_64& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

LogitsBatch<double> random_logits(int b, int n, std::mt19937_64& rng, double sd = 2.0) {
  LogitsBatch<double> z(b, n);
  z.values = gaussian(z.values.size(), rng, sd);
  return z;
}

void loss_suites(std::mt19937_64& rng, int probes, std::vector<SuiteResult>& out) {
  const int b = 4;
  const int n = 6;
  {
    Accumulator acc{"loss.cross_entropy"};
    auto z = random_logits(b, n, rng);
    std::vector<int> y(b);
    for (auto& v : y) v = static_cast<int>(pick(n, rng));
    const auto g = loss::cross_entropy(z, y).grad;
    for (int p = 0; p < probes; ++p) {
      const std::size_t i = pick(z.values.size(), rng);
      acc.add(g.values[i], central(z.values[i], [&] { return loss::cross_entropy(z, y).value; }));
    }
    out.push_back(acc.result(probes));
  }
  for (const auto variant : {loss::Variant::kl, loss::Variant::kl_minus}) {
    Accumulator acc{variant == loss::Variant::kl ? "loss.kl" : "loss.kl_minus"};
    const auto teacher = random_logits(b, n, rng);
    auto student = random_logits(b, n, rng);
    const auto g = loss::distillation(variant, teacher, student).grad;
    for (int p = 0; p < probes; ++p) {
      const std::size_t i = pick(student.values.size(), rng);
      acc.add(g.values[i], central(student.values[i], [&] { return loss::distillation(variant, teacher, student).value; }));
    }
    out.push_back(acc.result(probes));
  }
}

void conv_suites(std::mt19937_64& rng, int probes, std::vector<SuiteResult>& out) {
  const kernels::ConvGeometry g{2, 3, 7, 6, 4, 3, 2, 1};
  for (const bool parallel : {false, true}) {
    const auto forward = parallel ? &kernels::parallel::conv2d_forward<double> : &kernels::reference::conv2d_forward<double>;
    const auto backward = parallel ? &kernels::parallel::conv2d_backward<double> : &kernels::reference::conv2d_backward<double>;
    auto x = gaussian(g.in_size(), rng);
    auto w = gaussian(g.weight_size(), rng);
    const auto r = gaussian(g.out_size(), rng);
    std::vector<double> y(g.out_size());
    auto f = [&] {
      forward(g, x.data(), w.data(), y.data());
      return dot(y, r);
    };
    std::vector<double> dx(g.in_size());
    std::vector<double> dw(g.weight_size(), 0.0);
    backward(g, x.data(), w.data(), r.data(), dx.data(), dw.data());
    const std::string prefix = parallel ? "kernel.conv2d_parallel" : "kernel.conv2d_reference";
    Accumulator ax{prefix + ".input"};
    Accumulator aw{prefix + ".weight"};
    for (int p = 0; p < probes; ++p) {
      const std::size_t i = pick(x.size(), rng);
      ax.add(dx[i], central(x[i], f));
      const std::size_t j = pick(w.size(), rng);
      aw.add(dw[j], central(w[j], f));
    }
    out.push_back(ax.result(probes));
    out.push_back(aw.result(probes));
  }
}

void batchnorm_suites(std::mt19937_64& rng, int probes, std::vector<SuiteResult>& out) {
  const kernels::NormShape s{3, 4, 5};
  const std::size_t total = static_cast<std::size_t>(s.batch) * s.channels * s.plane;
  for (const bool train : {true, false}) {
    auto x = gaussian(total, rng);
    auto gamma = gaussian(s.channels, rng);
    auto beta = gaussian(s.channels, rng);
    std::vector<double> rmean = gaussian(s.channels, rng, 0.3);
    std::vector<double> rvar(s.channels);
    for (auto& v : rvar) v = 0.5 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto r = gaussian(total, rng);
    const double eps = nn::Network<double>::kNormEps;
    std::vector<double> y(total), mean(s.channels), var(s.channels), invstd(s.channels);
    auto f = [&] {
      if (train) {
        kernels::batchnorm_forward_train(s, x.data(), gamma.data(), beta.data(), eps, y.data(), mean.data(), var.data(),
                                         invstd.data());
      } else {
        kernels::batchnorm_forward_eval(s, x.data(), gamma.data(), beta.data(), rmean.data(), rvar.data(), eps, y.data());
      }
      return dot(y, r);
    };
    f();
    std::vector<double> dx(total), dgamma(s.channels, 0.0), dbeta(s.channels, 0.0);
    if (train) {
      kernels::batchnorm_backward_train(s, x.data(), gamma.data(), mean.data(), invstd.data(), r.data(), dx.data(),
                                        dgamma.data(), dbeta.data());
    } else {
      kernels::batchnorm_backward_eval(s, x.data(), gamma.data(), rmean.data(), rvar.data(), eps, r.data(), dx.data(),
                                       dgamma.data(), dbeta.data());
    }
    const std::string prefix = train ? "kernel.batchnorm_train" : "kernel.batchnorm_eval";
    Accumulator ax{prefix + ".input"};
    Accumulator ag{prefix + ".scale"};
    Accumulator ab{prefix + ".shift"};
    for (int p = 0; p < probes; ++p) {
      const std::size_t i = pick(total, rng);
      ax.add(dx[i], central(x[i], f));
      const std::size_t c = pick(s.channels, rng);
      ag.add(dgamma[c], central(gamma[c], f));
      ab.add(dbeta[c], central(beta[c], f));
    }
    out.push_back(ax.result(probes));
    out.push_back(ag.result(probes));
    out.push_back(ab.result(probes));
  }
}

std::string_view role_name(nn::ParamRole r) {
  switch (r) {
    case nn::ParamRole::conv_weight: return "conv_weight";
    case nn::ParamRole::norm_scale: return "norm_scale";
    case nn::ParamRole::norm_shift: return "norm_shift";
    case nn::ParamRole::linear_weight: return "linear_weight";
    case nn::ParamRole::linear_bias: return "linear_bias";
    default: return "running_stat";
  }
}

// Loss = sum of logits weighted by a fixed random matrix. Probes cycle over
// every trainable parameter so each parameter role gets at least `probes`.
void network_suite(const std::string& name, const nn::NetworkSpec& spec, const nn::DepthMask& mask, nn::Mode mode,
                   std::mt19937_64& rng, int probes, std::vector<SuiteResult>& out) {
  nn::Network<double> net(spec, rng());
  // Non-trivial normalization constants so eval mode is not an identity.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& p : net.params()) {
    for (auto& v : p.value) {
      if (p.role == nn::ParamRole::norm_scale) v = 0.5 + unit(rng);
      if (p.role == nn::ParamRole::norm_shift || p.role == nn::ParamRole::running_mean) v = 0.2 * (unit(rng) - 0.5);
      if (p.role == nn::ParamRole::running_var) v = 0.5 + unit(rng);
    }
  }
  Tensor<double> x(3, spec.input_channels, 8, 8);
  x.data = gaussian(x.size(), rng);
  LogitsBatch<double> r(x.n, spec.num_classes);
  r.values = gaussian(r.values.size(), rng);

  const nn::Network<double>& cnet = net;
  auto f = [&] { return dot(cnet.forward(x, mask, mode).values, r.values); };

  net.params().zero_grad();
  nn::Trace<double> trace;
  net.forward(x, mask, {mode, false}, &trace);
  const Tensor<double> dx = net.backward(trace, r);

  std::map<std::string, Accumulator> groups;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    const auto& p = net.params()[i];
    if (!p.trainable()) continue;
    // Blocks skipped by the mask have identically zero gradient; probe only live ones.
    bool live = false;
    for (double g : p.grad) live = live || g != 0.0;
    if (!live) continue;
    members[std::string(role_name(p.role))].push_back(i);
  }
  for (auto& [role, idx] : members) {
    Accumulator& acc = groups[role];
    acc.name = name + "." + role;
    const int want = std::max<int>(probes, static_cast<int>(idx.size()));
    for (int p = 0, tries = 0; acc.probes < want && tries < 20 * want; ++tries) {
      auto& param = net.params()[idx[p % idx.size()]];
      const std::size_t j = pick(param.value.size(), rng);
      if (const auto numeric = smooth_central(param.value[j], f)) {
        acc.add(param.grad[j], *numeric);
        ++p;
      } else {
        ++acc.kinks;
      }
    }
  }
  Accumulator ai{name + ".input"};
  for (int tries = 0; ai.probes < probes && tries < 20 * probes; ++tries) {
    const std::size_t i = pick(x.size(), rng);
    if (const auto numeric = smooth_central(x.data[i], f)) {
      ai.add(dx.data[i], *numeric);
    } else {
      ++ai.kinks;
    }
  }
  for (auto& [role, acc] : groups) out.push_back(acc.result(probes));
  out.push_back(ai.result(probes));
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-7});
  return std::fabs(analytic - numeric) / denom;
}

std::vector<SuiteResult> run_all(std::uint64_t seed, int probes) {
  std::mt19937_64 rng(seed);
  std::vector<SuiteResult> out;
  loss_suites(rng, probes, out);
  conv_suites(rng, probes, out);
  batchnorm_suites(rng, probes, out);

  nn::NetworkSpec basic;
  basic.stage_blocks = {2, 2};
  basic.stage_widths = {4, 8};
  basic.num_classes = 5;
  network_suite("net.basic_train", basic, nn::DepthMask::full(basic), nn::Mode::train, rng, probes, out);
  network_suite("net.basic_eval", basic, nn::DepthMask::full(basic), nn::Mode::eval, rng, probes, out);
  network_suite("net.basic_subnet_train", basic, nn::DepthMask{{1, 1}}, nn::Mode::train, rng, probes, out);

  nn::NetworkSpec bottleneck;
  bottleneck.stage_blocks = {1, 2};
  bottleneck.stage_widths = {2, 3};
  bottleneck.num_classes = 4;
  bottleneck.block_kind = nn::BlockKind::bottleneck;
  network_suite("net.bottleneck_train", bottleneck, nn::DepthMask::full(bottleneck), nn::Mode::train, rng, probes, out);
  network_suite("net.bottleneck_eval", bottleneck, nn::DepthMask::full(bottleneck), nn::Mode::eval, rng, probes, out);
  return out;
}

}  // namespace stimtrain::gradcheck
