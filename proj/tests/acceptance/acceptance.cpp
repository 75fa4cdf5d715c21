// One PASS/FAIL line per acceptance criterion that runs at desk scale.
// Criteria 7 and 8 need CIFAR-10 and live in acceptance_cifar.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fixtures.hpp"
#include "stats.hpp"
#include "stimtrain/checkpoint.hpp"
#include "stimtrain/diagnostics.hpp"
#include "stimtrain/gradcheck.hpp"
#include "stimtrain/harness.hpp"
#include "stimtrain/imgops.hpp"
#include "stimtrain/losses.hpp"
#include "stimtrain/network.hpp"
#include "stimtrain/sampler.hpp"
#include "stimtrain/trainer.hpp"

using namespace stimtrain;
using testing::fresh_dir;
using testing::slurp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s criterion %d: %s (%s; %.1fs)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

LogitsBatch<double> random_logits(int b, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 3.0);
  LogitsBatch<double> z(b, n);
  for (auto& v : z.values) v = g(rng);
  return z;
}

Outcome klminus_correctness() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> scale(1e-2, 1e2);
  double worst_self = 0.0, worst_scale = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 2 + static_cast<int>(rng() % 20);
    const auto zt = random_logits(4, n, rng), zs = random_logits(4, n, rng);
    worst_self = std::max(worst_self, std::abs(loss::kl_minus(zt, zt).value));
    auto scaled = zt;
    for (int i = 0; i < scaled.batch; ++i) {
      const double c = scale(rng);
      for (auto& v : scaled.row(i)) v *= c;
    }
    worst_scale = std::max(worst_scale, std::abs(loss::kl_minus(scaled, zs).value - loss::kl_minus(zt, zs).value));
  }
  LogitsBatch<double> a(1, 2), b(1, 2);
  a.values = {3.0, 4.0};
  b.values = {4.0, 3.0};
  const double v = loss::kl_minus(a, b).value;
  std::ostringstream d;
  d << "max|kl-(Z,Z)|=" << worst_self << " max scale drift=" << worst_scale << " (3,4)/(4,3)=" << v;
  return {worst_self < 1e-12 && worst_scale < 1e-9 && std::abs(v - 0.019934) < 1e-6, d.str()};
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto suites = gradcheck::run_all(0, gradcheck::kMinProbes);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = secs < 60.0;
  double worst = 0.0;
  int min_probes = 1 << 30;
  std::string failed;
  bool ce = false, kl = false, klm = false, conv = false, bn = false, fc = false;
  for (const auto& s : suites) {
    ok = ok && s.passed && s.probes >= 20 && s.max_rel_error < 1e-4;
    if (!s.passed) failed += " " + s.name;
    worst = std::max(worst, s.max_rel_error);
    min_probes = std::min(min_probes, s.probes);
    ce = ce || s.name == "loss.cross_entropy";
    kl = kl || s.name == "loss.kl";
    klm = klm || s.name == "loss.kl_minus";
    conv = conv || s.name.find("conv_weight") != std::string::npos;
    bn = bn || s.name.find("norm_scale") != std::string::npos;
    fc = fc || s.name.find("linear_weight") != std::string::npos;
  }
  ok = ok && ce && kl && klm && conv && bn && fc;
  std::ostringstream d;
  d << suites.size() << " suites, min probes " << min_probes << ", worst rel err " << worst << ", " << secs << "s";
  if (!failed.empty()) d << ", failed:" << failed;
  return {ok, d.str()};
}

Outcome weight_sharing_identity() {
  nn::Network<float> net(nn::cifar_resnet(20), 3);
  std::mt19937_64 rng(2);
  std::normal_distribution<float> g(0.0f, 1.0f);
  const auto full = nn::DepthMask::full(net.spec());
  double worst = 0.0;
  for (int b = 0; b < 100; ++b) {
    Tensor<float> x(2, 3, 32, 32);
    for (auto& v : x.data) v = g(rng);
    const nn::Mode mode = b % 2 == 0 ? nn::Mode::train : nn::Mode::eval;
    const auto main = net.forward(x, nn::ForwardOptions{mode, false});
    const auto masked = net.forward(x, full, nn::ForwardOptions{mode, false});
    for (std::size_t i = 0; i < main.values.size(); ++i) {
      worst = std::max(worst, static_cast<double>(std::abs(main.values[i] - masked.values[i])));
    }
  }
  return {worst == 0.0, "max |diff| over 100 batches = " + std::to_string(worst)};
}

Outcome sampling_space() {
  std::mt19937_64 rng(3);
  int length_ok = 0;
  for (int t = 0; t < 50; ++t) {
    nn::NetworkSpec s;
    const int stages = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < stages; ++i) {
      s.stage_blocks.push_back(1 + static_cast<int>(rng() % 6));
      s.stage_widths.push_back(8);
    }
    sampling::SamplingRule r;
    std::uint64_t product = 1;
    for (int n : s.stage_blocks) {
      r.choices.push_back(1 + static_cast<int>(rng() % n));
      product *= r.choices.back();
    }
    length_ok += sampling::enumerate_space(s, r).size() == product;
  }
  nn::NetworkSpec r50;
  r50.stage_blocks = {3, 4, 6, 3};
  r50.stage_widths = {8, 8, 8, 8};
  const auto masks = sampling::enumerate_space(r50, {{1, 2, 4, 1}});
  std::vector<int> lo(4, 99);
  for (const auto& m : masks) {
    for (int i = 0; i < 4; ++i) lo[i] = std::min(lo[i], m.kept[i]);
  }
  const auto full = sampling::SamplingRule::full(r50);
  std::vector<std::vector<long>> counts;
  for (int n : r50.stage_blocks) counts.emplace_back(n, 0);
  for (int i = 0; i < 10000; ++i) {
    const auto m = sampling::sample_subnet(r50, full, rng);
    for (int st = 0; st < 4; ++st) ++counts[st][m.kept[st] - 1];
  }
  bool uniform = true;
  std::ostringstream d;
  d << length_ok << "/50 lengths, [1,2,4,1] -> " << masks.size() << " masks, min (" << lo[0] << "," << lo[1] << ","
    << lo[2] << "," << lo[3] << "), chi2";
  for (const auto& c : counts) {
    const double chi = testing::chi2_uniform(c);
    const double crit = testing::chi2_critical_001(static_cast<int>(c.size()) - 1);
    uniform = uniform && chi < crit;
    d << " " << chi << "<" << crit;
  }
  return {length_ok == 50 && masks.size() == 8 && lo == std::vector<int>{3, 3, 3, 3} && uniform, d.str()};
}

// Each shipped preset with its mode, K, loss and sampling rule intact, shrunk
// to synthetic data.
train::TrainConfig shrink(train::TrainConfig cfg) {
  cfg.epochs = 3;
  cfg.batch_size = 32;
  cfg.model.stage_blocks = {2, 2, 2};
  cfg.model.stage_widths = {8, 16, 32};
  cfg.resolution = {5, 16};
  cfg.data.source = "synth";
  cfg.data.synth.samples_per_class = 20;
  cfg.data.synth.test_samples_per_class = 10;
  cfg.data.synth.size = 16;
  cfg.eval.val_resize = 16;
  cfg.eval.val_crop = 16;
  cfg.eval.every = 1;
  cfg.validate();
  return cfg;
}

Outcome bound_validator() {
  std::mt19937_64 rng(4);
  const auto trials = diag::validate_bound_on_simplex(10000, rng);
  int epochs = 0, violations = 0;
  for (const auto& p : harness::presets()) {
    const auto dir = fresh_dir("acceptance_bound_" + p.name);
    train::run_experiment(shrink(p.config), dir);
    std::istringstream lines(slurp(dir / "bound.jsonl"));
    std::string line;
    while (std::getline(lines, line)) {
      const auto j = nlohmann::json::parse(line);
      ++epochs;
      violations += !j.at("holds").get<bool>();
    }
  }
  std::ostringstream d;
  d << trials.counterexamples << " counterexamples in " << trials.trials << " simplex trials (worst ratio "
    << trials.worst_ratio << "), " << violations << " violations over " << epochs << " eval epochs of "
    << harness::presets().size() << " presets";
  return {trials.trials == 10000 && trials.counterexamples == 0 && epochs == 15 && violations == 0, d.str()};
}

Outcome resize_oracle() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  double worst = 0.0;
  for (int t = 0; t < 300; ++t) {
    const int h = 1 + static_cast<int>(rng() % 16), w = 1 + static_cast<int>(rng() % 16);
    const int oh = 1 + static_cast<int>(rng() % 16), ow = 1 + static_cast<int>(rng() % 16);
    Tensor<float> img(1, 3, h, w);
    for (auto& v : img.data) v = u(rng);
    const auto out = img::resize_bilinear(img, oh, ow);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          const double sy = std::clamp((y + 0.5) * h / oh - 0.5, 0.0, h - 1.0);
          const double sx = std::clamp((x + 0.5) * w / ow - 0.5, 0.0, w - 1.0);
          const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
          const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
          const double fy = sy - y0, fx = sx - x0;
          const double ref = (1 - fy) * ((1 - fx) * img.at(0, c, y0, x0) + fx * img.at(0, c, y0, x1)) +
                             fy * ((1 - fx) * img.at(0, c, y1, x0) + fx * img.at(0, c, y1, x1));
          worst = std::max(worst, std::abs(out.at(0, c, y, x) - ref));
        }
      }
    }
  }
  Tensor<float> four(1, 1, 2, 2);
  four.data = {0.1f, 0.7f, 0.4f, 0.2f};
  const float mean4 = img::resize_shorter_side(four, 1).data.at(0);
  Tensor<float> img(2, 3, 9, 13);
  for (auto& v : img.data) v = u(rng);
  const bool identity = img::resize_shorter_side(img, 9) == img;
  std::ostringstream d;
  d << "max oracle diff " << worst << ", 2x2->1x1 " << mean4 << ", identity " << (identity ? "exact" : "differs");
  return {worst < 1e-6 && std::abs(mean4 - 0.35) < 1e-6 && identity, d.str()};
}

std::filesystem::path train_for_erf(const std::vector<int>& blocks) {
  auto cfg = testing::tiny_config(train::TrainMode::ct, 0);
  cfg.epochs = 4;
  cfg.model.stage_blocks = blocks;
  cfg.model.stage_widths = {8, 16};
  cfg.model.num_classes = 10;
  cfg.data.synth.num_classes = 10;
  cfg.data.synth.samples_per_class = 30;
  cfg.data.synth.size = 16;
  cfg.eval.val_resize = 16;
  cfg.eval.val_crop = 16;
  cfg.eval.subnets = "none";
  std::string tag = "acceptance_erf";
  for (int b : blocks) tag += "_" + std::to_string(b);
  const auto dir = fresh_dir(tag);
  train::run_experiment(cfg, dir);
  return dir / "ckpt_final.stpp";
}

Outcome erf_properties() {
  std::mt19937_64 rng(6);
  diag::ConvChain::Layer l;
  const auto one = diag::compute_erf(diag::ConvChain({l}, 1), 11, 8, rng);
  l.in_channels = 1;
  diag::ConvChain::Layer l2 = l;
  const auto two = diag::compute_erf(diag::ConvChain({l, l2}, 1), 11, 8, rng);

  const auto shallow = nn::network_from_checkpoint(nn::load_checkpoint(train_for_erf({1, 1})));
  const auto deep = nn::network_from_checkpoint(nn::load_checkpoint(train_for_erf({3, 3})));
  auto area = [&](const nn::Network<float>& net, int size) {
    std::mt19937_64 r(7);
    return diag::compute_erf(diag::NetworkFeatures(net, nn::DepthMask::full(net.spec())), size, 64, r)
        .area_ratio(0.5);
  };
  const double a_shallow = area(shallow, 32), a_deep = area(deep, 32), a_half = area(shallow, 16);
  std::ostringstream d;
  d << "support " << one.support() << " and " << two.support() << ", area_ratio(0.5) at 32: [1,1] " << a_shallow
    << " vs [3,3] " << a_deep << ", [1,1] at 16: " << a_half;
  return {one.support() == 9 && two.support() == 25 && a_deep > a_shallow && a_half > a_shallow, d.str()};
}

Outcome determinism() {
  auto cfg = testing::tiny_config(train::TrainMode::st_pp, 3);
  cfg.epochs = 3;
  cfg.variant = loss::Variant::kl_minus;
  const auto a = fresh_dir("acceptance_det_a"), b = fresh_dir("acceptance_det_b"), c = fresh_dir("acceptance_det_c");
  train::run_experiment(cfg, a);
  train::run_experiment(cfg, b);
  auto stop = cfg;
  stop.stop_after_epochs = 1;
  train::run_experiment(stop, c);
  train::run_experiment(cfg, c, c / "ckpt_last.stpp");
  const bool same = slurp(a / "metrics.jsonl") == slurp(b / "metrics.jsonl") &&
                    slurp(a / "ckpt_final.stpp") == slurp(b / "ckpt_final.stpp");
  const bool resumed = slurp(a / "metrics.jsonl") == slurp(c / "metrics.jsonl") &&
                       slurp(a / "ckpt_final.stpp") == slurp(c / "ckpt_final.stpp");
  return {same && resumed && !slurp(a / "metrics.jsonl").empty(),
          std::string("repeat ") + (same ? "byte-identical" : "differs") + ", resume " +
              (resumed ? "byte-identical" : "differs")};
}

}  // namespace

int main() {
  report(1, "KL- correctness", klminus_correctness);
  report(2, "gradient suite", gradient_suite);
  report(3, "weight-sharing identity", weight_sharing_identity);
  report(4, "sampling space", sampling_space);
  report(5, "CE-gap bound validator", bound_validator);
  report(6, "resize oracle", resize_oracle);
  std::printf("SKIP criterion 7: desk-scale ladder (needs CIFAR-10; see acceptance_cifar)\n");
  std::printf("SKIP criterion 8: loafing echo (needs CIFAR-10; see acceptance_cifar)\n");
  report(9, "ERF properties", erf_properties);
  report(10, "determinism and resumability", determinism);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
