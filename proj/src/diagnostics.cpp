#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "stimtrain/checkpoint.hpp"
#include "stimtrain/diagnostics.hpp"
#include "stimtrain/error.hpp"
#include "stimtrain/kernels.hpp"
#include "stimtrain/losses.hpp"
#include "stimtrain/trainer.hpp"

namespace stimtrain::diag {
namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
Tensor<T> center_seed(int n, int c, int h, int w) {
  Tensor<T> d(n, c, h, w);
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) d.at(i, ch, h / 2, w / 2) = T(1);
  }
  return d;
}

std::vector<double> dirichlet(int n, double alpha, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(alpha, 1.0);
  std::vector<double> p(n);
  double sum = 0.0;
  for (auto& v : p) {
    v = g(rng) + 1e-300;
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

double ce_of(const std::vector<double>& p, int y) {
  return -std::log(std::max(p[y], loss::kProbabilityFloor));
}

}  // namespace

const LoafingRow* LoafingReport::find(const nn::DepthMask& mask) const {
  for (const auto& r : rows) {
    if (r.mask == mask) return &r;
  }
  return nullptr;
}

std::string LoafingReport::to_csv() const {
  std::string out = "mask,in_ensemble_top1,standalone_top1,gap\n";
  for (const auto& r : rows) {
    out += "\"" + r.mask.to_string() + "\"," + fmt(r.in_ensemble_top1) + ",";
    out += (r.standalone_top1 ? fmt(*r.standalone_top1) : std::string()) + ",";
    out += (r.gap ? fmt(*r.gap) : std::string()) + "\n";
  }
  return out;
}

LoafingReport measure_loafing(const nn::Network<float>& net, const sampling::SamplingRule& rule,
                              const img::Dataset& eval_set, const train::EvalConfig& eval,
                              const StandaloneCheckpoints& standalone, std::uint64_t cap) {
  LoafingReport report;
  for (const auto& mask : sampling::enumerate_space(net.spec(), rule, cap)) {
    LoafingRow row;
    row.mask = mask;
    row.in_ensemble_top1 = train::evaluate(net, mask, eval_set, eval).top1;
    const auto it = standalone.find(mask.to_string());
    if (it != standalone.end() && std::filesystem::is_regular_file(it->second)) {
      const nn::Network<float> alone = nn::network_from_checkpoint(nn::load_checkpoint(it->second));
      if (alone.spec().stage_blocks != mask.kept) {
        throw ConfigError("standalone checkpoint " + it->second.string() + " has stage depths that differ from mask " +
                          mask.to_string());
      }
      row.standalone_top1 = train::evaluate(alone, nn::DepthMask::full(alone.spec()), eval_set, eval).top1;
      row.gap = *row.standalone_top1 - row.in_ensemble_top1;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

Amplitude accumulate_amplitude(const nn::Network<float>& net, const nn::DepthMask& mask, const img::Dataset& data,
                               const train::EvalConfig& eval) {
  const LogitsBatch<float> z = train::predict(net, mask, data, eval);
  Amplitude a;
  if (z.batch == 0) return a;
  double sum = 0.0;
  for (int i = 0; i < z.batch; ++i) {
    double sq = 0.0;
    for (float v : z.row(i)) sq += static_cast<double>(v) * v;
    sum += std::sqrt(sq);
  }
  a.mean_magnitude = sum / z.batch;
  a.top1 = static_cast<double>(loss::topk_hits(z, data.labels).first) / z.batch;
  return a;
}

std::string amplitude_csv(const std::vector<std::pair<std::string, Amplitude>>& rows) {
  std::string out = "name,mean_magnitude,top1\n";
  for (const auto& [name, a] : rows) out += "\"" + name + "\"," + fmt(a.mean_magnitude) + "," + fmt(a.top1) + "\n";
  return out;
}

Tensor<float> NetworkFeatures::center_gradient(const Tensor<float>& batch) const {
  nn::Trace<float> trace;
  const Tensor<float> f = net_.forward_features(batch, mask_, nn::Mode::eval, &trace);
  return net_.input_gradient(trace, center_seed<float>(f.n, f.c, f.h, f.w));
}

ConvChain::ConvChain(std::vector<Layer> layers, std::uint64_t seed) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("conv chain needs at least one layer");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& l : layers_) {
    l.weight.resize(static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel * l.kernel);
    for (auto& v : l.weight) v = static_cast<float>(gauss(rng));
  }
}

Tensor<float> ConvChain::center_gradient(const Tensor<float>& batch) const {
  std::vector<kernels::ConvGeometry> geo;
  std::vector<Tensor<float>> acts{batch};
  for (const auto& l : layers_) {
    const Tensor<float>& x = acts.back();
    kernels::ConvGeometry g{x.n, x.c, x.h, x.w, l.out_channels, l.kernel, l.stride, l.pad};
    Tensor<float> y(x.n, l.out_channels, g.out_h(), g.out_w());
    kernels::reference::conv2d_forward(g, x.data.data(), l.weight.data(), y.data.data());
    geo.push_back(g);
    acts.push_back(std::move(y));
  }
  const Tensor<float>& top = acts.back();
  Tensor<float> d = center_seed<float>(top.n, top.c, top.h, top.w);
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Tensor<float>& x = acts[i];
    Tensor<float> dx(x.n, x.c, x.h, x.w);
    std::vector<float> scratch(layers_[i].weight.size());
    kernels::reference::conv2d_backward(geo[i], x.data.data(), layers_[i].weight.data(), d.data.data(),
                                        dx.data.data(), scratch.data());
    d = std::move(dx);
  }
  return d;
}

double ERFMap::area_ratio(double t) const {
  if (mass.empty()) return 0.0;
  std::vector<double> sorted = mass;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cum = 0.0;
  std::size_t k = 0;
  while (k < sorted.size() && cum < t - 1e-12) cum += sorted[k++];
  return static_cast<double>(std::max<std::size_t>(k, t > 0.0 ? 1 : 0)) / static_cast<double>(mass.size());
}

int ERFMap::support() const {
  return static_cast<int>(std::count_if(mass.begin(), mass.end(), [](double v) { return v > 0.0; }));
}

std::string ERFMap::to_csv() const {
  std::string out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x > 0) out += ",";
      out += fmt(at(y, x));
    }
    out += "\n";
  }
  return out;
}

std::string ERFMap::to_pgm() const {
  const double peak = mass.empty() ? 0.0 : *std::max_element(mass.begin(), mass.end());
  std::string out = "P2\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const long v = peak > 0.0 ? std::lround(at(y, x) / peak * 65535.0) : 0;
      if (x > 0) out += " ";
      out += std::to_string(v);
    }
    out += "\n";
  }
  return out;
}

ERFMap compute_erf(const FeatureModel& model, int input_size, int num_samples, std::mt19937_64& rng,
                   int batch_size) {
  if (input_size < 1 || num_samples < 1 || batch_size < 1) {
    throw InputError("compute_erf: input size, sample count and batch size must be >= 1");
  }
  const int c = model.input_channels();
  ERFMap map;
  map.h = input_size;
  map.w = input_size;
  map.mass.assign(static_cast<std::size_t>(input_size) * input_size, 0.0);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  for (int done = 0; done < num_samples; done += batch_size) {
    const int b = std::min(batch_size, num_samples - done);
    Tensor<float> x(b, c, input_size, input_size);
    for (auto& v : x.data) v = gauss(rng);
    const Tensor<float> g = model.center_gradient(x);
    for (int n = 0; n < b; ++n) {
      for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < input_size; ++y) {
          for (int xx = 0; xx < input_size; ++xx) {
            map.mass[static_cast<std::size_t>(y) * input_size + xx] += std::fabs(static_cast<double>(g.at(n, ch, y, xx)));
          }
        }
      }
    }
  }
  double total = 0.0;
  for (double v : map.mass) total += v;
  if (!(total > 0.0)) throw StateError("compute_erf: input gradient is identically zero");
  for (double& v : map.mass) v /= total;
  return map;
}

double ce_gap_bound(double eps1, double eps2, int num_classes) {
  if (!(eps1 >= 0.0) || !(eps2 >= 0.0)) throw InputError("ce_gap_bound: eps1 and eps2 must be >= 0");
  if (num_classes < 2) throw InputError("ce_gap_bound: need at least 2 classes");
  return (eps2 + std::log(static_cast<double>(num_classes))) / std::exp(-eps1) + eps1;
}

BoundTrials validate_bound_on_simplex(int trials, std::mt19937_64& rng, int max_classes) {
  if (max_classes < 2) throw InputError("validate_bound_on_simplex: max_classes must be >= 2");
  std::uniform_int_distribution<int> classes(2, max_classes);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  BoundTrials out;
  for (int t = 0; t < trials; ++t) {
    const int n = classes(rng);
    // Concentrations from 0.05 to 5 give both peaked and flat distributions.
    const double a_m = 0.05 * std::pow(100.0, unit(rng));
    const double a_s = 0.05 * std::pow(100.0, unit(rng));
    auto p_m = dirichlet(n, a_m, rng);
    auto p_s = dirichlet(n, a_s, rng);
    for (auto& v : p_m) v = std::max(v, 1e-9);
    for (auto& v : p_s) v = std::max(v, 1e-9);
    double sm = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
      sm += p_m[i];
      ss += p_s[i];
    }
    for (auto& v : p_m) v /= sm;
    for (auto& v : p_s) v /= ss;
    const int y = std::uniform_int_distribution<int>(0, n - 1)(rng);

    const double ce_m = ce_of(p_m, y);
    const double ce_s = ce_of(p_s, y);
    const double eps1 = ce_m + 0.1 * unit(rng) * ce_m + 1e-12;
    const double eps2 = loss::kl_divergence(p_m, p_s) * (1.0 + 0.1 * unit(rng)) + 1e-12;
    const double bound = ce_gap_bound(eps1, eps2, n);
    const double gap = std::fabs(ce_m - ce_s);
    out.worst_ratio = std::max(out.worst_ratio, gap / bound);
    if (gap > bound) ++out.counterexamples;
    ++out.trials;
  }
  return out;
}

}  // namespace stimtrain::diag
