#include "stimtrain/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "stimtrain/error.hpp"
#include "stimtrain/kernels.hpp"

namespace stimtrain::nn {

std::string_view to_string(BlockKind kind) {
  return kind == BlockKind::basic ? "basic" : "bottleneck";
}

BlockKind parse_block_kind(std::string_view s) {
  if (s == "basic") return BlockKind::basic;
  if (s == "bottleneck") return BlockKind::bottleneck;
  throw ConfigError("model.block: expected \"basic\" or \"bottleneck\", got \"" + std::string(s) + "\"");
}

void NetworkSpec::validate() const {
  if (stage_blocks.empty()) throw ConfigError("model.stage_blocks: at least one stage is required");
  if (stage_blocks.size() != stage_widths.size()) {
    throw ConfigError("model.stage_widths: length " + std::to_string(stage_widths.size()) +
                      " does not match model.stage_blocks length " +
                      std::to_string(stage_blocks.size()));
  }
  for (std::size_t i = 0; i < stage_blocks.size(); ++i) {
    if (stage_blocks[i] < 1) {
      throw ConfigError("model.stage_blocks[" + std::to_string(i) + "]: must be >= 1, got " +
                        std::to_string(stage_blocks[i]));
    }
    if (stage_widths[i] < 1) {
      throw ConfigError("model.stage_widths[" + std::to_string(i) + "]: must be >= 1, got " +
                        std::to_string(stage_widths[i]));
    }
  }
  if (num_classes < 2) throw ConfigError("model.num_classes: must be >= 2");
  if (input_channels < 1) throw ConfigError("model.input_channels: must be >= 1");
  if (stem.kernel < 1) throw ConfigError("model.stem_kernel: must be >= 1");
  if (stem.stride < 1) throw ConfigError("model.stem_stride: must be >= 1");
}

NetworkSpec cifar_resnet(int depth, int num_classes) {
  if (depth < 8 || (depth - 2) % 6 != 0) {
    throw ConfigError("cifar_resnet: depth must be 6n+2 with n >= 1, got " + std::to_string(depth));
  }
  const int n = (depth - 2) / 6;
  NetworkSpec spec;
  spec.stage_blocks = {n, n, n};
  spec.stage_widths = {16, 32, 64};
  spec.num_classes = num_classes;
  spec.stem = {3, 1};
  spec.block_kind = BlockKind::basic;
  spec.input_channels = 3;
  return spec;
}

NetworkSpec quarter_resnet50(int num_classes) {
  NetworkSpec spec;
  spec.stage_blocks = {3, 4, 6, 3};
  spec.stage_widths = {16, 32, 64, 128};
  spec.num_classes = num_classes;
  spec.stem = {3, 1};
  spec.block_kind = BlockKind::bottleneck;
  spec.input_channels = 3;
  return spec;
}

DepthMask DepthMask::full(const NetworkSpec& spec) { return DepthMask{spec.stage_blocks}; }

void DepthMask::validate(const NetworkSpec& spec) const {
  if (kept.size() != spec.stage_blocks.size()) {
    throw MaskError("depth mask has " + std::to_string(kept.size()) + " stages, network has " +
                    std::to_string(spec.stage_blocks.size()));
  }
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i] < 1 || kept[i] > spec.stage_blocks[i]) {
      throw MaskError("depth mask stage " + std::to_string(i) + " keeps " +
                      std::to_string(kept[i]) + " blocks; allowed range is [1, " +
                      std::to_string(spec.stage_blocks[i]) + "]");
    }
  }
}

bool DepthMask::is_full(const NetworkSpec& spec) const { return kept == spec.stage_blocks; }

std::string DepthMask::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(kept[i]);
  }
  return out;
}

DepthMask DepthMask::parse(std::string_view text) {
  DepthMask m;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const auto part = text.substr(pos, comma - pos);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc() || ptr != part.data() + part.size()) {
      throw MaskError("cannot parse depth mask \"" + std::string(text) + "\"");
    }
    m.kept.push_back(v);
    pos = comma + 1;
  }
  return m;
}

template <typename T>
std::size_t ParameterSet<T>::add(std::string name, std::vector<int> shape, ParamRole role, T fill) {
  if (index_.count(name)) throw StateError("duplicate parameter name " + name);
  std::size_t count = 1;
  for (int d : shape) count *= static_cast<std::size_t>(d);
  Param<T> p;
  p.name = name;
  p.shape = std::move(shape);
  p.role = role;
  p.value.assign(count, fill);
  p.grad.assign(count, T(0));
  index_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

template <typename T>
std::size_t ParameterSet<T>::index(const std::string& name) const {
  return index_.at(name);
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
}

template <typename T>
std::size_t ParameterSet<T>::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable()) n += p.value.size();
  }
  return n;
}

namespace {

template <typename T>
ConvBnLayout add_conv_bn(ParameterSet<T>& ps, const std::string& conv_name,
                         const std::string& bn_name, int in, int out, int k, int stride) {
  ConvBnLayout l;
  l.in_channels = in;
  l.out_channels = out;
  l.kernel = k;
  l.stride = stride;
  l.pad = k / 2;
  l.weight = ps.add(conv_name + ".weight", {out, in, k, k}, ParamRole::conv_weight, T(0));
  l.gamma = ps.add(bn_name + ".weight", {out}, ParamRole::norm_scale, T(1));
  l.beta = ps.add(bn_name + ".bias", {out}, ParamRole::norm_shift, T(0));
  l.running_mean = ps.add(bn_name + ".running_mean", {out}, ParamRole::running_mean, T(0));
  l.running_var = ps.add(bn_name + ".running_var", {out}, ParamRole::running_var, T(1));
  return l;
}

template <typename T>
void relu_inplace(Tensor<T>& t) {
  T* d = t.data.data();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(t.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) d[i] = d[i] > T(0) ? d[i] : T(0);
}

// grad *= (activation > 0)
template <typename T>
void relu_mask(Tensor<T>& grad, const Tensor<T>& activation) {
  T* g = grad.data.data();
  const T* a = activation.data.data();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(grad.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (!(a[i] > T(0))) g[i] = T(0);
  }
}

template <typename T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data.data();
  const T* s = src.data.data();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(dst.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) d[i] += s[i];
}

kernels::ConvGeometry geometry(const ConvBnLayout& l, int batch, int h, int w) {
  kernels::ConvGeometry g;
  g.batch = batch;
  g.in_channels = l.in_channels;
  g.in_h = h;
  g.in_w = w;
  g.out_channels = l.out_channels;
  g.kernel = l.kernel;
  g.stride = l.stride;
  g.pad = l.pad;
  return g;
}

}  // namespace

template <typename T>
Network<T>::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  const int exp = spec_.expansion();
  const int stem_width = spec_.stage_widths[0];
  stem_ = add_conv_bn(params_, "stem.conv", "stem.bn", spec_.input_channels, stem_width,
                      spec_.stem.kernel, spec_.stem.stride);
  int in = stem_width;
  stages_.resize(spec_.stage_blocks.size());
  for (int s = 0; s < spec_.num_stages(); ++s) {
    const int width = spec_.stage_widths[s];
    const int out = width * exp;
    for (int b = 0; b < spec_.stage_blocks[s]; ++b) {
      const std::string prefix = "stages." + std::to_string(s) + "." + std::to_string(b) + ".";
      const int stride = (s > 0 && b == 0) ? 2 : 1;
      BlockLayout bl;
      if (spec_.block_kind == BlockKind::basic) {
        bl.units.push_back(add_conv_bn(params_, prefix + "conv1", prefix + "bn1", in, width, 3, stride));
        bl.units.push_back(add_conv_bn(params_, prefix + "conv2", prefix + "bn2", width, width, 3, 1));
      } else {
        bl.units.push_back(add_conv_bn(params_, prefix + "conv1", prefix + "bn1", in, width, 1, 1));
        bl.units.push_back(add_conv_bn(params_, prefix + "conv2", prefix + "bn2", width, width, 3, stride));
        bl.units.push_back(add_conv_bn(params_, prefix + "conv3", prefix + "bn3", width, out, 1, 1));
      }
      if (stride != 1 || in != out) {
        bl.shortcut = add_conv_bn(params_, prefix + "shortcut.conv", prefix + "shortcut.bn", in,
                                  out, 1, stride);
      }
      stages_[s].push_back(std::move(bl));
      in = out;
    }
  }
  fc_weight_ = params_.add("fc.weight", {spec_.num_classes, in}, ParamRole::linear_weight, T(0));
  fc_bias_ = params_.add("fc.bias", {spec_.num_classes}, ParamRole::linear_bias, T(0));

  // Draws happen in double so float and double networks built from one seed
  // agree up to rounding.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& p : params_) {
    if (p.role != ParamRole::conv_weight && p.role != ParamRole::linear_weight) continue;
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < p.shape.size(); ++d) fan_in *= static_cast<std::size_t>(p.shape[d]);
    const double gain = p.role == ParamRole::conv_weight ? 2.0 : 1.0;
    const double stddev = std::sqrt(gain / static_cast<double>(fan_in));
    for (auto& v : p.value) v = static_cast<T>(normal(rng) * stddev);
  }
}

template <typename T>
void Network<T>::validate_input(const Tensor<T>& batch) const {
  if (batch.n < 1) throw InputError("input batch is empty");
  if (batch.c != spec_.input_channels) {
    throw InputError("input has " + std::to_string(batch.c) + " channels, network expects " +
                     std::to_string(spec_.input_channels));
  }
  if (batch.h < 1 || batch.w < 1) throw InputError("input spatial size must be positive");
  const auto g = geometry(stem_, batch.n, batch.h, batch.w);
  if (g.out_h() < 1 || g.out_w() < 1) {
    throw InputError("input " + std::to_string(batch.h) + "x" + std::to_string(batch.w) +
                     " is smaller than the stem kernel");
  }
  for (const T v : batch.data) {
    if (!std::isfinite(static_cast<double>(v))) throw InputError("input contains non-finite values");
  }
}

template <typename T>
Tensor<T> Network<T>::conv_bn(const ConvBnLayout& l, const Tensor<T>& x, Mode mode,
                              ParameterSet<T>* stats, ConvBnCache<T>* cache) const {
  const auto g = geometry(l, x.n, x.h, x.w);
  if (g.out_h() < 1 || g.out_w() < 1) {
    throw InputError("input too small: feature map " + std::to_string(x.h) + "x" +
                     std::to_string(x.w) + " collapses to zero size");
  }
  Tensor<T> conv(x.n, l.out_channels, g.out_h(), g.out_w());
  const T* weight = params_[l.weight].value.data();
  if (backend_ == Backend::reference) {
    kernels::reference::conv2d_forward(g, x.data.data(), weight, conv.data.data());
  } else {
    kernels::parallel::conv2d_forward(g, x.data.data(), weight, conv.data.data());
  }

  Tensor<T> y(conv.n, conv.c, conv.h, conv.w);
  const kernels::NormShape ns{conv.n, conv.c, static_cast<int>(conv.plane())};
  const T* gamma = params_[l.gamma].value.data();
  const T* beta = params_[l.beta].value.data();
  std::vector<double> mean;
  std::vector<double> invstd;
  if (mode == Mode::train) {
    mean.resize(conv.c);
    invstd.resize(conv.c);
    std::vector<double> var(conv.c);
    kernels::batchnorm_forward_train(ns, conv.data.data(), gamma, beta, kNormEps, y.data.data(),
                                     mean.data(), var.data(), invstd.data());
    if (stats != nullptr) {
      auto& rm = (*stats)[l.running_mean].value;
      auto& rv = (*stats)[l.running_var].value;
      const double count = static_cast<double>(ns.batch) * ns.plane;
      const double unbias = count > 1 ? count / (count - 1) : 1.0;
      for (int c = 0; c < conv.c; ++c) {
        rm[c] = static_cast<T>((1 - kNormMomentum) * rm[c] + kNormMomentum * mean[c]);
        rv[c] = static_cast<T>((1 - kNormMomentum) * rv[c] + kNormMomentum * var[c] * unbias);
      }
    }
  } else {
    kernels::batchnorm_forward_eval(ns, conv.data.data(), gamma, beta,
                                    params_[l.running_mean].value.data(),
                                    params_[l.running_var].value.data(), kNormEps, y.data.data());
  }
  if (cache != nullptr) {
    cache->input = x;
    cache->conv_out = std::move(conv);
    cache->mean = std::move(mean);
    cache->invstd = std::move(invstd);
    cache->mode = mode;
  }
  return y;
}

template <typename T>
Tensor<T> Network<T>::run_features(const Tensor<T>& batch, const DepthMask& mask, Mode mode,
                                   ParameterSet<T>* stats, Trace<T>* trace) const {
  mask.validate(spec_);
  validate_input(batch);
  if (trace != nullptr) *trace = Trace<T>{};

  Tensor<T> x = conv_bn(stem_, batch, mode, stats, trace ? &trace->stem : nullptr);
  relu_inplace(x);
  if (trace != nullptr) trace->stem_out = x;

  for (int s = 0; s < spec_.num_stages(); ++s) {
    for (int b = 0; b < mask.kept[s]; ++b) {
      const BlockLayout& bl = stages_[s][b];
      BlockCache<T>* bc = nullptr;
      if (trace != nullptr) {
        trace->blocks.emplace_back();
        bc = &trace->blocks.back();
        bc->stage = s;
        bc->block = b;
        bc->units.resize(bl.units.size());
      }
      Tensor<T> h = x;
      for (std::size_t u = 0; u < bl.units.size(); ++u) {
        h = conv_bn(bl.units[u], h, mode, stats, bc ? &bc->units[u] : nullptr);
        if (u + 1 < bl.units.size()) relu_inplace(h);
      }
      if (bl.shortcut) {
        ConvBnCache<T>* sc = nullptr;
        if (bc != nullptr) {
          bc->shortcut.emplace();
          sc = &*bc->shortcut;
        }
        add_inplace(h, conv_bn(*bl.shortcut, x, mode, stats, sc));
      } else {
        add_inplace(h, x);
      }
      relu_inplace(h);
      if (bc != nullptr) bc->output = h;
      x = std::move(h);
    }
  }
  if (trace != nullptr) {
    trace->features = x;
    trace->recorded = true;
  }
  return x;
}

template <typename T>
LogitsBatch<T> Network<T>::head(const Tensor<T>& f, Trace<T>* trace) const {
  const int channels = f.c;
  const std::size_t plane = f.plane();
  std::vector<T> pooled(static_cast<std::size_t>(f.n) * channels);
  for (int n = 0; n < f.n; ++n) {
    for (int c = 0; c < channels; ++c) {
      const T* p = f.data.data() + (static_cast<std::size_t>(n) * channels + c) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      pooled[static_cast<std::size_t>(n) * channels + c] = static_cast<T>(acc / static_cast<double>(plane));
    }
  }
  const auto& w = params_[fc_weight_].value;
  const auto& bias = params_[fc_bias_].value;
  LogitsBatch<T> out(f.n, spec_.num_classes);
  for (int n = 0; n < f.n; ++n) {
    for (int k = 0; k < spec_.num_classes; ++k) {
      T acc = bias[k];
      for (int c = 0; c < channels; ++c) {
        acc += w[static_cast<std::size_t>(k) * channels + c] * pooled[static_cast<std::size_t>(n) * channels + c];
      }
      out.at(n, k) = acc;
    }
  }
  if (trace != nullptr) {
    trace->pooled = std::move(pooled);
    trace->has_head = true;
  }
  return out;
}

template <typename T>
LogitsBatch<T> Network<T>::forward(const Tensor<T>& batch, const DepthMask& mask,
                                   ForwardOptions opts, Trace<T>* trace) {
  const bool update =
      opts.update_running_stats && opts.mode == Mode::train && mask.kept == spec_.stage_blocks;
  const Tensor<T> f = run_features(batch, mask, opts.mode, update ? &params_ : nullptr, trace);
  return head(f, trace);
}

template <typename T>
LogitsBatch<T> Network<T>::forward(const Tensor<T>& batch, const DepthMask& mask, Mode mode,
                                   Trace<T>* trace) const {
  const Tensor<T> f = run_features(batch, mask, mode, nullptr, trace);
  return head(f, trace);
}

template <typename T>
Tensor<T> Network<T>::forward_features(const Tensor<T>& batch, const DepthMask& mask, Mode mode,
                                       Trace<T>* trace) const {
  return run_features(batch, mask, mode, nullptr, trace);
}

template <typename T>
Tensor<T> Network<T>::conv_bn_backward(const ConvBnLayout& l, const ConvBnCache<T>& cache,
                                       const Tensor<T>& dy, ParameterSet<T>* grads) const {
  const Tensor<T>& conv = cache.conv_out;
  const kernels::NormShape ns{conv.n, conv.c, static_cast<int>(conv.plane())};
  std::vector<T> scratch_gamma;
  std::vector<T> scratch_beta;
  std::vector<T> scratch_weight;
  T* dgamma = nullptr;
  T* dbeta = nullptr;
  T* dweight = nullptr;
  if (grads != nullptr) {
    dgamma = (*grads)[l.gamma].grad.data();
    dbeta = (*grads)[l.beta].grad.data();
    dweight = (*grads)[l.weight].grad.data();
  } else {
    scratch_gamma.assign(conv.c, T(0));
    scratch_beta.assign(conv.c, T(0));
    scratch_weight.assign(params_[l.weight].value.size(), T(0));
    dgamma = scratch_gamma.data();
    dbeta = scratch_beta.data();
    dweight = scratch_weight.data();
  }

  Tensor<T> dconv(conv.n, conv.c, conv.h, conv.w);
  const T* gamma = params_[l.gamma].value.data();
  if (cache.mode == Mode::train) {
    kernels::batchnorm_backward_train(ns, conv.data.data(), gamma, cache.mean.data(),
                                      cache.invstd.data(), dy.data.data(), dconv.data.data(),
                                      dgamma, dbeta);
  } else {
    kernels::batchnorm_backward_eval(ns, conv.data.data(), gamma,
                                     params_[l.running_mean].value.data(),
                                     params_[l.running_var].value.data(), kNormEps,
                                     dy.data.data(), dconv.data.data(), dgamma, dbeta);
  }

  const Tensor<T>& x = cache.input;
  const auto g = geometry(l, x.n, x.h, x.w);
  Tensor<T> dx(x.n, x.c, x.h, x.w);
  const T* weight = params_[l.weight].value.data();
  if (backend_ == Backend::reference) {
    kernels::reference::conv2d_backward(g, x.data.data(), weight, dconv.data.data(),
                                        dx.data.data(), dweight);
  } else {
    kernels::parallel::conv2d_backward(g, x.data.data(), weight, dconv.data.data(),
                                       dx.data.data(), dweight);
  }
  return dx;
}

template <typename T>
Tensor<T> Network<T>::features_backward(Trace<T>& trace, Tensor<T> d,
                                        ParameterSet<T>* grads) const {
  for (auto it = trace.blocks.rbegin(); it != trace.blocks.rend(); ++it) {
    BlockCache<T>& bc = *it;
    const BlockLayout& bl = stages_[bc.stage][bc.block];
    relu_mask(d, bc.output);
    Tensor<T> dshort = bl.shortcut ? conv_bn_backward(*bl.shortcut, *bc.shortcut, d, grads) : d;
    Tensor<T> dbranch = std::move(d);
    for (std::size_t u = bl.units.size(); u-- > 0;) {
      dbranch = conv_bn_backward(bl.units[u], bc.units[u], dbranch, grads);
      // The input of unit u (u > 0) is the activation of unit u-1.
      if (u > 0) relu_mask(dbranch, bc.units[u].input);
    }
    add_inplace(dbranch, dshort);
    d = std::move(dbranch);
  }
  relu_mask(d, trace.stem_out);
  Tensor<T> dx = conv_bn_backward(stem_, trace.stem, d, grads);
  trace = Trace<T>{};
  return dx;
}

template <typename T>
Tensor<T> Network<T>::backward(Trace<T>& trace, const LogitsBatch<T>& dlogits) {
  if (!trace.recorded || !trace.has_head) {
    throw StateError("backward called without a recorded forward pass");
  }
  const Tensor<T>& f = trace.features;
  if (dlogits.batch != f.n || dlogits.classes != spec_.num_classes) {
    throw ShapeError("logit gradient shape does not match the recorded forward");
  }
  const int channels = f.c;
  auto& w = params_[fc_weight_];
  auto& bias = params_[fc_bias_];
  std::vector<T> dpooled(static_cast<std::size_t>(f.n) * channels, T(0));
  for (int n = 0; n < f.n; ++n) {
    for (int k = 0; k < spec_.num_classes; ++k) {
      const T g = dlogits.at(n, k);
      bias.grad[k] += g;
      for (int c = 0; c < channels; ++c) {
        const std::size_t wi = static_cast<std::size_t>(k) * channels + c;
        w.grad[wi] += g * trace.pooled[static_cast<std::size_t>(n) * channels + c];
        dpooled[static_cast<std::size_t>(n) * channels + c] += g * w.value[wi];
      }
    }
  }
  Tensor<T> dfeat(f.n, f.c, f.h, f.w);
  const std::size_t plane = f.plane();
  const T inv = static_cast<T>(1.0 / static_cast<double>(plane));
  for (int n = 0; n < f.n; ++n) {
    for (int c = 0; c < channels; ++c) {
      const T v = dpooled[static_cast<std::size_t>(n) * channels + c] * inv;
      T* p = dfeat.data.data() + (static_cast<std::size_t>(n) * channels + c) * plane;
      std::fill(p, p + plane, v);
    }
  }
  return features_backward(trace, std::move(dfeat), &params_);
}

template <typename T>
Tensor<T> Network<T>::input_gradient(Trace<T>& trace, const Tensor<T>& dfeatures) const {
  if (!trace.recorded) throw StateError("input_gradient called without a recorded forward pass");
  if (!dfeatures.same_shape(trace.features)) {
    throw ShapeError("feature gradient shape does not match the recorded forward");
  }
  return features_backward(trace, dfeatures, nullptr);
}

template <typename T>
std::size_t Network<T>::forward_macs(const DepthMask& mask, int h, int w) const {
  mask.validate(spec_);
  std::size_t macs = 0;
  auto unit = [&](const ConvBnLayout& l, int& hh, int& ww) {
    const auto g = geometry(l, 1, hh, ww);
    macs += g.macs();
    hh = g.out_h();
    ww = g.out_w();
  };
  unit(stem_, h, w);
  for (int s = 0; s < spec_.num_stages(); ++s) {
    for (int b = 0; b < mask.kept[s]; ++b) {
      const BlockLayout& bl = stages_[s][b];
      int sh = h;
      int sw = w;
      if (bl.shortcut) unit(*bl.shortcut, sh, sw);
      for (const auto& u : bl.units) unit(u, h, w);
    }
  }
  macs += static_cast<std::size_t>(spec_.num_classes) * spec_.feature_channels();
  return macs;
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Network<float>;
template class Network<double>;

}  // namespace stimtrain::nn
