#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "stimtrain/checkpoint.hpp"
#include "stimtrain/error.hpp"
#include "stimtrain/sampler.hpp"
#include "stimtrain/trainer.hpp"

namespace stimtrain::train {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kDivergenceLimit = 1e4;

template <typename T>
Tensor<T> as_type(Tensor<float>&& x) {
  if constexpr (std::is_same_v<T, float>) {
    return std::move(x);
  } else {
    return tensor_cast<T>(x);
  }
}

template <typename T>
void scale(LogitsBatch<T>& g, double s) {
  for (auto& v : g.values) v = static_cast<T>(v * s);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kShuffleTag = 1;
constexpr std::uint64_t kStepTag = 2;

img::Dataset take_prefix(img::Dataset ds, int limit) {
  if (limit <= 0 || limit >= ds.size()) return ds;
  std::vector<int> idx(limit);
  std::iota(idx.begin(), idx.end(), 0);
  img::Dataset out;
  out.images = ds.gather(idx);
  out.labels = ds.gather_labels(idx);
  out.num_classes = ds.num_classes;
  out.norm = ds.norm;
  return out;
}

std::vector<json> read_jsonl_until(const fs::path& path, int epoch) {
  std::vector<json> kept;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("epoch")) continue;
    if (j["epoch"].get<int>() <= epoch) kept.push_back(std::move(j));
  }
  return kept;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

template <typename T>
void sgd_update(nn::ParameterSet<T>& params, SgdState<T>& state, double lr, double momentum, double weight_decay) {
  if (state.velocity.size() != params.size()) state.velocity.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Param<T>& p = params[i];
    if (!p.trainable()) continue;
    auto& v = state.velocity[i];
    if (v.size() != p.value.size()) v.assign(p.value.size(), T(0));
    const double wd = p.is_norm_affine() ? 0.0 : weight_decay;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = static_cast<double>(p.grad[j]) + wd * static_cast<double>(p.value[j]);
      const double vj = momentum * static_cast<double>(v[j]) + g;
      v[j] = static_cast<T>(vj);
      p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) - lr * vj);
    }
  }
  ++state.updates;
}

double lr_at(const OptimConfig& optim, std::int64_t step, std::int64_t total_steps, std::int64_t steps_per_epoch) {
  step = std::clamp<std::int64_t>(step, 0, std::max<std::int64_t>(total_steps, 0));
  if (optim.schedule == ScheduleKind::cosine) {
    if (total_steps <= 0) return optim.lr;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps);
    return 0.5 * optim.lr * (1.0 + std::cos(std::numbers::pi * t));
  }
  const std::int64_t epoch = steps_per_epoch > 0 ? step / steps_per_epoch : 0;
  return optim.lr * std::pow(optim.decay_rate, static_cast<double>(epoch / optim.decay_epochs));
}

nlohmann::json MetricsRecord::to_json() const {
  return json{{"step", step},       {"epoch", epoch},         {"ce", ce},
              {"mean_kl", mean_kl}, {"total", total},         {"lr", lr},
              {"main_top1", main_top1}, {"subnet_top1", subnet_top1}, {"wall_time", wall_time}};
}

nlohmann::json BoundCheck::to_json() const {
  return json{{"epoch", epoch}, {"eps1", eps1}, {"eps2", eps2}, {"mean_sub_ce", mean_sub_ce}, {"gap", gap},
              {"bound", bound}, {"num_classes", num_classes}, {"holds", holds}};
}

Tensor<float> subnet_input(const img::ImageBatch& batch, TrainMode mode, int l_s) {
  if (mode == TrainMode::st_pp && l_s > 0) {
    return img::normalize(img::resize_shorter_side(batch.pixels, l_s), batch.norm);
  }
  return img::normalize(batch.pixels, batch.norm);
}

template <typename T>
StepRecord train_step(nn::Network<T>& net, SgdState<T>& opt, const img::ImageBatch& batch,
                      std::span<const int> labels, const TrainConfig& cfg, double lr, std::mt19937_64& rng,
                      const StepOverrides* overrides) {
  const nn::NetworkSpec& spec = net.spec();
  const int k_subnets = cfg.mode == TrainMode::ct ? 0 : cfg.k_subnets;
  if (overrides != nullptr && overrides->masks && static_cast<int>(overrides->masks->size()) != k_subnets) {
    throw ConfigError("step override: " + std::to_string(overrides->masks->size()) + " masks for k_subnets=" +
                      std::to_string(k_subnets));
  }
  if (overrides != nullptr && overrides->resolutions &&
      static_cast<int>(overrides->resolutions->size()) != k_subnets) {
    throw ConfigError("step override: resolution count does not match k_subnets");
  }
  const sampling::SamplingRule rule = cfg.effective_rule();

  StepRecord rec;
  rec.lr = lr;
  rec.report.lambda = cfg.lambda;

  net.params().zero_grad();
  const Tensor<T> x_main = as_type<T>(img::normalize(batch.pixels, batch.norm));
  nn::Trace<T> main_trace;
  const LogitsBatch<T> z_main = net.forward(x_main, {nn::Mode::train, true}, &main_trace);
  const loss::LossWithGrad<T> ce = loss::cross_entropy(z_main, labels);
  rec.report.ce = ce.value;

  // The main logits act as a constant teacher, so each subnet's gradient is
  // complete as soon as its own forward is done.
  for (int k = 0; k < k_subnets; ++k) {
    nn::DepthMask mask = overrides != nullptr && overrides->masks ? (*overrides->masks)[k]
                                                                  : sampling::sample_subnet(spec, rule, rng);
    int l_s = 0;
    if (cfg.mode == TrainMode::st_pp) {
      l_s = overrides != nullptr && overrides->resolutions ? (*overrides->resolutions)[k]
                                                           : img::sample_resolution(cfg.resolution, rng);
    }
    nn::Trace<T> sub_trace;
    LogitsBatch<T> z_sub;
    if (l_s == 0) {
      z_sub = net.forward(x_main, mask, {nn::Mode::train, false}, &sub_trace);
    } else {
      z_sub = net.forward(as_type<T>(subnet_input(batch, cfg.mode, l_s)), mask, {nn::Mode::train, false}, &sub_trace);
    }
    loss::LossWithGrad<T> d = loss::distillation(cfg.variant, z_main, z_sub);
    rec.report.kl_terms.push_back(d.value);
    scale(d.grad, cfg.lambda / k_subnets);
    net.backward(sub_trace, d.grad);
    rec.masks.push_back(std::move(mask));
    rec.resolutions.push_back(l_s);
  }
  rec.report.total = rec.report.ce + (k_subnets > 0 ? cfg.lambda * rec.report.mean_kl() : 0.0);

  if (!std::isfinite(rec.report.total) || rec.report.total > kDivergenceLimit) {
    json diag{{"ce", std::isfinite(rec.report.ce) ? json(rec.report.ce) : json(std::to_string(rec.report.ce))},
              {"total", std::to_string(rec.report.total)},
              {"lr", lr},
              {"updates", opt.updates}};
    json terms = json::array();
    for (double t : rec.report.kl_terms) terms.push_back(std::to_string(t));
    diag["kl_terms"] = terms;
    throw DivergenceError("loss diverged: " + diag.dump());
  }

  net.backward(main_trace, ce.grad);
  sgd_update(net.params(), opt, lr, cfg.optim.momentum, cfg.optim.weight_decay);
  return rec;
}

LogitsBatch<float> predict(const nn::Network<float>& net, const nn::DepthMask& mask, const img::Dataset& data,
                           const EvalConfig& eval) {
  const int n = data.size();
  LogitsBatch<float> out(n, net.spec().num_classes);
  std::vector<int> idx;
  for (int start = 0; start < n; start += eval.batch_size) {
    const int end = std::min(n, start + eval.batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Tensor<float> x = img::resize_shorter_side(data.gather(idx), eval.val_resize);
    x = img::normalize(img::center_crop(x, eval.val_crop), data.norm);
    const LogitsBatch<float> z = net.forward(x, mask, nn::Mode::eval);
    std::copy(z.values.begin(), z.values.end(), out.values.begin() + static_cast<std::size_t>(start) * out.classes);
  }
  return out;
}

namespace {

EvalResult summarize(const LogitsBatch<float>& z, std::span<const int> labels) {
  EvalResult r;
  r.samples = z.batch;
  if (z.batch == 0) return r;
  const auto [h1, h5] = loss::topk_hits(z, labels);
  r.top1 = static_cast<double>(h1) / z.batch;
  r.top5 = static_cast<double>(h5) / z.batch;
  r.ce = loss::cross_entropy(z, labels).value;
  return r;
}

std::vector<loss::ProbabilityVector> probabilities(const LogitsBatch<float>& z) {
  std::vector<loss::ProbabilityVector> out(z.batch);
  std::vector<double> row(z.classes);
  for (int i = 0; i < z.batch; ++i) {
    const auto r = z.row(i);
    std::copy(r.begin(), r.end(), row.begin());
    out[i] = loss::softmax(row);
  }
  return out;
}

}  // namespace

EvalResult evaluate(const nn::Network<float>& net, const nn::DepthMask& mask, const img::Dataset& data,
                    const EvalConfig& eval) {
  return summarize(predict(net, mask, data, eval), data.labels);
}

std::vector<nn::DepthMask> eval_masks(const TrainConfig& cfg) {
  if (cfg.eval.subnets == "none") return {};
  const sampling::SamplingRule rule = cfg.effective_rule();
  if (cfg.eval.subnets == "extremes") {
    nn::DepthMask shallow{rule.min_depths(cfg.model)};
    nn::DepthMask full = nn::DepthMask::full(cfg.model);
    if (shallow == full) return {full};
    return {shallow, full};
  }
  return sampling::enumerate_space(cfg.model, rule, cfg.enumeration_cap);
}

std::pair<img::Dataset, img::Dataset> load_datasets(const DataConfig& data, int num_classes) {
  img::Dataset train;
  img::Dataset test;
  if (data.source == "synth") {
    const SynthConfig& s = data.synth;
    train = img::synth_dataset(s.seed, s.num_classes, s.samples_per_class, s.size, s.noise, img::Split::train);
    test = img::synth_dataset(s.seed, s.num_classes, s.test_samples_per_class, s.size, s.noise, img::Split::test);
  } else {
    std::string root = data.root;
    if (root.empty()) {
      if (const char* env = std::getenv("STIMTRAIN_DATA")) root = env;
    }
    if (root.empty()) {
      throw IoError("data.root: CIFAR-10 location not set (set data.root or STIMTRAIN_DATA)");
    }
    train = img::load_cifar10_binary(root, img::Split::train);
    test = img::load_cifar10_binary(root, img::Split::test);
  }
  if (train.num_classes != num_classes) {
    throw ConfigError("model.num_classes: dataset has " + std::to_string(train.num_classes) + " classes");
  }
  train.norm = data.norm;
  test.norm = data.norm;
  return {take_prefix(std::move(train), data.train_limit), take_prefix(std::move(test), data.test_limit)};
}

nn::Checkpoint training_checkpoint(const nn::Network<float>& net, const SgdState<float>& opt, int epoch,
                                   std::int64_t step, const TrainConfig& cfg) {
  nn::Checkpoint ckpt = nn::network_checkpoint(net);
  const auto& params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable()) continue;
    nn::ArrayRecord rec{"optim.velocity." + params[i].name, params[i].shape, {}};
    if (i < opt.velocity.size() && !opt.velocity[i].empty()) {
      rec.values = opt.velocity[i];
    } else {
      rec.values.assign(params[i].value.size(), 0.0f);
    }
    ckpt.arrays.push_back(std::move(rec));
  }
  ckpt.meta["epoch"] = epoch;
  ckpt.meta["step"] = step;
  ckpt.meta["updates"] = opt.updates;
  ckpt.meta["seed"] = cfg.seed;
  ckpt.meta["mode"] = std::string(to_string(cfg.mode));
  return ckpt;
}

ExperimentResult run_experiment(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                                const std::optional<std::filesystem::path>& resume) {
  cfg.validate();
  fs::create_directories(out_dir);
  write_file(out_dir / "resolved_config.json", to_json(cfg).dump(2) + "\n");

  auto [train_set, test_set] = load_datasets(cfg.data, cfg.model.num_classes);
  nn::Network<float> net(cfg.model, cfg.seed);
  SgdState<float> opt;
  int start_epoch = 0;
  std::int64_t step = 0;

  ExperimentResult result;
  std::vector<json> prior_metrics;
  std::vector<json> prior_bounds;
  if (resume) {
    const nn::Checkpoint ckpt = nn::load_checkpoint(*resume);
    if (!ckpt.meta.contains("epoch") || !ckpt.meta.contains("step")) {
      throw StateError(resume->string() + ": not a training checkpoint (no epoch/step)");
    }
    if (nn::spec_from_json(ckpt.meta.at("spec")) != cfg.model) {
      throw ConfigError("model: resumed checkpoint was trained with a different network spec");
    }
    nn::restore_network(net, ckpt);
    opt.velocity.resize(net.params().size());
    for (std::size_t i = 0; i < net.params().size(); ++i) {
      if (!net.params()[i].trainable()) continue;
      const nn::ArrayRecord* v = ckpt.find("optim.velocity." + net.params()[i].name);
      if (v == nullptr) throw FormatError(resume->string() + ": missing momentum for " + net.params()[i].name);
      opt.velocity[i] = v->values;
    }
    opt.updates = ckpt.meta.value("updates", std::uint64_t{0});
    start_epoch = ckpt.meta.at("epoch").get<int>();
    step = ckpt.meta.at("step").get<std::int64_t>();
    prior_metrics = read_jsonl_until(out_dir / "metrics.jsonl", start_epoch);
    prior_bounds = read_jsonl_until(out_dir / "bound.jsonl", start_epoch);
  }

  std::ofstream metrics_out(out_dir / "metrics.jsonl", std::ios::trunc);
  std::ofstream bound_out(out_dir / "bound.jsonl", std::ios::trunc);
  if (!metrics_out || !bound_out) throw IoError("cannot write metrics into " + out_dir.string());
  for (const auto& j : prior_metrics) metrics_out << j.dump() << "\n";
  for (const auto& j : prior_bounds) bound_out << j.dump() << "\n";
  metrics_out.flush();

  const int n_train = train_set.size();
  const int batch = std::min(cfg.batch_size, n_train);
  const std::int64_t steps_per_epoch = n_train / batch;
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
  const std::vector<nn::DepthMask> masks = eval_masks(cfg);
  const nn::DepthMask full = nn::DepthMask::full(cfg.model);
  const auto t0 = std::chrono::steady_clock::now();
  const int last_epoch = cfg.stop_after_epochs > 0 ? cfg.stop_after_epochs : cfg.epochs;

  std::vector<int> order(n_train);
  for (int epoch = start_epoch; epoch < last_epoch; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng = stream(cfg.seed, static_cast<std::uint64_t>(epoch), kShuffleTag);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double sum_ce = 0.0, sum_kl = 0.0, sum_total = 0.0, lr = cfg.optim.lr;
    for (std::int64_t b = 0; b < steps_per_epoch; ++b) {
      const std::span<const int> idx(order.data() + b * batch, static_cast<std::size_t>(batch));
      std::mt19937_64 rng = stream(cfg.seed, static_cast<std::uint64_t>(step), kStepTag);
      img::ImageBatch ib{train_set.gather(idx), train_set.norm};
      if (cfg.data.augment) img::standard_augment(ib.pixels, cfg.data.augment_cfg, rng);
      const std::vector<int> labels = train_set.gather_labels(idx);
      lr = lr_at(cfg.optim, step, total_steps, steps_per_epoch);
      StepRecord rec;
      try {
        rec = train_step(net, opt, ib, labels, cfg, lr, rng);
      } catch (const DivergenceError& e) {
        write_file(out_dir / "divergence.json",
                   json{{"epoch", epoch}, {"step", step}, {"lr", lr}, {"error", e.what()}}.dump(2) + "\n");
        throw;
      }
      sum_ce += rec.report.ce;
      sum_kl += rec.report.kl_terms.empty() ? 0.0 : rec.report.mean_kl();
      sum_total += rec.report.total;
      ++step;
    }

    const int done = epoch + 1;
    nn::save_checkpoint(out_dir / "ckpt_last.stpp", training_checkpoint(net, opt, done, step, cfg));
    result.epochs_completed = done;
    if (done % cfg.eval.every != 0 && done != cfg.epochs) continue;

    MetricsRecord m;
    m.step = step;
    m.epoch = done;
    m.ce = sum_ce / steps_per_epoch;
    m.mean_kl = sum_kl / steps_per_epoch;
    m.total = sum_total / steps_per_epoch;
    m.lr = lr;
    const LogitsBatch<float> z_main = predict(net, full, test_set, cfg.eval);
    const EvalResult main_eval = summarize(z_main, test_set.labels);
    m.main_top1 = main_eval.top1;

    BoundCheck bc;
    bc.epoch = done;
    bc.num_classes = cfg.model.num_classes;
    bc.eps1 = main_eval.ce;
    const auto p_main = probabilities(z_main);
    for (const auto& mask : masks) {
      const LogitsBatch<float> z = mask == full ? z_main : predict(net, mask, test_set, cfg.eval);
      const EvalResult r = summarize(z, test_set.labels);
      m.subnet_top1[mask.to_string()] = r.top1;
      const auto p_sub = probabilities(z);
      double kl = 0.0;
      for (std::size_t i = 0; i < p_sub.size(); ++i) kl += loss::kl_divergence(p_main[i], p_sub[i]);
      bc.eps2 += p_sub.empty() ? 0.0 : kl / static_cast<double>(p_sub.size());
      bc.mean_sub_ce += r.ce;
    }
    if (cfg.log_wall_time) {
      m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    metrics_out << m.to_json().dump() << "\n";
    metrics_out.flush();
    result.records.push_back(m);

    if (!masks.empty()) {
      bc.eps2 /= static_cast<double>(masks.size());
      bc.mean_sub_ce /= static_cast<double>(masks.size());
      bc.gap = std::fabs(bc.mean_sub_ce - bc.eps1);
      bc.bound = (bc.eps2 + std::log(static_cast<double>(bc.num_classes))) / std::exp(-bc.eps1) + bc.eps1;
      bc.holds = bc.gap <= bc.bound;
      bound_out << bc.to_json().dump() << "\n";
      bound_out.flush();
      result.bounds.push_back(bc);
    }
  }

  result.steps = step;
  if (result.epochs_completed == cfg.epochs) {
    result.final_checkpoint = out_dir / "ckpt_final.stpp";
    nn::save_checkpoint(result.final_checkpoint, training_checkpoint(net, opt, cfg.epochs, step, cfg));
  } else {
    result.final_checkpoint = out_dir / "ckpt_last.stpp";
  }
  return result;
}

template void sgd_update<float>(nn::ParameterSet<float>&, SgdState<float>&, double, double, double);
template void sgd_update<double>(nn::ParameterSet<double>&, SgdState<double>&, double, double, double);
template StepRecord train_step<float>(nn::Network<float>&, SgdState<float>&, const img::ImageBatch&,
                                      std::span<const int>, const TrainConfig&, double, std::mt19937_64&,
                                      const StepOverrides*);
template StepRecord train_step<double>(nn::Network<double>&, SgdState<double>&, const img::ImageBatch&,
                                       std::span<const int>, const TrainConfig&, double, std::mt19937_64&,
                                       const StepOverrides*);

}  // namespace stimtrain::train
