#include <cmath>
#include <numeric>
#include <random>

#include <doctest.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "stimtrain/checkpoint.hpp"
#include "stimtrain/error.hpp"
#include "stimtrain/trainer.hpp"

using namespace stimtrain;
using namespace stimtrain::train;
using testing::fresh_dir;
using testing::slurp;
using testing::tiny_config;

namespace {

struct Fixture {
  TrainConfig cfg = tiny_config(TrainMode::st, 1);
  img::Dataset data = img::synth_dataset(0, 4, 4, 8);
  img::ImageBatch batch{data.images, data.norm};
};

template <typename T>
std::vector<std::vector<T>> values(const nn::Network<T>& net) {
  std::vector<std::vector<T>> v;
  for (const auto& p : net.params()) v.push_back(p.value);
  return v;
}

template <typename T>
std::vector<std::vector<T>> trainable_values(const nn::Network<T>& net) {
  std::vector<std::vector<T>> v;
  for (const auto& p : net.params()) {
    if (p.trainable()) v.push_back(p.value);
  }
  return v;
}

nn::ParameterSet<double> one_param(double value, double grad, nn::ParamRole role = nn::ParamRole::conv_weight) {
  nn::ParameterSet<double> ps;
  ps.add("w", {1}, role, value);
  ps[0].grad = {grad};
  return ps;
}

}  // namespace

TEST_CASE("sgd update") {
  SUBCASE("plain step") {
    auto ps = one_param(1.0, 0.5);
    SgdState<double> st;
    sgd_update(ps, st, 0.1, 0.0, 0.0);
    CHECK(ps[0].value[0] == 1.0 - 0.1 * 0.5);
    CHECK(st.updates == 1);
  }
  SUBCASE("momentum on a constant gradient") {
    auto ps = one_param(0.0, 2.0);
    SgdState<double> st;
    sgd_update(ps, st, 0.1, 0.9, 0.0);
    CHECK(ps[0].value[0] == doctest::Approx(-0.1 * 2.0).epsilon(1e-15));
    const double after_one = ps[0].value[0];
    sgd_update(ps, st, 0.1, 0.9, 0.0);
    CHECK(ps[0].value[0] - after_one == doctest::Approx(-0.1 * 1.9 * 2.0).epsilon(1e-15));
  }
  SUBCASE("zero learning rate") {
    auto ps = one_param(0.7, 3.0);
    SgdState<double> st;
    sgd_update(ps, st, 0.0, 0.9, 1e-4);
    CHECK(ps[0].value[0] == 0.7);
  }
  SUBCASE("weight decay skips normalization affine terms") {
    auto w = one_param(2.0, 0.0);
    auto g = one_param(2.0, 0.0, nn::ParamRole::norm_scale);
    auto b = one_param(2.0, 0.0, nn::ParamRole::norm_shift);
    SgdState<double> s1, s2, s3;
    sgd_update(w, s1, 0.1, 0.0, 0.5);
    sgd_update(g, s2, 0.1, 0.0, 0.5);
    sgd_update(b, s3, 0.1, 0.0, 0.5);
    CHECK(w[0].value[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
    CHECK(g[0].value[0] == 2.0);
    CHECK(b[0].value[0] == 2.0);
  }
  SUBCASE("running statistics are never touched") {
    auto rm = one_param(0.3, 5.0, nn::ParamRole::running_mean);
    SgdState<double> st;
    sgd_update(rm, st, 0.1, 0.9, 0.1);
    CHECK(rm[0].value[0] == 0.3);
  }
}

TEST_CASE("learning rate schedules") {
  OptimConfig o;
  o.lr = 0.4;
  CHECK(lr_at(o, 0, 100, 10) == 0.4);
  CHECK(lr_at(o, 50, 100, 10) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(std::abs(lr_at(o, 100, 100, 10)) < 1e-12);
  CHECK(lr_at(o, 25, 100, 10) == doctest::Approx(0.2 * (1 + std::cos(M_PI / 4))));
  o.schedule = ScheduleKind::step;
  o.decay_rate = 0.1;
  o.decay_epochs = 3;
  CHECK(lr_at(o, 0, 100, 10) == 0.4);
  CHECK(lr_at(o, 29, 100, 10) == 0.4);
  CHECK(lr_at(o, 30, 100, 10) == doctest::Approx(0.04));
  CHECK(lr_at(o, 65, 100, 10) == doctest::Approx(0.004));
}

TEST_CASE("common training has no distillation term") {
  Fixture f;
  f.cfg = tiny_config(TrainMode::ct, 0);
  nn::Network<float> net(f.cfg.model, 0);
  SgdState<float> opt;
  std::mt19937_64 rng(0);
  const auto rec = train_step(net, opt, f.batch, f.data.labels, f.cfg, 0.1, rng);
  CHECK(rec.report.kl_terms.empty());
  CHECK(rec.report.mean_kl() == 0.0);
  CHECK(rec.report.total == rec.report.ce);
  CHECK(rec.masks.empty());
  CHECK(opt.updates == 1);
}

TEST_CASE("a forced full-depth subnet reproduces the CT update") {
  Fixture f;
  for (TrainMode mode : {TrainMode::st, TrainMode::st_pp}) {
    TrainConfig st = tiny_config(mode, 1);
    TrainConfig ct = tiny_config(TrainMode::ct, 0);
    nn::Network<float> a(st.model, 3), b(ct.model, 3);
    SgdState<float> oa, ob;
    std::mt19937_64 r1(0), r2(0);
    StepOverrides ov;
    ov.masks = std::vector<nn::DepthMask>{nn::DepthMask::full(st.model)};
    if (mode == TrainMode::st_pp) ov.resolutions = std::vector<int>{8};
    const auto ra = train_step(a, oa, f.batch, f.data.labels, st, 0.1, r1, &ov);
    const auto rb = train_step(b, ob, f.batch, f.data.labels, ct, 0.1, r2);
    CHECK(ra.report.kl_terms.at(0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ra.report.ce == rb.report.ce);
    CHECK(values(a) == values(b));
  }
}

TEST_CASE("the step update equals the hand-assembled gradient") {
  Fixture f;
  const auto data64 = tensor_cast<double>(img::normalize(f.data.images, f.data.norm));
  for (loss::Variant variant : {loss::Variant::kl, loss::Variant::kl_minus}) {
    TrainConfig cfg = tiny_config(TrainMode::st, 2);
    cfg.variant = variant;
    cfg.lambda = 0.6;
    nn::Network<double> net(cfg.model, 5);
    nn::Network<double> ref = net;
    SgdState<double> opt;
    std::mt19937_64 rng(1);
    StepOverrides ov;
    ov.masks = std::vector<nn::DepthMask>{nn::DepthMask{{1, 2}}, nn::DepthMask{{2, 1}}};
    const double lr = 0.05;
    train_step(net, opt, f.batch, f.data.labels, cfg, lr, rng, &ov);

    // -lr * (dCE/dtheta + lambda * mean_k dD_k/dtheta), teacher held fixed
    ref.params().zero_grad();
    nn::Trace<double> tm;
    const auto zm = ref.forward(data64, {nn::Mode::train, false}, &tm);
    ref.backward(tm, loss::cross_entropy(zm, f.data.labels).grad);
    for (const auto& mask : *ov.masks) {
      nn::Trace<double> ts;
      const auto zs = ref.forward(data64, mask, {nn::Mode::train, false}, &ts);
      auto g = loss::distillation(variant, zm, zs).grad;
      for (auto& v : g.values) v *= cfg.lambda / 2.0;
      ref.backward(ts, g);
    }
    for (std::size_t i = 0; i < ref.params().size(); ++i) {
      const auto& p = ref.params()[i];
      if (!p.trainable()) continue;
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        const double decay = p.is_norm_affine() ? 0.0 : cfg.optim.weight_decay * p.value[j];
        const double expected = p.value[j] - lr * (p.grad[j] + decay);
        CHECK(net.params()[i].value[j] == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("step gradient matches finite differences of the total loss") {
  // Teacher logits are a constant, so the objective seen by the student branch
  // is CE(main(theta)) + lambda/K * sum_k D(z_main_fixed, sub_k(theta)).
  Fixture f;
  TrainConfig cfg = tiny_config(TrainMode::st, 2);
  cfg.variant = loss::Variant::kl_minus;
  cfg.lambda = 1.5;
  cfg.optim.momentum = 0.0;
  cfg.optim.weight_decay = 0.0;
  const auto x = tensor_cast<double>(img::normalize(f.data.images, f.data.norm));
  const std::vector<nn::DepthMask> masks{nn::DepthMask{{1, 1}}, nn::DepthMask{{2, 1}}};
  nn::Network<double> net(cfg.model, 7);
  const nn::Network<double> start = net;
  const auto teacher = net.forward(x, {nn::Mode::train, false});
  auto objective = [&](nn::Network<double>& n) {
    double v = loss::cross_entropy(n.forward(x, {nn::Mode::train, false}), f.data.labels).value;
    for (const auto& m : masks) {
      v += cfg.lambda / 2.0 * loss::kl_minus(teacher, n.forward(x, m, {nn::Mode::train, false})).value;
    }
    return v;
  };

  SgdState<double> opt;
  std::mt19937_64 rng(0);
  StepOverrides ov;
  ov.masks = masks;
  const double lr = 1.0;
  train_step(net, opt, f.batch, f.data.labels, cfg, lr, rng, &ov);

  std::mt19937_64 pick(3);
  int checked = 0;
  for (int attempt = 0; attempt < 200 && checked < 30; ++attempt) {
    const std::size_t pi = pick() % start.params().size();
    if (!start.params()[pi].trainable()) continue;
    const std::size_t j = pick() % start.params()[pi].value.size();
    const double analytic = (start.params()[pi].value[j] - net.params()[pi].value[j]) / lr;
    const double h = 1e-6;
    nn::Network<double> probe = start;
    const double base = objective(probe);
    probe.params()[pi].value[j] += h;
    const double up = objective(probe);
    probe.params()[pi].value[j] -= 2 * h;
    const double down = objective(probe);
    const double fwd = (up - base) / h, bwd = (base - down) / h;
    if (std::abs(fwd - bwd) > 1e-4 * std::max({std::abs(fwd), std::abs(bwd), 1e-2})) continue;  // kink
    const double numeric = (up - down) / (2 * h);
    CHECK(std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-7}) < 1e-4);
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("exactly one update per step whatever K is") {
  Fixture f;
  for (int k : {1, 3, 6}) {
    TrainConfig cfg = tiny_config(TrainMode::st_pp, k);
    nn::Network<float> net(cfg.model, 0);
    SgdState<float> opt;
    std::mt19937_64 rng(0);
    const auto rec = train_step(net, opt, f.batch, f.data.labels, cfg, 0.1, rng);
    CHECK(opt.updates == 1);
    CHECK(rec.masks.size() == static_cast<std::size_t>(k));
    CHECK(rec.report.kl_terms.size() == static_cast<std::size_t>(k));
    for (int l : rec.resolutions) {
      CHECK(l >= cfg.resolution.l_min);
      CHECK(l <= cfg.resolution.l_max);
    }
    CHECK(rec.report.total == doctest::Approx(rec.report.ce + cfg.lambda * rec.report.mean_kl()).epsilon(1e-12));
  }
}

TEST_CASE("subnet inputs") {
  Fixture f;
  const auto st = subnet_input(f.batch, TrainMode::st, 4);
  CHECK(st == img::normalize(f.batch.pixels, f.batch.norm));
  const auto pp = subnet_input(f.batch, TrainMode::st_pp, 4);
  CHECK(pp.h == 4);
  CHECK(pp.w == 4);
  CHECK(pp == img::normalize(img::resize_shorter_side(f.batch.pixels, 4), f.batch.norm));
}

TEST_CASE("divergence guard leaves parameters alone") {
  Fixture f;
  TrainConfig cfg = tiny_config(TrainMode::st, 1);
  nn::Network<float> net(cfg.model, 0);
  auto& fc = net.params()[net.fc_weight_index()];
  for (auto& v : fc.value) v *= 1e7f;
  const auto before = trainable_values(net);
  SgdState<float> opt;
  std::mt19937_64 rng(0);
  CHECK_THROWS_AS(train_step(net, opt, f.batch, f.data.labels, cfg, 0.1, rng), DivergenceError);
  CHECK(trainable_values(net) == before);
  CHECK(opt.updates == 0);

  cfg.optim.lr = 1e6;
  cfg.optim.momentum = 0.0;
  cfg.epochs = 3;
  const auto dir = fresh_dir("trainer_diverge");
  CHECK_THROWS_AS(run_experiment(cfg, dir), DivergenceError);
  CHECK(std::filesystem::exists(dir / "divergence.json"));
  const auto diag = nlohmann::json::parse(slurp(dir / "divergence.json"));
  CHECK(diag.contains("step"));
  CHECK(!std::filesystem::exists(dir / "ckpt_final.stpp"));
}

TEST_CASE("evaluation") {
  TrainConfig cfg = tiny_config(TrainMode::ct, 0);
  cfg.model.num_classes = 10;
  const auto data = img::synth_dataset(1, 10, 1, 8);
  nn::Network<float> net(cfg.model, 0);
  SgdState<float> opt;
  std::mt19937_64 rng(0);
  EvalResult r;
  for (int i = 0; i < 500 && r.top1 < 1.0; ++i) {
    train_step(net, opt, img::ImageBatch{data.images, data.norm}, data.labels, cfg, 0.05, rng);
    r = evaluate(net, nn::DepthMask::full(cfg.model), data, cfg.eval);
    CHECK(r.top5 >= r.top1);
  }
  CHECK(r.top1 == 1.0);
  CHECK(r.samples == 10);

  for (const auto& m : {nn::DepthMask{{1, 1}}, nn::DepthMask{{2, 1}}}) {
    const auto e = evaluate(net, m, data, cfg.eval);
    CHECK(e.top5 >= e.top1);
    // same preprocessing: predicting one sample at a time gives the same logits
    EvalConfig one = cfg.eval;
    one.batch_size = 1;
    CHECK(predict(net, m, data, one) == predict(net, m, data, cfg.eval));
  }
}

TEST_CASE("evaluated masks") {
  TrainConfig cfg = tiny_config(TrainMode::st, 1);
  CHECK(eval_masks(cfg).size() == 4);
  cfg.eval.subnets = "extremes";
  CHECK(eval_masks(cfg) == std::vector<nn::DepthMask>{nn::DepthMask{{1, 1}}, nn::DepthMask{{2, 2}}});
  cfg.eval.subnets = "none";
  CHECK(eval_masks(cfg).empty());
}

TEST_CASE("runs are deterministic and resumable") {
  const TrainConfig cfg = tiny_config(TrainMode::st_pp, 2);
  const auto a = fresh_dir("trainer_det_a"), b = fresh_dir("trainer_det_b"), c = fresh_dir("trainer_det_c");
  const auto ra = run_experiment(cfg, a);
  run_experiment(cfg, b);
  CHECK(ra.epochs_completed == 2);
  CHECK(ra.records.size() == 2);
  CHECK(ra.bounds.size() == 2);
  CHECK(slurp(a / "metrics.jsonl") == slurp(b / "metrics.jsonl"));
  CHECK(slurp(a / "ckpt_final.stpp") == slurp(b / "ckpt_final.stpp"));

  TrainConfig stop = cfg;
  stop.stop_after_epochs = 1;
  const auto rs = run_experiment(stop, c);
  CHECK(rs.epochs_completed == 1);
  CHECK(!std::filesystem::exists(c / "ckpt_final.stpp"));
  run_experiment(cfg, c, c / "ckpt_last.stpp");
  CHECK(slurp(a / "metrics.jsonl") == slurp(c / "metrics.jsonl"));
  CHECK(slurp(a / "bound.jsonl") == slurp(c / "bound.jsonl"));
  CHECK(slurp(a / "ckpt_final.stpp") == slurp(c / "ckpt_final.stpp"));

  TrainConfig other = cfg;
  other.seed = 1;
  const auto d = fresh_dir("trainer_det_d");
  run_experiment(other, d);
  CHECK(slurp(a / "metrics.jsonl") != slurp(d / "metrics.jsonl"));
}

TEST_CASE("metrics records") {
  const TrainConfig cfg = tiny_config(TrainMode::st, 1);
  const auto dir = fresh_dir("trainer_metrics");
  const auto r = run_experiment(cfg, dir);
  std::istringstream lines(slurp(dir / "metrics.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"step", "epoch", "ce", "mean_kl", "total", "lr", "main_top1", "subnet_top1", "wall_time"}) {
      CHECK(j.contains(key));
    }
    CHECK(j.size() == 9);
    CHECK(j["total"].get<double>() ==
          doctest::Approx(j["ce"].get<double>() + cfg.lambda * j["mean_kl"].get<double>()).epsilon(1e-6));
    CHECK(j["subnet_top1"].size() == 4);
    CHECK(j["wall_time"].get<double>() == 0.0);
    ++n;
  }
  CHECK(n == 2);
  CHECK(std::filesystem::exists(dir / "resolved_config.json"));
  for (const auto& b : r.bounds) CHECK(b.holds);
}

TEST_CASE("lambda zero reproduces common training") {
  TrainConfig st = tiny_config(TrainMode::st, 2);
  st.lambda = 0.0;
  const TrainConfig ct = tiny_config(TrainMode::ct, 0);
  const auto a = fresh_dir("trainer_l0_st"), b = fresh_dir("trainer_l0_ct");
  run_experiment(st, a);
  run_experiment(ct, b);
  const auto na = nn::network_from_checkpoint(nn::load_checkpoint(a / "ckpt_final.stpp"));
  const auto nb = nn::network_from_checkpoint(nn::load_checkpoint(b / "ckpt_final.stpp"));
  CHECK(values(na) == values(nb));
}

TEST_CASE("resume rejects a missing checkpoint") {
  const TrainConfig cfg = tiny_config(TrainMode::ct, 0);
  CHECK_THROWS_AS(run_experiment(cfg, fresh_dir("trainer_resume_missing"), std::filesystem::path("/nonexistent.stpp")),
                  IoError);
}
