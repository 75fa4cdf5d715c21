#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "stimtrain/checkpoint.hpp"
#include "stimtrain/diagnostics.hpp"
#include "stimtrain/error.hpp"
#include "stimtrain/gradcheck.hpp"
#include "stimtrain/harness.hpp"
#include "stimtrain/sampler.hpp"
#include "stimtrain/trainer.hpp"

namespace stimtrain::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  std::string config;
  std::string preset;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out = "stimtrain_out";
};

struct Args {
  Common common;
  std::string resume;
  std::string checkpoint;
  std::vector<std::string> checkpoints;
  std::string mask;
  std::vector<std::string> standalone;
  bool all_masks = false;
  std::vector<int> input_sizes;
  int samples = 64;
  int probes = gradcheck::kMinProbes;
  int trials = 10000;
  std::string run_dir;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file");
  sub->add_option("--preset", c.preset, "named preset (ct, st, st_klminus_snet6, st_sitrans, stpp_a1)");
  sub->add_option("--set", c.overrides, "override, key=value (repeatable)");
  sub->add_option("--seed", c.seed, "seed");
  sub->add_option("--out", c.out, "output directory");
}

train::TrainConfig resolve(const Common& c) {
  std::vector<std::string> overrides = c.overrides;
  if (c.seed) overrides.push_back("seed=" + std::to_string(*c.seed));
  return load_config(c.config.empty() ? std::nullopt : std::optional<fs::path>(c.config),
                     c.preset.empty() ? std::nullopt : std::optional<std::string>(c.preset), overrides);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_resolved(const train::TrainConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  write_text(out / "resolved_config.json", train::to_json(cfg).dump(2) + "\n");
}

// Loads a checkpoint and makes the config describe its network.
nn::Network<float> load_net(const std::string& path, train::TrainConfig& cfg) {
  if (path.empty()) throw ConfigError("--checkpoint: required");
  nn::Network<float> net = nn::network_from_checkpoint(nn::load_checkpoint(path));
  cfg.model = net.spec();
  if (!cfg.rule.choices.empty() && cfg.rule.choices.size() != cfg.model.stage_blocks.size()) cfg.rule.choices.clear();
  cfg.validate();
  return net;
}

std::pair<std::string, std::string> split_assignment(const std::string& s, const char* flag) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(std::string(flag) + ": expected NAME=PATH, got " + s);
  return {s.substr(0, eq), s.substr(eq + 1)};
}

int cmd_train(const Args& a) {
  const train::TrainConfig cfg = resolve(a.common);
  const auto resume = a.resume.empty() ? std::nullopt : std::optional<fs::path>(a.resume);
  const train::ExperimentResult r = train::run_experiment(cfg, a.common.out, resume);
  if (!r.records.empty()) std::cout << r.records.back().to_json().dump() << "\n";
  for (const auto& b : r.bounds) {
    if (!b.holds) std::cerr << "warning: CE-gap bound violated at epoch " << b.epoch << "\n";
  }
  return 0;
}

int cmd_eval(const Args& a) {
  train::TrainConfig cfg = resolve(a.common);
  const nn::Network<float> net = load_net(a.checkpoint, cfg);
  write_resolved(cfg, a.common.out);
  const nn::DepthMask mask = a.mask.empty() ? nn::DepthMask::full(cfg.model) : nn::DepthMask::parse(a.mask);
  mask.validate(cfg.model);
  const auto data = train::load_datasets(cfg.data, cfg.model.num_classes).second;
  const train::EvalResult r = train::evaluate(net, mask, data, cfg.eval);
  const json j{{"mask", mask.to_string()}, {"top1", r.top1}, {"top5", r.top5}, {"ce", r.ce}, {"samples", r.samples}};
  write_text(fs::path(a.common.out) / "eval.json", j.dump(2) + "\n");
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_loafing(const Args& a) {
  train::TrainConfig cfg = resolve(a.common);
  const nn::Network<float> net = load_net(a.checkpoint, cfg);
  write_resolved(cfg, a.common.out);
  diag::StandaloneCheckpoints standalone;
  for (const auto& s : a.standalone) {
    auto [mask, path] = split_assignment(s, "--standalone");
    standalone[nn::DepthMask::parse(mask).to_string()] = path;
  }
  const auto data = train::load_datasets(cfg.data, cfg.model.num_classes).second;
  const diag::LoafingReport report =
      diag::measure_loafing(net, cfg.effective_rule(), data, cfg.eval, standalone, cfg.enumeration_cap);
  const std::string csv = report.to_csv();
  write_text(fs::path(a.common.out) / "loafing.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_amplitude(const Args& a) {
  train::TrainConfig cfg = resolve(a.common);
  if (a.checkpoints.empty()) throw ConfigError("--checkpoint: at least one NAME=PATH required");
  std::vector<std::pair<std::string, diag::Amplitude>> rows;
  std::optional<img::Dataset> data;
  for (const auto& s : a.checkpoints) {
    auto [name, path] = s.find('=') == std::string::npos ? std::pair{s, s} : split_assignment(s, "--checkpoint");
    const nn::Network<float> net = load_net(path, cfg);
    if (!data) data = train::load_datasets(cfg.data, cfg.model.num_classes).second;
    const std::vector<nn::DepthMask> masks =
        a.all_masks ? sampling::enumerate_space(cfg.model, cfg.effective_rule(), cfg.enumeration_cap)
                    : std::vector<nn::DepthMask>{nn::DepthMask::full(cfg.model)};
    for (const auto& m : masks) {
      rows.emplace_back(name + ":" + m.to_string(), diag::accumulate_amplitude(net, m, *data, cfg.eval));
    }
  }
  write_resolved(cfg, a.common.out);
  const std::string csv = diag::amplitude_csv(rows);
  write_text(fs::path(a.common.out) / "amplitude.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_erf(const Args& a) {
  train::TrainConfig cfg = resolve(a.common);
  const nn::Network<float> net = load_net(a.checkpoint, cfg);
  write_resolved(cfg, a.common.out);
  const nn::DepthMask mask = a.mask.empty() ? nn::DepthMask::full(cfg.model) : nn::DepthMask::parse(a.mask);
  mask.validate(cfg.model);
  const std::vector<int> sizes = a.input_sizes.empty() ? std::vector<int>{cfg.eval.val_crop} : a.input_sizes;
  std::string summary = "mask,input_size";
  for (double t : diag::kErfThresholds) summary += ",area_ratio_" + std::to_string(t).substr(0, 4);
  summary += "\n";
  const diag::NetworkFeatures model(net, mask);
  for (int size : sizes) {
    std::mt19937_64 rng(cfg.seed);
    const diag::ERFMap map = diag::compute_erf(model, size, a.samples, rng);
    std::string tag = mask.to_string();
    std::replace(tag.begin(), tag.end(), ',', '-');
    tag += "_" + std::to_string(size);
    write_text(fs::path(a.common.out) / ("erf_" + tag + ".pgm"), map.to_pgm());
    write_text(fs::path(a.common.out) / ("erf_" + tag + ".csv"), map.to_csv());
    summary += "\"" + mask.to_string() + "\"," + std::to_string(size);
    for (double t : diag::kErfThresholds) summary += "," + std::to_string(map.area_ratio(t));
    summary += "\n";
  }
  write_text(fs::path(a.common.out) / "erf_summary.csv", summary);
  std::cout << summary;
  return 0;
}

int cmd_enumerate(const Args& a) {
  const train::TrainConfig cfg = resolve(a.common);
  write_resolved(cfg, a.common.out);
  for (const auto& m : sampling::enumerate_space(cfg.model, cfg.effective_rule(), cfg.enumeration_cap)) {
    std::cout << m.to_string() << "\n";
  }
  return 0;
}

int cmd_gradcheck(const Args& a) {
  const train::TrainConfig cfg = resolve(a.common);
  write_resolved(cfg, a.common.out);
  bool ok = true;
  json report = json::array();
  for (const auto& s : gradcheck::run_all(cfg.seed, a.probes)) {
    std::cout << (s.passed ? "PASS " : "FAIL ") << s.name << " probes=" << s.probes
              << " kinks=" << s.skipped_kinks << " max_rel_error=" << s.max_rel_error << "\n";
    report.push_back({{"suite", s.name}, {"probes", s.probes}, {"max_rel_error", s.max_rel_error}, {"passed", s.passed}});
    ok = ok && s.passed;
  }
  write_text(fs::path(a.common.out) / "gradcheck.json", report.dump(2) + "\n");
  return ok ? 0 : 2;
}

int cmd_bound(const Args& a) {
  const train::TrainConfig cfg = resolve(a.common);
  write_resolved(cfg, a.common.out);
  std::mt19937_64 rng(cfg.seed);
  const diag::BoundTrials t = diag::validate_bound_on_simplex(a.trials, rng);
  std::cout << "simplex trials=" << t.trials << " counterexamples=" << t.counterexamples
            << " worst_ratio=" << t.worst_ratio << "\n";
  bool ok = t.counterexamples == 0;
  if (!a.run_dir.empty()) {
    std::ifstream in(fs::path(a.run_dir) / "bound.jsonl");
    if (!in) throw IoError("cannot read " + (fs::path(a.run_dir) / "bound.jsonl").string());
    std::string line;
    int epochs = 0, violations = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      ++epochs;
      if (!j.at("holds").get<bool>()) ++violations;
    }
    std::cout << "run epochs=" << epochs << " violations=" << violations << "\n";
    ok = ok && violations == 0;
  }
  return ok ? 0 : 2;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"stimulative training engine and diagnostics"};
  app.require_subcommand(1);
  Args a;

  auto* train_cmd = app.add_subcommand("train", "train a network and write metrics and checkpoints");
  add_common(train_cmd, a.common);
  train_cmd->add_option("--resume", a.resume, "training checkpoint to continue from");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval_cmd, a.common);
  eval_cmd->add_option("--checkpoint", a.checkpoint)->required();
  eval_cmd->add_option("--mask", a.mask, "depth mask, e.g. 3,2,1");

  auto* loaf_cmd = app.add_subcommand("loafing", "in-ensemble vs standalone accuracy per subnet");
  add_common(loaf_cmd, a.common);
  loaf_cmd->add_option("--checkpoint", a.checkpoint)->required();
  loaf_cmd->add_option("--standalone", a.standalone, "MASK=PATH of a standalone-trained subnet (repeatable)");

  auto* amp_cmd = app.add_subcommand("amplitude", "mean logit magnitude and accuracy");
  add_common(amp_cmd, a.common);
  amp_cmd->add_option("--checkpoint", a.checkpoints, "NAME=PATH (repeatable)")->required();
  amp_cmd->add_flag("--all-masks", a.all_masks, "one row per enumerated mask");

  auto* erf_cmd = app.add_subcommand("erf", "effective receptive field heatmaps");
  add_common(erf_cmd, a.common);
  erf_cmd->add_option("--checkpoint", a.checkpoint)->required();
  erf_cmd->add_option("--mask", a.mask);
  erf_cmd->add_option("--input-size", a.input_sizes, "input side length (repeatable)");
  erf_cmd->add_option("--samples", a.samples, "random inputs averaged");

  auto* enum_cmd = app.add_subcommand("enumerate-space", "list every mask of the sampling space");
  add_common(enum_cmd, a.common);

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suites");
  add_common(grad_cmd, a.common);
  grad_cmd->add_option("--probes", a.probes, "probes per suite");

  auto* bound_cmd = app.add_subcommand("bound-check", "brute-force check of the CE-gap bound");
  add_common(bound_cmd, a.common);
  bound_cmd->add_option("--trials", a.trials);
  bound_cmd->add_option("--run", a.run_dir, "also check bound.jsonl of a training run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(a);
    if (eval_cmd->parsed()) return cmd_eval(a);
    if (loaf_cmd->parsed()) return cmd_loafing(a);
    if (amp_cmd->parsed()) return cmd_amplitude(a);
    if (erf_cmd->parsed()) return cmd_erf(a);
    if (enum_cmd->parsed()) return cmd_enumerate(a);
    if (grad_cmd->parsed()) return cmd_gradcheck(a);
    if (bound_cmd->parsed()) return cmd_bound(a);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace stimtrain::harness
