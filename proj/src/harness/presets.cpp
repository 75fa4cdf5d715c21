#include <fstream>
#include <sstream>

#include "stimtrain/error.hpp"
#include "stimtrain/harness.hpp"

namespace stimtrain::harness {
namespace {

train::TrainConfig cifar_base() {
  train::TrainConfig c;
  c.model = nn::cifar_resnet(20);
  c.epochs = 200;
  c.batch_size = 128;
  c.seed = 0;
  c.lambda = 1.0;
  c.resolution = {9, 32};
  c.optim = {0.1, 0.9, 1e-4, train::ScheduleKind::cosine, 0.1, 30};
  c.data.source = "cifar10";
  c.data.norm = {{0.4914f, 0.4822f, 0.4465f}, {0.2470f, 0.2435f, 0.2616f}};
  c.data.augment = true;
  c.eval = {32, 32, 10, "enumerate", 500};
  return c;
}

std::vector<ExperimentPreset> build() {
  std::vector<ExperimentPreset> out;

  train::TrainConfig ct = cifar_base();
  ct.mode = train::TrainMode::ct;
  ct.k_subnets = 0;
  out.push_back({"ct", ct, "ladder row 1: conventional training of the main network only"});

  train::TrainConfig st = cifar_base();
  st.mode = train::TrainMode::st;
  st.k_subnets = 1;
  st.variant = loss::Variant::kl;
  out.push_back({"st", st, "ladder row 2: stimulative training, one sampled subnet per step distilled with KL"});

  train::TrainConfig klm = st;
  klm.k_subnets = 6;
  klm.variant = loss::Variant::kl_minus;
  out.push_back({"st_klminus_snet6", klm, "ladder row 3: ST with magnitude-free KL- and six subnets per step"});

  train::TrainConfig sit = st;
  sit.mode = train::TrainMode::st_pp;
  out.push_back({"st_sitrans", sit, "ladder row 4: ST with random smaller inputs for the subnet"});

  train::TrainConfig a1 = klm;
  a1.mode = train::TrainMode::st_pp;
  a1.rule.choices = {2, 2, 2};
  out.push_back({"stpp_a1", a1,
                 "ladder row 5: KL-, six subnets, random smaller inputs and an inter-stage sampling rule"});
  return out;
}

}  // namespace

const std::vector<ExperimentPreset>& presets() {
  static const std::vector<ExperimentPreset> all = build();
  return all;
}

const ExperimentPreset& find_preset(std::string_view name) {
  std::string names;
  for (const auto& p : presets()) {
    if (p.name == name) return p;
    names += (names.empty() ? "" : ", ") + p.name;
  }
  throw ConfigError("unknown preset \"" + std::string(name) + "\"; known presets: " + names);
}

train::TrainConfig load_config(const std::optional<std::filesystem::path>& path,
                               const std::optional<std::string>& preset, const std::vector<std::string>& overrides) {
  train::TrainConfig cfg = preset ? find_preset(*preset).config : train::TrainConfig{};
  if (path) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw IoError("cannot read config " + path->string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
      if (j.is_discarded()) throw ConfigError(path->string() + ": not valid JSON");
      train::apply_json(cfg, j);
    }
  }
  for (const auto& o : overrides) train::apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

}  // namespace stimtrain::harness
