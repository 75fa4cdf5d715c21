#include <algorithm>
#include <functional>
#include <string>

#include "stimtrain/config.hpp"
#include "stimtrain/error.hpp"

namespace stimtrain::train {
namespace {

using nlohmann::json;

struct Key {
  std::string name;
  std::function<json(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const json&)> set;
};

[[noreturn]] void type_error(const std::string& key, const char* want, const json& v) {
  throw ConfigError(key + ": expected " + want + ", got " + v.dump());
}

int as_int(const std::string& key, const json& v) {
  if (!v.is_number_integer()) type_error(key, "an integer", v);
  const auto x = v.get<std::int64_t>();
  if (x < INT32_MIN || x > INT32_MAX) type_error(key, "a 32-bit integer", v);
  return static_cast<int>(x);
}

std::uint64_t as_u64(const std::string& key, const json& v) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    type_error(key, "a nonnegative integer", v);
  }
  return v.get<std::uint64_t>();
}

double as_double(const std::string& key, const json& v) {
  if (!v.is_number()) type_error(key, "a number", v);
  return v.get<double>();
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) type_error(key, "true or false", v);
  return v.get<bool>();
}

std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) type_error(key, "a string", v);
  return v.get<std::string>();
}

std::vector<int> as_int_list(const std::string& key, const json& v) {
  if (!v.is_array()) type_error(key, "a list of integers", v);
  std::vector<int> out;
  for (const auto& e : v) out.push_back(as_int(key, e));
  return out;
}

std::vector<float> as_float_list(const std::string& key, const json& v) {
  if (!v.is_array()) type_error(key, "a list of numbers", v);
  std::vector<float> out;
  for (const auto& e : v) out.push_back(static_cast<float>(as_double(key, e)));
  return out;
}

TrainMode parse_mode(const std::string& s) {
  if (s == "ct") return TrainMode::ct;
  if (s == "st") return TrainMode::st;
  if (s == "st_pp") return TrainMode::st_pp;
  throw ConfigError("mode: expected one of ct, st, st_pp, got \"" + s + "\"");
}

ScheduleKind parse_schedule(const std::string& s) {
  if (s == "cosine") return ScheduleKind::cosine;
  if (s == "step") return ScheduleKind::step;
  throw ConfigError("optim.schedule: expected cosine or step, got \"" + s + "\"");
}

#define INT_KEY(NAME, FIELD) \
  Key{NAME, [](const TrainConfig& c) { return json(c.FIELD); }, [](TrainConfig& c, const json& v) { c.FIELD = as_int(NAME, v); }}
#define U64_KEY(NAME, FIELD) \
  Key{NAME, [](const TrainConfig& c) { return json(c.FIELD); }, [](TrainConfig& c, const json& v) { c.FIELD = as_u64(NAME, v); }}
#define DOUBLE_KEY(NAME, FIELD) \
  Key{NAME, [](const TrainConfig& c) { return json(c.FIELD); }, [](TrainConfig& c, const json& v) { c.FIELD = as_double(NAME, v); }}
#define BOOL_KEY(NAME, FIELD) \
  Key{NAME, [](const TrainConfig& c) { return json(c.FIELD); }, [](TrainConfig& c, const json& v) { c.FIELD = as_bool(NAME, v); }}
#define STRING_KEY(NAME, FIELD) \
  Key{NAME, [](const TrainConfig& c) { return json(c.FIELD); }, [](TrainConfig& c, const json& v) { c.FIELD = as_string(NAME, v); }}
#define INT_LIST_KEY(NAME, FIELD) \
  Key{NAME, [](const TrainConfig& c) { return json(c.FIELD); }, [](TrainConfig& c, const json& v) { c.FIELD = as_int_list(NAME, v); }}
#define FLOAT_LIST_KEY(NAME, FIELD) \
  Key{NAME, [](const TrainConfig& c) { return json(c.FIELD); }, [](TrainConfig& c, const json& v) { c.FIELD = as_float_list(NAME, v); }}

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      Key{"mode", [](const TrainConfig& c) { return json(std::string(to_string(c.mode))); },
          [](TrainConfig& c, const json& v) { c.mode = parse_mode(as_string("mode", v)); }},
      INT_KEY("epochs", epochs),
      INT_KEY("batch_size", batch_size),
      INT_KEY("k_subnets", k_subnets),
      U64_KEY("seed", seed),
      INT_KEY("stop_after_epochs", stop_after_epochs),
      INT_LIST_KEY("model.stage_blocks", model.stage_blocks),
      INT_LIST_KEY("model.stage_widths", model.stage_widths),
      INT_KEY("model.num_classes", model.num_classes),
      Key{"model.block", [](const TrainConfig& c) { return json(std::string(nn::to_string(c.model.block_kind))); },
          [](TrainConfig& c, const json& v) { c.model.block_kind = nn::parse_block_kind(as_string("model.block", v)); }},
      INT_KEY("model.stem_kernel", model.stem.kernel),
      INT_KEY("model.stem_stride", model.stem.stride),
      INT_KEY("model.input_channels", model.input_channels),
      Key{"loss.variant", [](const TrainConfig& c) { return json(std::string(loss::to_string(c.variant))); },
          [](TrainConfig& c, const json& v) { c.variant = loss::parse_variant(as_string("loss.variant", v)); }},
      DOUBLE_KEY("loss.lambda", lambda),
      INT_LIST_KEY("sampling.choices", rule.choices),
      U64_KEY("sampling.enumeration_cap", enumeration_cap),
      INT_KEY("input.l_min", resolution.l_min),
      INT_KEY("input.l_max", resolution.l_max),
      DOUBLE_KEY("optim.lr", optim.lr),
      DOUBLE_KEY("optim.momentum", optim.momentum),
      DOUBLE_KEY("optim.weight_decay", optim.weight_decay),
      Key{"optim.schedule", [](const TrainConfig& c) { return json(std::string(to_string(c.optim.schedule))); },
          [](TrainConfig& c, const json& v) { c.optim.schedule = parse_schedule(as_string("optim.schedule", v)); }},
      DOUBLE_KEY("optim.decay_rate", optim.decay_rate),
      INT_KEY("optim.decay_epochs", optim.decay_epochs),
      STRING_KEY("data.source", data.source),
      STRING_KEY("data.root", data.root),
      FLOAT_LIST_KEY("data.mean", data.norm.mean),
      FLOAT_LIST_KEY("data.std", data.norm.stddev),
      BOOL_KEY("data.augment", data.augment),
      BOOL_KEY("data.flip", data.augment_cfg.horizontal_flip),
      INT_KEY("data.crop_padding", data.augment_cfg.crop_padding),
      INT_KEY("data.train_limit", data.train_limit),
      INT_KEY("data.test_limit", data.test_limit),
      U64_KEY("data.synth.seed", data.synth.seed),
      INT_KEY("data.synth.num_classes", data.synth.num_classes),
      INT_KEY("data.synth.samples_per_class", data.synth.samples_per_class),
      INT_KEY("data.synth.test_samples_per_class", data.synth.test_samples_per_class),
      INT_KEY("data.synth.size", data.synth.size),
      DOUBLE_KEY("data.synth.noise", data.synth.noise),
      INT_KEY("eval.val_resize", eval.val_resize),
      INT_KEY("eval.val_crop", eval.val_crop),
      INT_KEY("eval.every", eval.every),
      STRING_KEY("eval.subnets", eval.subnets),
      INT_KEY("eval.batch_size", eval.batch_size),
      BOOL_KEY("log.wall_time", log_wall_time),
  };
  return keys;
}

const Key* find_key(const std::string& name) {
  for (const auto& k : registry()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::string key_list() {
  std::string out;
  for (const auto& k : registry()) {
    if (!out.empty()) out += ", ";
    out += k.name;
  }
  return out;
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object()) {
      flatten(it.value(), key, out);
    } else {
      out.emplace_back(key, it.value());
    }
  }
}

void set_key(TrainConfig& cfg, const std::string& name, const json& value) {
  const Key* k = find_key(name);
  if (k == nullptr) throw ConfigError("unknown config key \"" + name + "\"; valid keys: " + key_list());
  k->set(cfg, value);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::ct: return "ct";
    case TrainMode::st: return "st";
    case TrainMode::st_pp: return "st_pp";
  }
  return "?";
}

std::string_view to_string(ScheduleKind s) {
  return s == ScheduleKind::cosine ? "cosine" : "step";
}

sampling::SamplingRule TrainConfig::effective_rule() const {
  if (rule.choices.empty()) return sampling::SamplingRule::full(model);
  return rule;
}

void TrainConfig::validate() const {
  model.validate();
  require(epochs >= 1, "epochs: must be >= 1, got " + std::to_string(epochs));
  require(batch_size >= 1, "batch_size: must be >= 1, got " + std::to_string(batch_size));
  require(stop_after_epochs >= 0 && stop_after_epochs <= epochs,
          "stop_after_epochs: must be in [0, epochs], got " + std::to_string(stop_after_epochs));
  if (mode == TrainMode::ct) {
    require(k_subnets == 0, "k_subnets: must be 0 in ct mode, got " + std::to_string(k_subnets));
  } else {
    require(k_subnets >= 1, "k_subnets: must be >= 1 in " + std::string(to_string(mode)) + " mode, got " +
                                std::to_string(k_subnets));
  }
  require(lambda >= 0.0, "loss.lambda: must be >= 0");
  if (!rule.choices.empty()) rule.validate(model);
  if (mode == TrainMode::st_pp) resolution.validate();
  require(optim.lr > 0.0, "optim.lr: must be > 0");
  require(optim.momentum >= 0.0 && optim.momentum < 1.0, "optim.momentum: must be in [0, 1)");
  require(optim.weight_decay >= 0.0, "optim.weight_decay: must be >= 0");
  require(optim.decay_epochs >= 1, "optim.decay_epochs: must be >= 1");
  require(data.source == "cifar10" || data.source == "synth",
          "data.source: expected cifar10 or synth, got \"" + data.source + "\"");
  const auto channels = static_cast<std::size_t>(model.input_channels);
  require(data.norm.mean.size() == channels, "data.mean: needs " + std::to_string(channels) + " entries");
  require(data.norm.stddev.size() == channels, "data.std: needs " + std::to_string(channels) + " entries");
  for (float s : data.norm.stddev) require(s > 0.0f, "data.std: entries must be > 0");
  require(data.augment_cfg.crop_padding >= 0, "data.crop_padding: must be >= 0");
  require(data.train_limit >= 0, "data.train_limit: must be >= 0");
  require(data.test_limit >= 0, "data.test_limit: must be >= 0");
  if (data.source == "synth") {
    require(data.synth.num_classes == model.num_classes,
            "data.synth.num_classes/model.num_classes: must match (" + std::to_string(data.synth.num_classes) +
                " vs " + std::to_string(model.num_classes) + ")");
    require(model.input_channels == 3, "model.input_channels: synthetic data has 3 channels");
  } else {
    require(model.num_classes == 10, "model.num_classes: CIFAR-10 has 10 classes");
    require(model.input_channels == 3, "model.input_channels: CIFAR-10 has 3 channels");
  }
  require(eval.val_crop >= 1 && eval.val_resize >= eval.val_crop,
          "eval.val_resize/eval.val_crop: need val_resize >= val_crop >= 1");
  require(eval.every >= 1, "eval.every: must be >= 1");
  require(eval.batch_size >= 1, "eval.batch_size: must be >= 1");
  require(eval.subnets == "enumerate" || eval.subnets == "extremes" || eval.subnets == "none",
          "eval.subnets: expected enumerate, extremes or none, got \"" + eval.subnets + "\"");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  json out = json::object();
  for (const auto& k : registry()) {
    std::string pointer = "/" + k.name;
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    out[json::json_pointer(pointer)] = k.get(cfg);
  }
  return out;
}

void apply_json(TrainConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  std::vector<std::pair<std::string, json>> leaves;
  flatten(j, "", leaves);
  for (const auto& [name, value] : leaves) set_key(cfg, name, value);
}

void apply_override(TrainConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override \"" + assignment + "\": expected key=value");
  }
  const std::string name = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_key(cfg, name, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.name);
  return out;
}

}  // namespace stimtrain::train
