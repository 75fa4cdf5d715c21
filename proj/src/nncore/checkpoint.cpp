#include "stimtrain/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "stimtrain/error.hpp"

namespace stimtrain::nn {
namespace {

constexpr char kMagic[4] = {'S', 'T', 'P', 'P'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  }
  return v;
}

std::size_t element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

}  // namespace

const ArrayRecord* Checkpoint::find(std::string_view name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["arrays"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& a : ckpt.arrays) {
    if (element_count(a.shape) != a.values.size()) {
      throw FormatError("array " + a.name + ": shape does not match value count");
    }
    manifest["arrays"].push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}});
    offset += a.values.size() * sizeof(float);
  }
  manifest["meta"] = ckpt.meta;
  const std::string text = manifest.dump();

  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& a : ckpt.arrays) {
    for (const float v : a.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not an STPP checkpoint (bad magic)");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t manifest_len = get_u32(bytes, 8);
  if (12 + static_cast<std::size_t>(manifest_len) > bytes.size()) {
    throw FormatError("checkpoint manifest truncated");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(12, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  const std::string_view data = bytes.substr(12 + manifest_len);

  Checkpoint ckpt;
  ckpt.meta = manifest.value("meta", nlohmann::json::object());
  std::size_t expected = 0;
  try {
    for (const auto& entry : manifest.at("arrays")) {
      ArrayRecord a;
      a.name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<std::vector<int>>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t count = element_count(a.shape);
      if (offset != expected || offset + count * sizeof(float) > data.size()) {
        throw FormatError("array " + a.name + ": offset " + std::to_string(offset) +
                          " out of bounds or out of order");
      }
      a.values.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        a.values[i] = std::bit_cast<float>(get_u32(data, offset + i * sizeof(float)));
      }
      expected = offset + count * sizeof(float);
      ckpt.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  if (expected != data.size()) {
    throw FormatError("checkpoint has " + std::to_string(data.size() - expected) +
                      " trailing bytes after the last array");
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

nlohmann::json spec_to_json(const NetworkSpec& spec) {
  return {{"stage_blocks", spec.stage_blocks},
          {"stage_widths", spec.stage_widths},
          {"num_classes", spec.num_classes},
          {"stem_kernel", spec.stem.kernel},
          {"stem_stride", spec.stem.stride},
          {"block", std::string(to_string(spec.block_kind))},
          {"input_channels", spec.input_channels}};
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
  NetworkSpec spec;
  try {
    spec.stage_blocks = j.at("stage_blocks").get<std::vector<int>>();
    spec.stage_widths = j.at("stage_widths").get<std::vector<int>>();
    spec.num_classes = j.at("num_classes").get<int>();
    spec.stem.kernel = j.at("stem_kernel").get<int>();
    spec.stem.stride = j.at("stem_stride").get<int>();
    spec.block_kind = parse_block_kind(j.at("block").get<std::string>());
    spec.input_channels = j.at("input_channels").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed network spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

Checkpoint network_checkpoint(const Network<float>& net) {
  Checkpoint ckpt;
  ckpt.meta["spec"] = spec_to_json(net.spec());
  for (const auto& p : net.params()) ckpt.arrays.push_back({p.name, p.shape, p.value});
  return ckpt;
}

void restore_network(Network<float>& net, const Checkpoint& ckpt) {
  for (auto& p : net.params()) {
    const ArrayRecord* a = ckpt.find(p.name);
    if (a == nullptr) throw FormatError("checkpoint is missing array " + p.name);
    if (a->shape != p.shape) throw FormatError("checkpoint array " + p.name + " has a different shape");
    p.value = a->values;
  }
}

Network<float> network_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("spec")) throw FormatError("checkpoint carries no network spec");
  Network<float> net(spec_from_json(ckpt.meta["spec"]), 0);
  restore_network(net, ckpt);
  return net;
}

std::uint64_t parameter_digest(const Network<float>& net) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 1099511628211ull;
  };
  for (const auto& p : net.params()) {
    for (const char ch : p.name) mix(static_cast<unsigned char>(ch));
    for (const float v : p.value) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) mix(static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu));
    }
  }
  return h;
}

}  // namespace stimtrain::nn
