#pragma once

// Checkpoint container:
//
//   "STPP" | u32 version | u32 manifest byte length | manifest (UTF-8 JSON)
//   | raw float32 little-endian arrays in manifest order
//
// The manifest is {"arrays": [{"name", "shape", "offset"}...], "meta": {...}}
// with offsets in bytes from the start of the array section.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stimtrain/network.hpp"

namespace stimtrain::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ArrayRecord {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;

  bool operator==(const ArrayRecord&) const = default;
};

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<ArrayRecord> arrays;

  const ArrayRecord* find(std::string_view name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on any structural problem.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

/// Every parameter (running statistics included); the spec goes into meta["spec"].
Checkpoint network_checkpoint(const Network<float>& net);
/// Copies matching arrays into `net`. Missing names or shape mismatches throw FormatError.
void restore_network(Network<float>& net, const Checkpoint& ckpt);
Network<float> network_from_checkpoint(const Checkpoint& ckpt);

/// FNV-1a digest of the encoded parameter values.
std::uint64_t parameter_digest(const Network<float>& net);

}  // namespace stimtrain::nn
