#pragma once

// Ordered residual sampling space.
//
// A sampling rule gives, per stage, how many depth choices are allowed,
// counted down from the full stage depth: choice count s on a stage of n
// blocks admits kept depths {n - s + 1, ..., n}.

#include <cstdint>
#include <random>
#include <vector>

#include "stimtrain/network.hpp"

namespace stimtrain::sampling {

inline constexpr std::uint64_t kDefaultEnumerationCap = 4096;

struct SamplingRule {
  std::vector<int> choices;

  /// Every stage gets all of its depths.
  static SamplingRule full(const nn::NetworkSpec& spec);
  /// Throws RuleError on a length mismatch or a choice outside [1, stage_blocks[i]].
  void validate(const nn::NetworkSpec& spec) const;
  /// Smallest kept depth per stage.
  std::vector<int> min_depths(const nn::NetworkSpec& spec) const;

  bool operator==(const SamplingRule&) const = default;
};

/// Product of the per-stage choice counts.
std::uint64_t space_cardinality(const nn::NetworkSpec& spec, const SamplingRule& rule);

/// Size of the unordered space where any subset of blocks may be skipped,
/// prod 2^{n_i}. Saturates at UINT64_MAX.
std::uint64_t raw_space_cardinality(const nn::NetworkSpec& spec);

/// Each stage depth drawn independently and uniformly from its induced set.
nn::DepthMask sample_subnet(const nn::NetworkSpec& spec, const SamplingRule& rule, std::mt19937_64& rng);

/// All masks of the space in lexicographic order. Throws EnumerationError
/// when the cardinality exceeds `cap`.
std::vector<nn::DepthMask> enumerate_space(const nn::NetworkSpec& spec, const SamplingRule& rule,
                                           std::uint64_t cap = kDefaultEnumerationCap);

/// Reference enumerator for stochastic residual sampling: any subset of the
/// non-first blocks of each stage may be skipped. Returns one keep-flag
/// vector per stage for every subnetwork. Comparison tests only.
std::vector<std::vector<std::vector<bool>>> enumerate_stochastic_space(const nn::NetworkSpec& spec,
                                                                      std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace stimtrain::sampling
