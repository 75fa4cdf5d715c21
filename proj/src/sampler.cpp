#include "stimtrain/sampler.hpp"

#include <limits>
#include <string>

#include "stimtrain/error.hpp"

namespace stimtrain::sampling {

SamplingRule SamplingRule::full(const nn::NetworkSpec& spec) { return SamplingRule{spec.stage_blocks}; }

void SamplingRule::validate(const nn::NetworkSpec& spec) const {
  if (choices.size() != spec.stage_blocks.size()) {
    throw RuleError("sampling.choices has " + std::to_string(choices.size()) +
                    " entries but model.stage_blocks has " + std::to_string(spec.stage_blocks.size()));
  }
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (choices[i] < 1 || choices[i] > spec.stage_blocks[i]) {
      throw RuleError("sampling.choices[" + std::to_string(i) + "] = " + std::to_string(choices[i]) +
                      " outside [1, model.stage_blocks[" + std::to_string(i) +
                      "] = " + std::to_string(spec.stage_blocks[i]) + "]");
    }
  }
}

std::vector<int> SamplingRule::min_depths(const nn::NetworkSpec& spec) const {
  validate(spec);
  std::vector<int> out(choices.size());
  for (std::size_t i = 0; i < choices.size(); ++i) out[i] = spec.stage_blocks[i] - choices[i] + 1;
  return out;
}

std::uint64_t space_cardinality(const nn::NetworkSpec& spec, const SamplingRule& rule) {
  rule.validate(spec);
  std::uint64_t n = 1;
  for (const int s : rule.choices) n *= static_cast<std::uint64_t>(s);
  return n;
}

std::uint64_t raw_space_cardinality(const nn::NetworkSpec& spec) {
  int bits = 0;
  for (const int n : spec.stage_blocks) bits += n;
  if (bits >= 64) return std::numeric_limits<std::uint64_t>::max();
  return std::uint64_t{1} << bits;
}

nn::DepthMask sample_subnet(const nn::NetworkSpec& spec, const SamplingRule& rule, std::mt19937_64& rng) {
  const auto lo = rule.min_depths(spec);
  nn::DepthMask m;
  m.kept.resize(lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i) {
    std::uniform_int_distribution<int> pick(lo[i], spec.stage_blocks[i]);
    m.kept[i] = pick(rng);
  }
  return m;
}

std::vector<nn::DepthMask> enumerate_space(const nn::NetworkSpec& spec, const SamplingRule& rule,
                                           std::uint64_t cap) {
  const std::uint64_t card = space_cardinality(spec, rule);
  if (card > cap) {
    throw EnumerationError("sampling space has " + std::to_string(card) +
                           " subnetworks, above the enumeration cap of " + std::to_string(cap) +
                           "; sample subnetworks instead");
  }
  const auto lo = rule.min_depths(spec);
  std::vector<nn::DepthMask> out;
  out.reserve(card);
  nn::DepthMask cur{lo};
  // Odometer with the last stage varying fastest gives lexicographic order.
  while (true) {
    out.push_back(cur);
    int i = static_cast<int>(cur.kept.size()) - 1;
    while (i >= 0 && cur.kept[i] == spec.stage_blocks[i]) {
      cur.kept[i] = lo[i];
      --i;
    }
    if (i < 0) break;
    ++cur.kept[i];
  }
  return out;
}

std::vector<std::vector<std::vector<bool>>> enumerate_stochastic_space(const nn::NetworkSpec& spec,
                                                                      std::uint64_t cap) {
  int free_bits = 0;
  for (const int n : spec.stage_blocks) free_bits += n - 1;
  if (free_bits >= 63 || (std::uint64_t{1} << free_bits) > cap) {
    throw EnumerationError("stochastic residual space exceeds the enumeration cap");
  }
  const std::uint64_t total = std::uint64_t{1} << free_bits;
  std::vector<std::vector<std::vector<bool>>> out;
  out.reserve(total);
  for (std::uint64_t code = 0; code < total; ++code) {
    std::vector<std::vector<bool>> stages;
    int bit = 0;
    for (const int n : spec.stage_blocks) {
      std::vector<bool> keep(n, true);
      for (int b = 1; b < n; ++b) keep[b] = ((code >> bit++) & 1u) != 0;
      stages.push_back(std::move(keep));
    }
    out.push_back(std::move(stages));
  }
  return out;
}

}  // namespace stimtrain::sampling
