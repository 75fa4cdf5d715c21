#pragma once

// Central finite-difference checks of every analytic gradient, in double.

#include <cstdint>
#include <string>
#include <vector>

namespace stimtrain::gradcheck {

inline constexpr double kTolerance = 1e-4;
inline constexpr int kMinProbes = 20;

struct SuiteResult {
  std::string name;
  int probes = 0;
  int skipped_kinks = 0;  // probes redrawn because they straddled a ReLU kink
  double max_rel_error = 0.0;
  bool passed = false;
};

/// |a - n| / max(|a|, |n|, 1e-7).
double relative_error(double analytic, double numeric);

/// Losses (CE, KL, KL-), convolution (both backends), batch normalization
/// (train and eval), and whole networks grouped by parameter role.
std::vector<SuiteResult> run_all(std::uint64_t seed, int probes = kMinProbes);

}  // namespace stimtrain::gradcheck
