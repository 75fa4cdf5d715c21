#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "stimtrain/config.hpp"

namespace stimtrain::testing {

// A run that finishes in well under a second: two stages of two basic
// blocks on 8x8 synthetic images.
inline train::TrainConfig tiny_config(train::TrainMode mode, int k_subnets) {
  train::TrainConfig cfg;
  cfg.mode = mode;
  cfg.k_subnets = k_subnets;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.model.stage_blocks = {2, 2};
  cfg.model.stage_widths = {4, 8};
  cfg.model.num_classes = 4;
  cfg.resolution = {4, 8};
  cfg.optim.lr = 0.05;
  cfg.data.source = "synth";
  cfg.data.synth.num_classes = 4;
  cfg.data.synth.samples_per_class = 16;
  cfg.data.synth.test_samples_per_class = 8;
  cfg.data.synth.size = 8;
  cfg.eval.val_resize = 8;
  cfg.eval.val_crop = 8;
  cfg.eval.every = 1;
  return cfg;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto d = std::filesystem::path(STIMTRAIN_TEST_TMP) / name;
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace stimtrain::testing
