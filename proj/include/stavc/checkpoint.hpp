#pragma once

#include <memory>
#include <string>

#include "stavc/transforms.hpp"

namespace stavc {

struct CheckpointMeta {
  VariantConfig config;
  double beta = 0.0;
  uint64_t seed = 0;
  int64_t train_steps = 0;
};

// Single-file model snapshot: magic, version, JSON metadata, then a table of
// (name, shape, raw little-endian doubles) for every parameter. Reload is
// bit-exact.
void save_checkpoint(const std::string& path, const VideoModel& model,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  std::unique_ptr<VideoModel> model;
  CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace stavc
