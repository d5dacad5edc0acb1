#pragma once

#include <string>
#include <vector>

#include "stavc/synthetic.hpp"
#include "stavc/transforms.hpp"

namespace stavc {

struct TrainConfig {
  double beta = 0.01;
  int64_t steps = 2000;
  double lr_initial = 1e-4;
  double lr_decayed = 1e-5;
  int64_t decay_step = -1;   // < 0: 85% of steps
  int crop = 64;
  int crop_final = 96;       // used for the last final_frac of steps
  double final_frac = 0.05;
  int frames_per_clip = 3;
  int batch = 4;
  uint64_t seed = 0;
  int64_t log_every = 10;
  int64_t snapshot_every = 0;  // 0: only the final checkpoint (written by callers)

  VariantConfig model;
  SyntheticSource source;

  void validate() const;
  int64_t effective_decay_step() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct RdParts {
  Tensor loss;       // scalar, differentiable
  double distortion; // per-element squared error
  double rate_bpp;   // bits per pixel under the noise proxy
};

// clip_frames: time-major, each [B,C,H,W]. Distortion covers every frame
// including the I-frame; rate is total estimated bits over pixels.
RdParts rd_loss(const VideoModel& model, const std::vector<Tensor>& clip_frames, double beta,
                RandomSource& noise);

struct AdamState {
  std::vector<std::vector<double>> m, v;
  int64_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

void adam_init(AdamState& st, const ParamStore& params);
void adam_step(ParamStore& params, AdamState& st, double lr);

struct CurvePoint {
  int64_t step;
  double loss, distortion, rate_bpp, lr;
};

struct TrainResult {
  std::vector<CurvePoint> curve;
  double initial_loss = 0;
  double final_loss = 0;
};

// Deterministic given cfg.seed. If the loss goes non-finite the loop dumps
// the offending batch as PPM frames and aborts with a NumericError. With
// snapshot_every > 0 and a non-empty snapshot_prefix, intermediate
// checkpoints land at <prefix>_step<k>.ckpt. curve_csv_path may be empty.
TrainResult train(VideoModel& model, const TrainConfig& cfg, const std::string& curve_csv_path,
                  const std::string& snapshot_prefix = "");

std::string curve_to_csv(const std::vector<CurvePoint>& curve);

}  // namespace stavc
