#pragma once

#include <cstdint>
#include <vector>

#include "stavc/tensor.hpp"

namespace stavc {

// Procedural clip generator standing in for a video corpus. Clips combine a
// globally translating textured canvas (exercises the flow path), sprites
// with independent motion and visibility toggles (residuals), and progressive
// blur events (the scale dimension of scale-space warping). Deterministic
// given the seed.
struct SyntheticSource {
  enum class Texture : uint8_t { Smooth = 0, Checker = 1, Noise = 2 };

  int width = 64;
  int height = 64;
  int channels = 3;
  int sprite_count = 3;       // independently moving sprites
  int velocity_max = 2;       // pixels/frame, integer, per axis
  Texture texture = Texture::Smooth;
  double blur_event_prob = 0.2;
  double occlusion_prob = 0.2;
  uint64_t seed = 0;
};

struct GeneratedClip {
  std::vector<Tensor> frames;      // [C,H,W] in [0,1]
  std::vector<double> blur_sigma;  // ground-truth per-frame blur (0 = none)
  int cam_dx = 0, cam_dy = 0;      // per-frame canvas translation
};

GeneratedClip generate_clip(const SyntheticSource& source, int length);
// salt folds extra entropy into the seed (training streams over many clips)
GeneratedClip generate_clip(const SyntheticSource& source, int length, uint64_t salt);

}  // namespace stavc
