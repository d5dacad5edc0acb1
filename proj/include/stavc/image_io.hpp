#pragma once

#include <string>
#include <vector>

#include "stavc/tensor.hpp"

namespace stavc {

using Clip = std::vector<Tensor>;  // [C,H,W] frames in [0,1]

// Single image, [C,H,W] with C = 1 or 3 (alpha channels are dropped).
// Supported: binary PPM (P6) / PGM (P5) with maxval 255, and 8-bit
// non-interlaced PNG. 16-bit inputs are an ingestion error.
Tensor load_image(const std::string& path);

void save_image_ppm(const std::string& path, const Tensor& img);

// A directory of numbered .ppm/.pgm/.png frames of equal size (ordered by the
// first integer in each filename), or a raw planar file with a JSON sidecar
// (path + ".json" holding width/height/channels/frames; u8 samples, frame-
// then channel-planar).
Clip load_frames(const std::string& path);

void save_frames_ppm(const std::string& dir, const Clip& clip,
                     const std::string& prefix = "frame");

void save_raw_planar(const std::string& path, const Clip& clip);

}  // namespace stavc
