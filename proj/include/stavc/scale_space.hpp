#pragma once

#include <vector>

#include "stavc/tensor.hpp"

namespace stavc {

// Normalized symmetric 1-D Gaussian taps. Separable application equals the
// dense 2-D blur. Tap count is round_up_to_odd(6*sigma + 1); sigma 0 is the
// identity kernel.
struct GaussianKernel {
  double sigma = 0.0;
  std::vector<double> taps;
};

GaussianKernel create_gaussian_kernel(double sigma);

// Separable Gaussian blur with edge-replicate padding. Accepts [C,H,W] or
// [N,C,H,W]; preserves shape. Differentiable.
Tensor gaussian_blur(const Tensor& img, const GaussianKernel& kernel);

// 2x2 average pooling / exact-doubling bilinear upsampling.
Tensor downsample2x(const Tensor& img);
Tensor upsample2x(const Tensor& img);

// Stack of M+1 progressively blurred copies of a frame, all at the input
// resolution. Level 0 is the input itself; level k >= 1 carries composed
// variance sigma0^2 * sum_{j<k} 4^j. Built with a Gaussian pyramid plus step
// upsampling rather than one large kernel per level.
struct ScaleSpaceVolume {
  std::vector<Tensor> levels;  // M+1 tensors, input shape
  double sigma0 = 0.0;
  int depth = 0;  // M
  std::vector<double> composed_variances;
};

ScaleSpaceVolume build_scale_space_volume(const Tensor& img, double sigma0, int depth);

// Per-pixel displacement plus pyramid-level coordinate. dx/dy are in pixels;
// scale lives in [0, depth] (clamped by the warp).
struct FlowField {
  Tensor dx;     // [N,H,W] or [H,W]
  Tensor dy;
  Tensor scale;
};

// Trilinear sampling of the volume at (x + dx, y + dy, scale): bilinear in
// space within the two bracketing levels, linear across levels, edge-clamped.
// Differentiable w.r.t. every level and all three flow channels.
Tensor scale_space_warp(const ScaleSpaceVolume& volume, const FlowField& flow);

}  // namespace stavc
