#include "stavc/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "stavc/scale_space.hpp"

namespace stavc {

namespace {

// bilinearly interpolated value-noise octaves, in [0,1]
std::vector<double> texture_smooth(int64_t H, int64_t W, RandomSource& rng) {
  std::vector<double> img(static_cast<size_t>(H * W), 0.0);
  double amp = 1.0;
  for (int oct = 0; oct < 4; ++oct) {
    int64_t gh = std::max<int64_t>(2, H >> (4 - oct));
    int64_t gw = std::max<int64_t>(2, W >> (4 - oct));
    std::vector<double> grid(static_cast<size_t>(gh * gw));
    for (auto& g : grid) g = rng.uniform();
    for (int64_t i = 0; i < H; ++i)
      for (int64_t j = 0; j < W; ++j) {
        double y = static_cast<double>(i) * (gh - 1) / std::max<int64_t>(1, H - 1);
        double x = static_cast<double>(j) * (gw - 1) / std::max<int64_t>(1, W - 1);
        int64_t y0 = static_cast<int64_t>(y), x0 = static_cast<int64_t>(x);
        int64_t y1 = std::min(y0 + 1, gh - 1), x1 = std::min(x0 + 1, gw - 1);
        double fy = y - y0, fx = x - x0;
        double v = (1 - fy) * ((1 - fx) * grid[y0 * gw + x0] + fx * grid[y0 * gw + x1]) +
                   fy * ((1 - fx) * grid[y1 * gw + x0] + fx * grid[y1 * gw + x1]);
        img[i * W + j] += amp * v;
      }
    amp *= 0.5;
  }
  double mx = 0, mn = 1e300;
  for (double v : img) {
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  for (auto& v : img) v = (v - mn) / (mx - mn + 1e-12);
  return img;
}

std::vector<double> texture_checker(int64_t H, int64_t W, RandomSource& rng) {
  int64_t period = rng.uniform_int(3, 8);
  int64_t px = rng.uniform_int(0, period - 1), py = rng.uniform_int(0, period - 1);
  double a = rng.uniform(0.1, 0.45), b = rng.uniform(0.55, 0.9);
  std::vector<double> img(static_cast<size_t>(H * W));
  for (int64_t i = 0; i < H; ++i)
    for (int64_t j = 0; j < W; ++j)
      img[i * W + j] = ((((i + py) / period) + ((j + px) / period)) % 2 == 0) ? a : b;
  return img;
}

std::vector<double> texture_noise(int64_t H, int64_t W, RandomSource& rng) {
  std::vector<double> img(static_cast<size_t>(H * W));
  for (auto& v : img) v = rng.uniform();
  return img;
}

struct Sprite {
  int64_t x, y, w, h;     // position (canvas or frame coords) and size
  int64_t vx = 0, vy = 0;
  int appear_at = 0;      // visible for t >= appear_at
  int vanish_at = 1 << 30;
  std::vector<double> tex;  // h*w, per channel offset applied later
  double tint[3] = {1, 1, 1};
};

void paint(std::vector<double>& img, int64_t C, int64_t H, int64_t W, const Sprite& s,
           int64_t ox, int64_t oy) {
  for (int64_t c = 0; c < std::min<int64_t>(C, 3); ++c)
    for (int64_t i = 0; i < s.h; ++i) {
      int64_t y = s.y + i - oy;
      if (y < 0 || y >= H) continue;
      for (int64_t j = 0; j < s.w; ++j) {
        int64_t x = s.x + j - ox;
        if (x < 0 || x >= W) continue;
        img[(c * H + y) * W + x] = std::clamp(s.tex[i * s.w + j] * s.tint[c], 0.0, 1.0);
      }
    }
  for (int64_t c = 3; c < C; ++c)
    for (int64_t i = 0; i < s.h; ++i) {
      int64_t y = s.y + i - oy;
      if (y < 0 || y >= H) continue;
      for (int64_t j = 0; j < s.w; ++j) {
        int64_t x = s.x + j - ox;
        if (x < 0 || x >= W) continue;
        img[(c * H + y) * W + x] = std::clamp(s.tex[i * s.w + j], 0.0, 1.0);
      }
    }
}

}  // namespace

GeneratedClip generate_clip(const SyntheticSource& source, int length) {
  return generate_clip(source, length, 0);
}

GeneratedClip generate_clip(const SyntheticSource& source, int length, uint64_t salt) {
  if (length < 2) throw UsageError("clips must have at least 2 frames");
  if (source.width < 8 || source.height < 8) throw UsageError("synthetic frames too small");
  RandomSource rng(source.seed ^ (salt * 0x9e3779b97f4a7c15ull + salt));
  rng.next_u64();

  const int64_t H = source.height, W = source.width, C = source.channels;
  GeneratedClip out;
  out.cam_dx = static_cast<int>(rng.uniform_int(-source.velocity_max, source.velocity_max));
  out.cam_dy = static_cast<int>(rng.uniform_int(-source.velocity_max, source.velocity_max));

  int64_t pad = static_cast<int64_t>(source.velocity_max) * length + 2;
  int64_t CH = H + 2 * pad, CW = W + 2 * pad;

  // static world: textured background with a few painted-on sprites
  std::vector<double> plane;
  switch (source.texture) {
    case SyntheticSource::Texture::Smooth: plane = texture_smooth(CH, CW, rng); break;
    case SyntheticSource::Texture::Checker: plane = texture_checker(CH, CW, rng); break;
    case SyntheticSource::Texture::Noise: plane = texture_noise(CH, CW, rng); break;
  }
  std::vector<double> canvas(static_cast<size_t>(C * CH * CW));
  for (int64_t c = 0; c < C; ++c) {
    double gain = 0.7 + 0.3 * rng.uniform();
    double lift = 0.15 * rng.uniform();
    for (int64_t e = 0; e < CH * CW; ++e)
      canvas[c * CH * CW + e] = std::clamp(plane[e] * gain + lift, 0.0, 1.0);
  }
  int static_sprites = 2 + static_cast<int>(rng.uniform_int(0, 2));
  for (int s = 0; s < static_sprites; ++s) {
    Sprite sp;
    sp.w = rng.uniform_int(8, 16);
    sp.h = rng.uniform_int(8, 16);
    sp.x = rng.uniform_int(0, CW - sp.w - 1);
    sp.y = rng.uniform_int(0, CH - sp.h - 1);
    RandomSource tr = rng.fork(1000 + s);
    sp.tex = texture_checker(sp.h, sp.w, tr);
    for (double& t : sp.tint) t = 0.5 + 0.5 * rng.uniform();
    paint(canvas, C, CH, CW, sp, 0, 0);
  }

  // independently moving sprites, possibly appearing/disappearing
  std::vector<Sprite> movers;
  for (int s = 0; s < source.sprite_count; ++s) {
    Sprite sp;
    sp.w = rng.uniform_int(6, 12);
    sp.h = rng.uniform_int(6, 12);
    sp.x = rng.uniform_int(0, W - sp.w - 1);
    sp.y = rng.uniform_int(0, H - sp.h - 1);
    sp.vx = rng.uniform_int(-source.velocity_max, source.velocity_max);
    sp.vy = rng.uniform_int(-source.velocity_max, source.velocity_max);
    if (rng.bernoulli(source.occlusion_prob)) {
      if (rng.bernoulli(0.5))
        sp.appear_at = static_cast<int>(rng.uniform_int(1, length - 1));
      else
        sp.vanish_at = static_cast<int>(rng.uniform_int(1, length - 1));
    }
    RandomSource tr = rng.fork(2000 + s);
    sp.tex = texture_checker(sp.h, sp.w, tr);
    for (double& t : sp.tint) t = 0.5 + 0.5 * rng.uniform();
    movers.push_back(sp);
  }

  // progressive blur event
  int blur_from = length;  // none
  double blur_rate = 0.0;
  if (rng.bernoulli(source.blur_event_prob)) {
    blur_from = static_cast<int>(rng.uniform_int(1, length - 1));
    blur_rate = rng.uniform(0.4, 1.0);
  }

  int64_t cx0 = pad, cy0 = pad;
  for (int t = 0; t < length; ++t) {
    int64_t ox = cx0 + t * out.cam_dx;
    int64_t oy = cy0 + t * out.cam_dy;
    std::vector<double> frame(static_cast<size_t>(C * H * W));
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < H; ++i)
        for (int64_t j = 0; j < W; ++j)
          frame[(c * H + i) * W + j] = canvas[(c * CH + oy + i) * CW + ox + j];
    for (const Sprite& sp : movers) {
      if (t < sp.appear_at || t >= sp.vanish_at) continue;
      Sprite moved = sp;
      moved.x = sp.x + t * sp.vx;
      moved.y = sp.y + t * sp.vy;
      paint(frame, C, H, W, moved, 0, 0);
    }
    Tensor f = Tensor::from_data({C, H, W}, std::move(frame));
    double sigma = t >= blur_from ? blur_rate * (t - blur_from + 1) : 0.0;
    if (sigma > 0.0) {
      NoGradGuard ng;
      f = gaussian_blur(f, create_gaussian_kernel(sigma)).detach();
    }
    out.blur_sigma.push_back(sigma);
    out.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace stavc
