#include "stavc/scale_space.hpp"

#include <algorithm>
#include <cmath>

namespace stavc {

using detail::TensorNode;

GaussianKernel create_gaussian_kernel(double sigma) {
  if (sigma < 0.0) throw UsageError("gaussian kernel sigma must be >= 0");
  GaussianKernel k;
  k.sigma = sigma;
  if (sigma == 0.0) {
    k.taps = {1.0};
    return k;
  }
  int64_t len = static_cast<int64_t>(std::ceil(6.0 * sigma + 1.0));
  if (len % 2 == 0) len += 1;
  k.taps.resize(static_cast<size_t>(len));
  int64_t c = len / 2;
  double sum = 0.0;
  for (int64_t i = 0; i < len; ++i) {
    double d = static_cast<double>(i - c);
    k.taps[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    sum += k.taps[i];
  }
  for (auto& t : k.taps) t /= sum;
  return k;
}

namespace {

struct PlaneDims {
  int64_t planes, H, W;
};

PlaneDims plane_dims(const Shape& s, const char* op) {
  if (s.size() != 3 && s.size() != 4)
    throw DimensionError(std::string(op) + " expects [C,H,W] or [N,C,H,W]");
  PlaneDims d;
  d.H = s[s.size() - 2];
  d.W = s[s.size() - 1];
  d.planes = 1;
  for (size_t i = 0; i + 2 < s.size(); ++i) d.planes *= s[i];
  return d;
}

inline int64_t clamp_idx(int64_t i, int64_t n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

void blur_rows(const double* in, double* out, int64_t planes, int64_t H, int64_t W,
               const std::vector<double>& taps) {
  int64_t c = static_cast<int64_t>(taps.size()) / 2;
  int64_t T = static_cast<int64_t>(taps.size());
  for (int64_t p = 0; p < planes * H; ++p) {
    const double* r = in + p * W;
    double* o = out + p * W;
    for (int64_t j = 0; j < W; ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < T; ++k) s += taps[k] * r[clamp_idx(j + k - c, W)];
      o[j] = s;
    }
  }
}

void blur_cols(const double* in, double* out, int64_t planes, int64_t H, int64_t W,
               const std::vector<double>& taps) {
  int64_t c = static_cast<int64_t>(taps.size()) / 2;
  int64_t T = static_cast<int64_t>(taps.size());
  for (int64_t p = 0; p < planes; ++p) {
    const double* img = in + p * H * W;
    double* o = out + p * H * W;
    for (int64_t i = 0; i < H; ++i) {
      double* orow = o + i * W;
      std::fill(orow, orow + W, 0.0);
      for (int64_t k = 0; k < T; ++k) {
        const double* r = img + clamp_idx(i + k - c, H) * W;
        double t = taps[k];
        for (int64_t j = 0; j < W; ++j) orow[j] += t * r[j];
      }
    }
  }
}

void adjoint_rows(const double* g, double* dx, int64_t planes, int64_t H, int64_t W,
                  const std::vector<double>& taps) {
  int64_t c = static_cast<int64_t>(taps.size()) / 2;
  int64_t T = static_cast<int64_t>(taps.size());
  for (int64_t p = 0; p < planes * H; ++p) {
    const double* gr = g + p * W;
    double* dr = dx + p * W;
    for (int64_t j = 0; j < W; ++j) {
      double go = gr[j];
      for (int64_t k = 0; k < T; ++k) dr[clamp_idx(j + k - c, W)] += taps[k] * go;
    }
  }
}

void adjoint_cols(const double* g, double* dx, int64_t planes, int64_t H, int64_t W,
                  const std::vector<double>& taps) {
  int64_t c = static_cast<int64_t>(taps.size()) / 2;
  int64_t T = static_cast<int64_t>(taps.size());
  for (int64_t p = 0; p < planes; ++p) {
    const double* gi = g + p * H * W;
    double* di = dx + p * H * W;
    for (int64_t i = 0; i < H; ++i) {
      const double* gr = gi + i * W;
      for (int64_t k = 0; k < T; ++k) {
        double* dr = di + clamp_idx(i + k - c, H) * W;
        double t = taps[k];
        for (int64_t j = 0; j < W; ++j) dr[j] += t * gr[j];
      }
    }
  }
}

}  // namespace

Tensor gaussian_blur(const Tensor& img, const GaussianKernel& kernel) {
  PlaneDims d = plane_dims(img.shape(), "gaussian_blur");
  if (kernel.taps.size() == 1) {
    // identity kernel: still emits a node so graphs stay uniform
    return img + 0.0;
  }
  const auto& xv = img.values();
  std::vector<double> tmp(xv.size()), out(xv.size());
  blur_rows(xv.data(), tmp.data(), d.planes, d.H, d.W, kernel.taps);
  blur_cols(tmp.data(), out.data(), d.planes, d.H, d.W, kernel.taps);
  auto px = img.node();
  std::vector<double> taps = kernel.taps;
  int64_t planes = d.planes, H = d.H, W = d.W;
  return detail::make_custom_op(
      img.shape(), std::move(out), {img},
      [px, taps, planes, H, W](TensorNode& self) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        std::vector<double> tmp(self.grad.size(), 0.0);
        adjoint_cols(self.grad.data(), tmp.data(), planes, H, W, taps);
        adjoint_rows(tmp.data(), px->grad.data(), planes, H, W, taps);
      },
      "gaussian_blur");
}

Tensor downsample2x(const Tensor& img) { return avg_pool2x(img); }

Tensor upsample2x(const Tensor& img) { return upsample_bilinear2x(img); }

ScaleSpaceVolume build_scale_space_volume(const Tensor& img, double sigma0, int depth) {
  if (sigma0 <= 0.0) throw UsageError("scale-space sigma0 must be > 0");
  if (depth < 1) throw UsageError("scale-space depth must be >= 1");
  PlaneDims d = plane_dims(img.shape(), "build_scale_space_volume");
  int64_t div = int64_t{1} << (depth - 1);
  if (d.H % div != 0 || d.W % div != 0)
    throw DimensionError("scale-space input dims must be divisible by 2^(depth-1)");

  ScaleSpaceVolume vol;
  vol.sigma0 = sigma0;
  vol.depth = depth;
  vol.levels.reserve(static_cast<size_t>(depth) + 1);
  vol.levels.push_back(img);
  vol.composed_variances.assign(static_cast<size_t>(depth) + 1, 0.0);
  double var = 0.0, scale2 = 1.0;
  for (int i = 1; i <= depth; ++i) {
    var += scale2 * sigma0 * sigma0;
    scale2 *= 4.0;
    vol.composed_variances[static_cast<size_t>(i)] = var;
  }

  GaussianKernel kernel = create_gaussian_kernel(sigma0);
  Tensor cur = img;
  for (int i = 0; i < depth; ++i) {
    cur = gaussian_blur(cur, kernel);
    if (i == 0) {
      vol.levels.push_back(cur);
    } else {
      Tensor up = cur;
      for (int j = 0; j < i; ++j) up = upsample2x(up);
      vol.levels.push_back(up);
    }
    if (i + 1 < depth) cur = downsample2x(cur);
  }
  return vol;
}

namespace {

struct WarpGeom {
  int64_t cy0, cy1, cx0, cx1;
  double fx, fy;
};

inline WarpGeom spatial_geom(double sx, double sy, int64_t H, int64_t W) {
  WarpGeom g;
  double fx0 = std::floor(sx);
  double fy0 = std::floor(sy);
  g.fx = sx - fx0;
  g.fy = sy - fy0;
  int64_t x0 = static_cast<int64_t>(fx0);
  int64_t y0 = static_cast<int64_t>(fy0);
  g.cx0 = clamp_idx(x0, W);
  g.cx1 = clamp_idx(x0 + 1, W);
  g.cy0 = clamp_idx(y0, H);
  g.cy1 = clamp_idx(y0 + 1, H);
  return g;
}

inline double bilin(const double* plane, int64_t W, const WarpGeom& g) {
  double v00 = plane[g.cy0 * W + g.cx0];
  double v01 = plane[g.cy0 * W + g.cx1];
  double v10 = plane[g.cy1 * W + g.cx0];
  double v11 = plane[g.cy1 * W + g.cx1];
  return (1.0 - g.fy) * ((1.0 - g.fx) * v00 + g.fx * v01) +
         g.fy * ((1.0 - g.fx) * v10 + g.fx * v11);
}

}  // namespace

Tensor scale_space_warp(const ScaleSpaceVolume& volume, const FlowField& flow) {
  if (volume.levels.size() != static_cast<size_t>(volume.depth) + 1)
    throw UsageError("scale-space volume level count does not match depth");
  const Shape& ls = volume.levels[0].shape();
  for (const auto& l : volume.levels)
    if (l.shape() != ls) throw DimensionError("scale-space levels disagree on shape");
  bool batched = ls.size() == 4;
  if (!batched && ls.size() != 3)
    throw DimensionError("scale_space_warp expects [C,H,W] or [N,C,H,W] levels");
  int64_t N = batched ? ls[0] : 1;
  int64_t C = ls[ls.size() - 3];
  int64_t H = ls[ls.size() - 2];
  int64_t W = ls[ls.size() - 1];
  Shape fs = batched ? Shape{N, H, W} : Shape{H, W};
  if (flow.dx.shape() != fs || flow.dy.shape() != fs || flow.scale.shape() != fs)
    throw DimensionError("flow field dims do not match volume dims");

  int M = volume.depth;
  const auto& dxv = flow.dx.values();
  const auto& dyv = flow.dy.values();
  const auto& scv = flow.scale.values();
  int64_t plane = H * W;

  std::vector<const double*> lv(volume.levels.size());
  for (size_t k = 0; k < volume.levels.size(); ++k) lv[k] = volume.levels[k].values().data();

  std::vector<double> out(static_cast<size_t>(N * C * plane));
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t i = 0; i < H; ++i) {
      for (int64_t j = 0; j < W; ++j) {
        int64_t f = n * plane + i * W + j;
        double s = std::clamp(scv[f], 0.0, static_cast<double>(M));
        int64_t k0 = std::min<int64_t>(static_cast<int64_t>(std::floor(s)), M - 1);
        if (k0 < 0) k0 = 0;
        int64_t k1 = k0 + 1;
        double fsc = s - static_cast<double>(k0);
        WarpGeom g = spatial_geom(static_cast<double>(j) + dxv[f], static_cast<double>(i) + dyv[f],
                                  H, W);
        const double* L0 = lv[static_cast<size_t>(k0)] + n * C * plane;
        const double* L1 = lv[static_cast<size_t>(k1)] + n * C * plane;
        for (int64_t c = 0; c < C; ++c) {
          double v0 = bilin(L0 + c * plane, W, g);
          double v1 = bilin(L1 + c * plane, W, g);
          out[(n * C + c) * plane + i * W + j] = (1.0 - fsc) * v0 + fsc * v1;
        }
      }
    }
  }

  std::vector<Tensor> parents = volume.levels;
  parents.push_back(flow.dx);
  parents.push_back(flow.dy);
  parents.push_back(flow.scale);
  std::vector<std::shared_ptr<TensorNode>> lnodes;
  for (const auto& l : volume.levels) lnodes.push_back(l.node());
  auto pdx = flow.dx.node();
  auto pdy = flow.dy.node();
  auto psc = flow.scale.node();

  return detail::make_custom_op(
      ls, std::move(out), parents,
      [lnodes, pdx, pdy, psc, N, C, H, W, M](TensorNode& self) {
        int64_t plane = H * W;
        bool any_level = false;
        for (const auto& l : lnodes) any_level = any_level || l->requires_grad;
        bool need_dx = pdx->requires_grad, need_dy = pdy->requires_grad,
             need_sc = psc->requires_grad;
        if (!any_level && !need_dx && !need_dy && !need_sc) return;
        for (const auto& l : lnodes)
          if (l->requires_grad) l->ensure_grad();
        if (need_dx) pdx->ensure_grad();
        if (need_dy) pdy->ensure_grad();
        if (need_sc) psc->ensure_grad();

        for (int64_t n = 0; n < N; ++n) {
          for (int64_t i = 0; i < H; ++i) {
            for (int64_t j = 0; j < W; ++j) {
              int64_t f = n * plane + i * W + j;
              double sraw = psc->val[f];
              double s = std::clamp(sraw, 0.0, static_cast<double>(M));
              int64_t k0 = std::min<int64_t>(static_cast<int64_t>(std::floor(s)), M - 1);
              if (k0 < 0) k0 = 0;
              int64_t k1 = k0 + 1;
              double fsc = s - static_cast<double>(k0);
              WarpGeom g = spatial_geom(static_cast<double>(j) + pdx->val[f],
                                        static_cast<double>(i) + pdy->val[f], H, W);
              TensorNode& n0 = *lnodes[static_cast<size_t>(k0)];
              TensorNode& n1 = *lnodes[static_cast<size_t>(k1)];
              double acc_dx = 0.0, acc_dy = 0.0, acc_sc = 0.0;
              for (int64_t c = 0; c < C; ++c) {
                double go = self.grad[(n * C + c) * plane + i * W + j];
                if (go == 0.0 && !need_dx && !need_dy && !need_sc) continue;
                int64_t base = (n * C + c) * plane;
                double w00 = (1.0 - g.fy) * (1.0 - g.fx);
                double w01 = (1.0 - g.fy) * g.fx;
                double w10 = g.fy * (1.0 - g.fx);
                double w11 = g.fy * g.fx;
                int64_t i00 = base + g.cy0 * W + g.cx0;
                int64_t i01 = base + g.cy0 * W + g.cx1;
                int64_t i10 = base + g.cy1 * W + g.cx0;
                int64_t i11 = base + g.cy1 * W + g.cx1;
                if (n0.requires_grad) {
                  double q = (1.0 - fsc) * go;
                  n0.grad[i00] += q * w00;
                  n0.grad[i01] += q * w01;
                  n0.grad[i10] += q * w10;
                  n0.grad[i11] += q * w11;
                }
                if (n1.requires_grad) {
                  double q = fsc * go;
                  n1.grad[i00] += q * w00;
                  n1.grad[i01] += q * w01;
                  n1.grad[i10] += q * w10;
                  n1.grad[i11] += q * w11;
                }
                if (need_dx || need_dy || need_sc) {
                  double v000 = n0.val[i00], v001 = n0.val[i01], v010 = n0.val[i10],
                         v011 = n0.val[i11];
                  double v100 = n1.val[i00], v101 = n1.val[i01], v110 = n1.val[i10],
                         v111 = n1.val[i11];
                  if (need_dx) {
                    double d0 = (1.0 - g.fy) * (v001 - v000) + g.fy * (v011 - v010);
                    double d1 = (1.0 - g.fy) * (v101 - v100) + g.fy * (v111 - v110);
                    acc_dx += go * ((1.0 - fsc) * d0 + fsc * d1);
                  }
                  if (need_dy) {
                    double d0 = (1.0 - g.fx) * (v010 - v000) + g.fx * (v011 - v001);
                    double d1 = (1.0 - g.fx) * (v110 - v100) + g.fx * (v111 - v101);
                    acc_dy += go * ((1.0 - fsc) * d0 + fsc * d1);
                  }
                  if (need_sc && sraw > 0.0 && sraw < static_cast<double>(M)) {
                    double b0 = (1.0 - g.fy) * ((1.0 - g.fx) * v000 + g.fx * v001) +
                                g.fy * ((1.0 - g.fx) * v010 + g.fx * v011);
                    double b1 = (1.0 - g.fy) * ((1.0 - g.fx) * v100 + g.fx * v101) +
                                g.fy * ((1.0 - g.fx) * v110 + g.fx * v111);
                    acc_sc += go * (b1 - b0);
                  }
                }
              }
              if (need_dx) pdx->grad[f] += acc_dx;
              if (need_dy) pdy->grad[f] += acc_dy;
              if (need_sc) psc->grad[f] += acc_sc;
            }
          }
        }
      },
      "scale_space_warp");
}

}  // namespace stavc
