#pragma once

#include <cstdint>
#include <string>

#include "stavc/entropy.hpp"
#include "stavc/nets.hpp"
#include "stavc/scale_space.hpp"
#include "stavc/tensor.hpp"

namespace stavc {

// Reconstruction-transform family. All four share one backbone; they differ
// in how the shift/scale pair is produced and which latents exist:
//   TAT       x^_t = h_mu(x^_{t-1}) + h_sig(x^_{t-1}) . g_z(z^)     (no w)
//   SSF       x^_t = warp(x^_{t-1}, g_w(w^)) + g_v(v^)              (sigma = 1)
//   STAT      x^_t = h_mu(x^_{t-1},w) + h_sig(x^_{t-1},w) . g_v(v^,w^)
//   STAT_SSF  like STAT but the shift is scale-space warping
enum class Variant : uint8_t { TAT = 0, SSF = 1, STAT = 2, STAT_SSF = 3 };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& s);

struct VariantConfig {
  Variant variant = Variant::STAT_SSF;
  bool structured_prior = false;
  int frame_channels = 3;
  int hidden = 64;       // backbone width
  int latent = 32;       // w/v/I latent channels
  int hyper = 32;        // hyper-latent channels
  int cond_hidden = 32;  // width of the h_mu / h_sigma CNNs
  double sigma0 = 1.5;   // scale-space base blur
  int scale_depth = 5;   // scale-space M

  void validate() const;
  uint64_t hash() const;  // over everything that affects wire compatibility
  std::string to_json() const;
  static VariantConfig from_json(const std::string& json_text);
};

// positive gate floor and its zero-init offset (so a zero-initialized gate
// CNN yields sigma == 1 exactly)
inline constexpr double kSigmaMin = 1e-3;
double gate_zero_offset();   // softplus^-1(1 - kSigmaMin)
double scale_zero_offset();  // softplus^-1(1 - kMinCodeScale)

struct ScaleShift {
  Tensor mu;
  Tensor sigma;  // > 0 everywhere
};

// x = mu + sigma . y and its inverse y = (x - mu)/sigma.
Tensor maf_forward(const Tensor& y, const ScaleShift& ss);
Tensor maf_inverse(const Tensor& x, const ScaleShift& ss);

// Per-frame latents: continuous encoder means and their quantized forms
// (integers at eval time, noise-perturbed during training).
struct LatentBundle {
  Tensor w_mean, v_mean, w_hyper_mean, v_hyper_mean;
  Tensor w_hat, v_hat, w_hyper_hat, v_hyper_hat;
};

class VideoModel {
 public:
  VideoModel(VariantConfig cfg, uint64_t seed);

  const VariantConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  bool has_w() const { return cfg_.variant != Variant::TAT; }

  static int64_t latent_dim(int64_t frame_dim);  // after 4 stride-2 blocks
  static int64_t hyper_dim(int64_t frame_dim);   // after 2 more

  // ---- I-frame autoencoder (hyper-prior image codec on the same backbone) ----
  Tensor iframe_encode(const Tensor& x) const;
  Tensor iframe_decode(const Tensor& y_hat) const;
  Tensor iframe_hyper_encode(const Tensor& y_mean) const;
  DiscretizedGaussian iframe_prior(const Tensor& yh_hat, int64_t lh, int64_t lw) const;
  const FactorizedPrior& iframe_hyper_prior() const { return fp_ih_; }

  // ---- P-frame pieces (all tensors [N,.,.,.]) ----
  Tensor encode_w(const Tensor& x, const Tensor& prev) const;  // f_w
  Tensor hyper_encode_w(const Tensor& w_mean) const;
  DiscretizedGaussian prior_w(const Tensor& wh_hat, int64_t lh, int64_t lw) const;
  const FactorizedPrior& hyper_prior_w() const;

  Tensor decode_wfeat(const Tensor& w_hat) const;  // g_w, full-res 3-channel
  FlowField flow_from_wfeat(const Tensor& wfeat) const;

  struct Prediction {
    Tensor mu;
    Tensor sigma;  // all-ones for SSF
    Tensor wfeat;  // undefined for TAT
  };
  // w_hat may be undefined only for TAT
  Prediction predict(const Tensor& prev, const Tensor& w_hat) const;

  Tensor encode_v(const Tensor& x, const Prediction& pred) const;  // f_v of gated residual
  Tensor hyper_encode_v(const Tensor& v_mean) const;
  // Structured prior p(v | vh, w, wh); with structured_prior=false (or TAT)
  // the w inputs are masked to zero and this is the plain hyper-decoder.
  DiscretizedGaussian prior_v(const Tensor& vh_hat, const Tensor& wh_hat, const Tensor& w_hat,
                              int64_t lh, int64_t lw) const;
  DiscretizedGaussian structured_prior_params(const Tensor& vh_hat, const Tensor& wh_hat,
                                              const Tensor& w_hat, int64_t lh, int64_t lw) const {
    return prior_v(vh_hat, wh_hat, w_hat, lh, lw);
  }
  const FactorizedPrior& hyper_prior_v() const { return fp_vh_; }

  Tensor decode_residual(const Tensor& v_hat, const Tensor& w_hat) const;  // g_v
  Tensor reconstruct(const Prediction& pred, const Tensor& residual) const;

  // ---- whole-frame paths ----
  struct PFrameForward {
    LatentBundle lat;
    Prediction pred;
    Tensor recon;
  };
  // noise != nullptr selects training-style quantization (uniform noise);
  // nullptr rounds. The v encoder always sees the prediction made from the
  // quantized w, mirroring what the decoder will compute.
  PFrameForward p_frame_forward(const Tensor& x, const Tensor& prev, RandomSource* noise) const;

  struct IFrameForward {
    Tensor y_mean, y_hat, yh_mean, yh_hat;
    Tensor recon;
  };
  IFrameForward i_frame_forward(const Tensor& x, RandomSource* noise) const;

  // ---- named reconstruction transforms ----
  Tensor tat_encode(const Tensor& x, const Tensor& prev) const;
  Tensor tat_decode(const Tensor& z_hat, const Tensor& prev) const;
  Tensor ssf_reconstruct(const Tensor& prev, const Tensor& w_hat, const Tensor& v_hat) const;
  Tensor stat_reconstruct(const Tensor& prev, const Tensor& w_hat, const Tensor& v_hat) const;
  LatentBundle encode_latents(const Tensor& x, const Tensor& prev, RandomSource* noise) const;

 private:
  Tensor masked_w_latent(const Tensor& w_hat, int64_t n, int64_t lh, int64_t lw) const;
  DiscretizedGaussian split_gaussian(const Tensor& raw, int64_t lh, int64_t lw) const;

  VariantConfig cfg_;
  ParamStore params_;

  ConvStack f_i_, g_i_, fh_i_, gh_i_;
  FactorizedPrior fp_ih_;

  ConvStack f_w_, g_w_, fh_w_, gh_w_;  // only when has_w()
  FactorizedPrior fp_wh_;
  ConvStack f_v_, g_v_, fh_v_;
  ConvStack gh_v_up_;   // hyper-decoder trunk for v
  ConvLayer gh_v_mix_;  // mixes trunk features with (masked) w_hat
  FactorizedPrior fp_vh_;
  ConvStack cnn_mu_, cnn_sigma_;  // variants that use learned shift/gate

  bool has_cnn_mu_ = false;
  bool has_cnn_sigma_ = false;
};

}  // namespace stavc
