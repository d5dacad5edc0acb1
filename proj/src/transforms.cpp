#include "stavc/transforms.hpp"

#include <cmath>

#include "json.hpp"

namespace stavc {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::TAT: return "tat";
    case Variant::SSF: return "ssf";
    case Variant::STAT: return "stat";
    case Variant::STAT_SSF: return "stat-ssf";
  }
  return "?";
}

Variant variant_from_name(const std::string& s) {
  if (s == "tat") return Variant::TAT;
  if (s == "ssf") return Variant::SSF;
  if (s == "stat") return Variant::STAT;
  if (s == "stat-ssf" || s == "stat_ssf") return Variant::STAT_SSF;
  throw UsageError("unknown variant: " + s);
}

void VariantConfig::validate() const {
  if (frame_channels < 1) throw UsageError("frame_channels must be >= 1");
  if (hidden < 1 || latent < 1 || hyper < 1 || cond_hidden < 1)
    throw UsageError("channel widths must be >= 1");
  if (sigma0 <= 0.0) throw UsageError("sigma0 must be > 0");
  if (scale_depth < 1) throw UsageError("scale_depth must be >= 1");
}

std::string VariantConfig::to_json() const {
  nlohmann::json j;
  j["variant"] = variant_name(variant);
  j["structured_prior"] = structured_prior;
  j["frame_channels"] = frame_channels;
  j["hidden"] = hidden;
  j["latent"] = latent;
  j["hyper"] = hyper;
  j["cond_hidden"] = cond_hidden;
  j["sigma0"] = sigma0;
  j["scale_depth"] = scale_depth;
  return j.dump();
}

VariantConfig VariantConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  VariantConfig c;
  c.variant = variant_from_name(j.at("variant").get<std::string>());
  c.structured_prior = j.at("structured_prior").get<bool>();
  c.frame_channels = j.at("frame_channels").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.latent = j.at("latent").get<int>();
  c.hyper = j.at("hyper").get<int>();
  c.cond_hidden = j.at("cond_hidden").get<int>();
  c.sigma0 = j.at("sigma0").get<double>();
  c.scale_depth = j.at("scale_depth").get<int>();
  c.validate();
  return c;
}

uint64_t VariantConfig::hash() const {
  std::string s = to_json();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

double gate_zero_offset() {
  static const double v = std::log(std::expm1(1.0 - kSigmaMin));
  return v;
}

double scale_zero_offset() {
  static const double v = std::log(std::expm1(1.0 - kMinCodeScale));
  return v;
}

Tensor maf_forward(const Tensor& y, const ScaleShift& ss) {
  for (double s : ss.sigma.values())
    if (!(s > 0.0)) throw NumericError("maf scale must be strictly positive");
  return ss.mu + mul(ss.sigma, y);
}

Tensor maf_inverse(const Tensor& x, const ScaleShift& ss) {
  for (double s : ss.sigma.values())
    if (!(s > 0.0)) throw NumericError("maf scale must be strictly positive");
  return div(x - ss.mu, ss.sigma);
}

// ---------------------------------------------------------------------------
// model construction
// ---------------------------------------------------------------------------

namespace {

constexpr int kK = 5;  // backbone kernel

ConvStack encoder4(ParamStore& ps, const std::string& name, int in_ch, int hidden, int out_ch,
                   RandomSource& rng) {
  ConvStack s;
  s.layers.push_back(make_conv(ps, name + ".c0", in_ch, hidden, kK, 2, rng));
  s.layers.push_back(make_conv(ps, name + ".c1", hidden, hidden, kK, 2, rng));
  s.layers.push_back(make_conv(ps, name + ".c2", hidden, hidden, kK, 2, rng));
  s.layers.push_back(make_conv(ps, name + ".c3", hidden, out_ch, kK, 2, rng));
  return s;
}

ConvStack decoder4(ParamStore& ps, const std::string& name, int in_ch, int hidden, int out_ch,
                   RandomSource& rng, bool zero_final) {
  ConvStack s;
  s.layers.push_back(make_deconv(ps, name + ".d0", in_ch, hidden, kK, 2, rng));
  s.layers.push_back(make_deconv(ps, name + ".d1", hidden, hidden, kK, 2, rng));
  s.layers.push_back(make_deconv(ps, name + ".d2", hidden, hidden, kK, 2, rng));
  s.layers.push_back(make_deconv(ps, name + ".d3", hidden, out_ch, kK, 2, rng, zero_final));
  return s;
}

ConvStack hyper_encoder(ParamStore& ps, const std::string& name, int in_ch, int hidden,
                        int out_ch, RandomSource& rng) {
  ConvStack s;
  s.layers.push_back(make_conv(ps, name + ".c0", in_ch, hidden, kK, 2, rng));
  s.layers.push_back(make_conv(ps, name + ".c1", hidden, out_ch, kK, 2, rng));
  return s;
}

ConvStack hyper_decoder(ParamStore& ps, const std::string& name, int in_ch, int hidden,
                        int out_ch, RandomSource& rng) {
  ConvStack s;
  s.layers.push_back(make_deconv(ps, name + ".d0", in_ch, hidden, kK, 2, rng));
  s.layers.push_back(make_deconv(ps, name + ".d1", hidden, out_ch, kK, 2, rng));
  return s;
}

// downsample-process-upsample CNN for the shift/gate heads
ConvStack cond_cnn(ParamStore& ps, const std::string& name, int in_ch, int hidden, int out_ch,
                   RandomSource& rng) {
  ConvStack s;
  s.layers.push_back(make_conv(ps, name + ".c0", in_ch, hidden, kK, 2, rng));
  s.layers.push_back(make_conv(ps, name + ".c1", hidden, hidden, 3, 1, rng));
  s.layers.push_back(make_deconv(ps, name + ".d0", hidden, out_ch, kK, 2, rng, true));
  return s;
}

}  // namespace

VideoModel::VideoModel(VariantConfig cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  RandomSource rng(seed ^ 0x9e3779b97f4a7c15ull);
  const int C = cfg_.frame_channels;
  const int h = cfg_.hidden;
  const int L = cfg_.latent;
  const int Hh = cfg_.hyper;

  // I-frame codec
  f_i_ = encoder4(params_, "iframe.enc", C, h, L, rng);
  g_i_ = decoder4(params_, "iframe.dec", L, h, C, rng, false);
  fh_i_ = hyper_encoder(params_, "iframe.henc", L, h, Hh, rng);
  gh_i_ = hyper_decoder(params_, "iframe.hdec", Hh, h, 2 * L, rng);
  fp_ih_ = FactorizedPrior::init(Hh);
  for (auto& [n, t] : fp_ih_.named_parameters()) params_.adopt(std::string("iframe.prior.") + n, t);

  // P-frame networks
  if (has_w()) {
    f_w_ = encoder4(params_, "w.enc", 2 * C, h, L, rng);
    g_w_ = decoder4(params_, "w.dec", L, h, 3, rng, true);
    // start as identity motion: zero flow, scale sigmoid(-6) ~ 0
    g_w_.layers.back().b.values() = {0.0, 0.0, -6.0};
    fh_w_ = hyper_encoder(params_, "w.henc", L, h, Hh, rng);
    gh_w_ = hyper_decoder(params_, "w.hdec", Hh, h, 2 * L, rng);
    FactorizedPrior fpw = FactorizedPrior::init(Hh);
    for (auto& [n, t] : fpw.named_parameters()) params_.adopt(std::string("w.prior.") + n, t);
    fp_wh_ = fpw;
  }

  f_v_ = encoder4(params_, "v.enc", C, h, L, rng);
  g_v_ = decoder4(params_, "v.dec", 2 * L, h, C, rng, true);
  fh_v_ = hyper_encoder(params_, "v.henc", L, h, Hh, rng);
  gh_v_up_ = hyper_decoder(params_, "v.hdec", 2 * Hh, h, h, rng);
  gh_v_mix_ = make_conv(params_, "v.hmix", h + L, 2 * L, 3, 1, rng);
  FactorizedPrior fpv = FactorizedPrior::init(Hh);
  for (auto& [n, t] : fpv.named_parameters()) params_.adopt(std::string("v.prior.") + n, t);
  fp_vh_ = fpv;

  has_cnn_mu_ = cfg_.variant == Variant::TAT || cfg_.variant == Variant::STAT;
  has_cnn_sigma_ = cfg_.variant != Variant::SSF;
  if (has_cnn_mu_) cnn_mu_ = cond_cnn(params_, "hmu", C + 3, cfg_.cond_hidden, C, rng);
  if (has_cnn_sigma_) cnn_sigma_ = cond_cnn(params_, "hsig", C + 3, cfg_.cond_hidden, C, rng);
}

int64_t VideoModel::latent_dim(int64_t d) {
  for (int i = 0; i < 4; ++i) d = (d - 1) / 2 + 1;
  return d;
}

int64_t VideoModel::hyper_dim(int64_t d) {
  d = latent_dim(d);
  for (int i = 0; i < 2; ++i) d = (d - 1) / 2 + 1;
  return d;
}

// ---------------------------------------------------------------------------
// shared heads
// ---------------------------------------------------------------------------

DiscretizedGaussian VideoModel::split_gaussian(const Tensor& raw, int64_t lh, int64_t lw) const {
  Tensor cropped = raw;
  if (raw.dim(2) != lh || raw.dim(3) != lw) cropped = narrow_hw(raw, 0, lh, 0, lw);
  int64_t L = cfg_.latent;
  DiscretizedGaussian g;
  g.mean = narrow_channels(cropped, 0, L);
  g.scale = softplus(narrow_channels(cropped, L, L) + scale_zero_offset()) + kMinCodeScale;
  return g;
}

Tensor VideoModel::masked_w_latent(const Tensor& w_hat, int64_t n, int64_t lh, int64_t lw) const {
  bool use_w = has_w() && cfg_.variant != Variant::SSF;
  if (!use_w || !w_hat.defined()) return Tensor::zeros({n, cfg_.latent, lh, lw});
  return w_hat;
}

// ---------------------------------------------------------------------------
// I-frame
// ---------------------------------------------------------------------------

Tensor VideoModel::iframe_encode(const Tensor& x) const { return f_i_.forward(x); }
Tensor VideoModel::iframe_decode(const Tensor& y_hat) const { return g_i_.forward(y_hat); }
Tensor VideoModel::iframe_hyper_encode(const Tensor& y_mean) const {
  return fh_i_.forward(y_mean);
}

DiscretizedGaussian VideoModel::iframe_prior(const Tensor& yh_hat, int64_t lh, int64_t lw) const {
  return split_gaussian(gh_i_.forward(yh_hat), lh, lw);
}

// ---------------------------------------------------------------------------
// P-frame
// ---------------------------------------------------------------------------

Tensor VideoModel::encode_w(const Tensor& x, const Tensor& prev) const {
  if (!has_w()) throw UsageError("variant has no w latent");
  return f_w_.forward(concat_channels({x, prev}));
}

Tensor VideoModel::hyper_encode_w(const Tensor& w_mean) const {
  if (!has_w()) throw UsageError("variant has no w latent");
  return fh_w_.forward(w_mean);
}

DiscretizedGaussian VideoModel::prior_w(const Tensor& wh_hat, int64_t lh, int64_t lw) const {
  if (!has_w()) throw UsageError("variant has no w latent");
  return split_gaussian(gh_w_.forward(wh_hat), lh, lw);
}

const FactorizedPrior& VideoModel::hyper_prior_w() const {
  if (!has_w()) throw UsageError("variant has no w latent");
  return fp_wh_;
}

Tensor VideoModel::decode_wfeat(const Tensor& w_hat) const {
  if (!has_w()) throw UsageError("variant has no w latent");
  return g_w_.forward(w_hat);
}

FlowField VideoModel::flow_from_wfeat(const Tensor& wfeat) const {
  int64_t n = wfeat.dim(0), H = wfeat.dim(2), W = wfeat.dim(3);
  FlowField f;
  f.dx = reshape(narrow_channels(wfeat, 0, 1), {n, H, W});
  f.dy = reshape(narrow_channels(wfeat, 1, 1), {n, H, W});
  f.scale = mul(sigmoid(reshape(narrow_channels(wfeat, 2, 1), {n, H, W})),
                static_cast<double>(cfg_.scale_depth));
  return f;
}

VideoModel::Prediction VideoModel::predict(const Tensor& prev, const Tensor& w_hat) const {
  Prediction p;
  int64_t n = prev.dim(0), H = prev.dim(2), W = prev.dim(3);
  bool warp_shift = cfg_.variant == Variant::SSF || cfg_.variant == Variant::STAT_SSF;
  if (has_w()) {
    if (!w_hat.defined()) throw UsageError("variant requires a w latent");
    p.wfeat = decode_wfeat(w_hat);
  } else {
    p.wfeat = Tensor::zeros({n, 3, H, W});
  }

  if (warp_shift) {
    ScaleSpaceVolume vol = build_scale_space_volume(prev, cfg_.sigma0, cfg_.scale_depth);
    p.mu = scale_space_warp(vol, flow_from_wfeat(p.wfeat));
  } else {
    p.mu = prev + cnn_mu_.forward(concat_channels({prev, p.wfeat}));
  }

  if (cfg_.variant == Variant::SSF) {
    p.sigma = Tensor::full({n, cfg_.frame_channels, H, W}, 1.0);
  } else {
    Tensor raw = cnn_sigma_.forward(concat_channels({prev, p.wfeat}));
    p.sigma = softplus(raw + gate_zero_offset()) + kSigmaMin;
  }
  return p;
}

Tensor VideoModel::encode_v(const Tensor& x, const Prediction& pred) const {
  Tensor gated = maf_inverse(x, ScaleShift{pred.mu, pred.sigma});
  return f_v_.forward(gated);
}

Tensor VideoModel::hyper_encode_v(const Tensor& v_mean) const { return fh_v_.forward(v_mean); }

DiscretizedGaussian VideoModel::prior_v(const Tensor& vh_hat, const Tensor& wh_hat,
                                        const Tensor& w_hat, int64_t lh, int64_t lw) const {
  int64_t n = vh_hat.dim(0);
  bool cond = cfg_.structured_prior && has_w();
  Tensor wh_in = (cond && wh_hat.defined())
                     ? wh_hat
                     : Tensor::zeros({n, cfg_.hyper, vh_hat.dim(2), vh_hat.dim(3)});
  Tensor w_in =
      (cond && w_hat.defined()) ? w_hat : Tensor::zeros({n, cfg_.latent, lh, lw});
  Tensor trunk = gh_v_up_.forward(concat_channels({vh_hat, wh_in}));
  if (trunk.dim(2) != lh || trunk.dim(3) != lw) trunk = narrow_hw(trunk, 0, lh, 0, lw);
  Tensor raw = gh_v_mix_.forward(leaky_relu(concat_channels({trunk, w_in}), 0.2));
  return split_gaussian(raw, lh, lw);
}

Tensor VideoModel::decode_residual(const Tensor& v_hat, const Tensor& w_hat) const {
  int64_t n = v_hat.dim(0), lh = v_hat.dim(2), lw = v_hat.dim(3);
  Tensor w_in = masked_w_latent(w_hat, n, lh, lw);
  return g_v_.forward(concat_channels({v_hat, w_in}));
}

Tensor VideoModel::reconstruct(const Prediction& pred, const Tensor& residual) const {
  return maf_forward(residual, ScaleShift{pred.mu, pred.sigma});
}

// ---------------------------------------------------------------------------
// whole-frame paths
// ---------------------------------------------------------------------------

VideoModel::PFrameForward VideoModel::p_frame_forward(const Tensor& x, const Tensor& prev,
                                                      RandomSource* noise) const {
  auto quantize = [&](const Tensor& t) {
    return noise ? quantize_train(t, *noise) : quantize_eval(t);
  };
  PFrameForward out;
  if (has_w()) {
    out.lat.w_mean = encode_w(x, prev);
    out.lat.w_hat = quantize(out.lat.w_mean);
    out.lat.w_hyper_mean = hyper_encode_w(out.lat.w_mean);
    out.lat.w_hyper_hat = quantize(out.lat.w_hyper_mean);
  }
  out.pred = predict(prev, out.lat.w_hat);
  out.lat.v_mean = encode_v(x, out.pred);
  out.lat.v_hat = quantize(out.lat.v_mean);
  out.lat.v_hyper_mean = hyper_encode_v(out.lat.v_mean);
  out.lat.v_hyper_hat = quantize(out.lat.v_hyper_mean);
  out.recon = reconstruct(out.pred, decode_residual(out.lat.v_hat, out.lat.w_hat));
  return out;
}

VideoModel::IFrameForward VideoModel::i_frame_forward(const Tensor& x, RandomSource* noise) const {
  auto quantize = [&](const Tensor& t) {
    return noise ? quantize_train(t, *noise) : quantize_eval(t);
  };
  IFrameForward out;
  out.y_mean = iframe_encode(x);
  out.y_hat = quantize(out.y_mean);
  out.yh_mean = iframe_hyper_encode(out.y_mean);
  out.yh_hat = quantize(out.yh_mean);
  out.recon = iframe_decode(out.y_hat);
  return out;
}

// ---------------------------------------------------------------------------
// variant-specific transform entry points
// ---------------------------------------------------------------------------

Tensor VideoModel::tat_encode(const Tensor& x, const Tensor& prev) const {
  if (cfg_.variant != Variant::TAT) throw UsageError("tat_encode requires the TAT variant");
  return encode_v(x, predict(prev, Tensor()));
}

Tensor VideoModel::tat_decode(const Tensor& z_hat, const Tensor& prev) const {
  if (cfg_.variant != Variant::TAT) throw UsageError("tat_decode requires the TAT variant");
  Prediction p = predict(prev, Tensor());
  return reconstruct(p, decode_residual(z_hat, Tensor()));
}

Tensor VideoModel::ssf_reconstruct(const Tensor& prev, const Tensor& w_hat,
                                   const Tensor& v_hat) const {
  if (cfg_.variant != Variant::SSF) throw UsageError("ssf_reconstruct requires the SSF variant");
  Prediction p = predict(prev, w_hat);
  return reconstruct(p, decode_residual(v_hat, w_hat));
}

Tensor VideoModel::stat_reconstruct(const Tensor& prev, const Tensor& w_hat,
                                    const Tensor& v_hat) const {
  if (cfg_.variant != Variant::STAT && cfg_.variant != Variant::STAT_SSF)
    throw UsageError("stat_reconstruct requires a STAT variant");
  Prediction p = predict(prev, w_hat);
  return reconstruct(p, decode_residual(v_hat, w_hat));
}

LatentBundle VideoModel::encode_latents(const Tensor& x, const Tensor& prev,
                                        RandomSource* noise) const {
  return p_frame_forward(x, prev, noise).lat;
}

}  // namespace stavc
