#include "stavc/codec.hpp"

#include <cmath>
#include <fstream>

#include "stavc/range_coder.hpp"

namespace stavc {

namespace {

int64_t ceil16(int64_t v) { return (v + 15) / 16 * 16; }

struct SymbolRange {
  int64_t lo, hi;
};

SymbolRange tensor_range(const Tensor& hat) {
  double mn = 0.0, mx = 0.0;
  bool first = true;
  for (double v : hat.values()) {
    if (first) {
      mn = mx = v;
      first = false;
    } else {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
  }
  SymbolRange r;
  r.lo = static_cast<int64_t>(std::llround(mn)) - 1;
  r.hi = static_cast<int64_t>(std::llround(mx)) + 1;
  return r;
}

int64_t to_symbol(double v) { return static_cast<int64_t>(std::llround(v)); }

// Sub-chunk layout: i32 lo, i32 hi, u32 nbytes, payload.
void write_subchunk(ByteWriter& w, const SymbolRange& r, const std::vector<uint8_t>& payload) {
  w.i32(static_cast<int32_t>(r.lo));
  w.i32(static_cast<int32_t>(r.hi));
  w.u32(static_cast<uint32_t>(payload.size()));
  w.bytes(payload.data(), payload.size());
}

double encode_factorized_tensor(ByteWriter& w, const Tensor& hat, const FactorizedPrior& prior,
                                int64_t* payload_bytes) {
  SymbolRange r = tensor_range(hat);
  int64_t C = hat.dim(1), plane = hat.dim(2) * hat.dim(3);
  std::vector<FreqTable> tables;
  tables.reserve(static_cast<size_t>(C));
  for (int64_t c = 0; c < C; ++c)
    tables.push_back(quantize_pmf(factorized_pmf_folded(prior, c, r.lo, r.hi), r.lo));
  RangeEncoder enc;
  const auto& v = hat.values();
  for (int64_t c = 0; c < C; ++c)
    for (int64_t e = 0; e < plane; ++e) {
      try {
        enc.encode_symbol(to_symbol(v[c * plane + e]), tables[c]);
      } catch (const CodecError& ex) {
        throw CodecError(std::string(ex.what()) + " at channel " + std::to_string(c) +
                         " element " + std::to_string(e) + " of shape " + shape_str(hat.shape()));
      }
    }
  std::vector<uint8_t> payload = enc.finish();
  if (payload_bytes) *payload_bytes += static_cast<int64_t>(payload.size());
  write_subchunk(w, r, payload);
  return sum(prior.bits(hat)).item();
}

Tensor decode_factorized_tensor(ByteReader& rd, const FactorizedPrior& prior, Shape shape) {
  int64_t lo = rd.i32();
  int64_t hi = rd.i32();
  if (hi < lo) throw CodecError("bad symbol range in sub-chunk");
  uint32_t n = rd.u32();
  std::vector<uint8_t> payload = rd.blob(n);
  int64_t C = shape[1], plane = shape[2] * shape[3];
  std::vector<FreqTable> tables;
  tables.reserve(static_cast<size_t>(C));
  for (int64_t c = 0; c < C; ++c)
    tables.push_back(quantize_pmf(factorized_pmf_folded(prior, c, lo, hi), lo));
  RangeDecoder dec(payload.data(), payload.size());
  std::vector<double> out(static_cast<size_t>(shape_numel(shape)));
  for (int64_t c = 0; c < C; ++c)
    for (int64_t e = 0; e < plane; ++e)
      out[c * plane + e] = static_cast<double>(dec.decode_symbol(tables[c]));
  dec.check_not_truncated();
  return Tensor::from_data(std::move(shape), std::move(out));
}

double encode_gaussian_tensor(ByteWriter& w, const Tensor& hat, const DiscretizedGaussian& prior,
                              int64_t* payload_bytes) {
  SymbolRange r = tensor_range(hat);
  RangeEncoder enc;
  const auto& v = hat.values();
  const auto& mu = prior.mean.values();
  const auto& sc = prior.scale.values();
  if (mu.size() != v.size() || sc.size() != v.size())
    throw CodecError("prior shape mismatch while coding");
  for (size_t i = 0; i < v.size(); ++i) {
    FreqTable t = quantize_pmf(gaussian_pmf_folded(mu[i], sc[i], r.lo, r.hi), r.lo);
    try {
      enc.encode_symbol(to_symbol(v[i]), t);
    } catch (const CodecError& e) {
      throw CodecError(std::string(e.what()) + " at tensor element " + std::to_string(i) +
                       " of shape " + shape_str(hat.shape()));
    }
  }
  std::vector<uint8_t> payload = enc.finish();
  if (payload_bytes) *payload_bytes += static_cast<int64_t>(payload.size());
  write_subchunk(w, r, payload);
  return sum(bits(prior, hat)).item();
}

Tensor decode_gaussian_tensor(ByteReader& rd, const DiscretizedGaussian& prior, Shape shape) {
  int64_t lo = rd.i32();
  int64_t hi = rd.i32();
  if (hi < lo) throw CodecError("bad symbol range in sub-chunk");
  uint32_t n = rd.u32();
  std::vector<uint8_t> payload = rd.blob(n);
  const auto& mu = prior.mean.values();
  const auto& sc = prior.scale.values();
  int64_t count = shape_numel(shape);
  if (static_cast<int64_t>(mu.size()) != count) throw CodecError("prior shape mismatch while decoding");
  RangeDecoder dec(payload.data(), payload.size());
  std::vector<double> out(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    FreqTable t = quantize_pmf(gaussian_pmf_folded(mu[i], sc[i], lo, hi), lo);
    out[i] = static_cast<double>(dec.decode_symbol(t));
  }
  dec.check_not_truncated();
  return Tensor::from_data(std::move(shape), std::move(out));
}

Tensor crop_frame(const Tensor& padded4, int64_t C, int64_t H, int64_t W) {
  Tensor c = padded4;
  if (padded4.dim(2) != H || padded4.dim(3) != W) c = narrow_hw(padded4, 0, H, 0, W);
  return reshape(c, {C, H, W});
}

}  // namespace

Tensor pad_frame_to16(const Tensor& frame) {
  const Shape& s = frame.shape();
  if (s.size() != 3) throw UsageError("frames must be [C,H,W]");
  int64_t C = s[0], H = s[1], W = s[2];
  int64_t Hp = ceil16(H), Wp = ceil16(W);
  if (Hp == H && Wp == W) return frame.detach();
  std::vector<double> out(static_cast<size_t>(C * Hp * Wp));
  const auto& v = frame.values();
  for (int64_t c = 0; c < C; ++c)
    for (int64_t i = 0; i < Hp; ++i) {
      int64_t si = std::min(i, H - 1);
      for (int64_t j = 0; j < Wp; ++j) {
        int64_t sj = std::min(j, W - 1);
        out[(c * Hp + i) * Wp + j] = v[(c * H + si) * W + sj];
      }
    }
  return Tensor::from_data({C, Hp, Wp}, std::move(out));
}

FrameCode encode_frame(const VideoModel& model, const Tensor& x, const Tensor* prev_recon) {
  NoGradGuard ng;
  const VariantConfig& cfg = model.config();
  if (x.ndim() != 3 || x.dim(0) != cfg.frame_channels)
    throw UsageError("frame shape does not match model configuration");
  int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  Tensor xp = pad_frame_to16(x);
  int64_t Hp = xp.dim(1), Wp = xp.dim(2);
  Tensor x4 = reshape(xp, {1, C, Hp, Wp});
  int64_t lh = VideoModel::latent_dim(Hp), lw = VideoModel::latent_dim(Wp);

  FrameCode fc;
  ByteWriter w;
  int64_t payload_bytes = 0;
  if (prev_recon == nullptr) {
    auto fwd = model.i_frame_forward(x4, nullptr);
    w.u8(0);
    fc.est_bits += encode_factorized_tensor(w, fwd.yh_hat, model.iframe_hyper_prior(),
                                            &payload_bytes);
    DiscretizedGaussian prior = model.iframe_prior(fwd.yh_hat, lh, lw);
    fc.est_bits += encode_gaussian_tensor(w, fwd.y_hat, prior, &payload_bytes);
    fc.recon = crop_frame(fwd.recon, C, H, W);
  } else {
    if (prev_recon->shape() != x.shape())
      throw UsageError("previous reconstruction shape mismatch");
    Tensor p4 = reshape(pad_frame_to16(*prev_recon), {1, C, Hp, Wp});
    auto fwd = model.p_frame_forward(x4, p4, nullptr);
    w.u8(1);
    if (model.has_w()) {
      fc.est_bits += encode_factorized_tensor(w, fwd.lat.w_hyper_hat, model.hyper_prior_w(),
                                              &payload_bytes);
      DiscretizedGaussian pw = model.prior_w(fwd.lat.w_hyper_hat, lh, lw);
      fc.est_bits += encode_gaussian_tensor(w, fwd.lat.w_hat, pw, &payload_bytes);
    }
    fc.est_bits += encode_factorized_tensor(w, fwd.lat.v_hyper_hat, model.hyper_prior_v(),
                                            &payload_bytes);
    DiscretizedGaussian pv =
        model.prior_v(fwd.lat.v_hyper_hat, fwd.lat.w_hyper_hat, fwd.lat.w_hat, lh, lw);
    fc.est_bits += encode_gaussian_tensor(w, fwd.lat.v_hat, pv, &payload_bytes);
    fc.recon = crop_frame(fwd.recon, C, H, W);
  }
  fc.payload_bits = payload_bytes * 8;
  fc.chunk = w.take();
  return fc;
}

namespace {

Tensor decode_frame_dims(const VideoModel& model, const std::vector<uint8_t>& chunk,
                         const Tensor* prev_recon, int64_t C, int64_t H, int64_t W) {
  NoGradGuard ng;
  int64_t Hp = ceil16(H), Wp = ceil16(W);
  int64_t lh = VideoModel::latent_dim(Hp), lw = VideoModel::latent_dim(Wp);
  int64_t hh = VideoModel::hyper_dim(Hp), hw = VideoModel::hyper_dim(Wp);
  const VariantConfig& cfg = model.config();

  ByteReader r(chunk.data(), chunk.size());
  uint8_t kind = r.u8();
  if (kind == 0) {
    if (prev_recon != nullptr) throw CodecError("I-frame chunk but a previous frame was supplied");
    Tensor yh = decode_factorized_tensor(r, model.iframe_hyper_prior(), {1, cfg.hyper, hh, hw});
    DiscretizedGaussian prior = model.iframe_prior(yh, lh, lw);
    Tensor y = decode_gaussian_tensor(r, prior, {1, cfg.latent, lh, lw});
    Tensor recon = model.iframe_decode(y);
    if (r.remaining() != 0) throw CodecError("trailing bytes in I-frame chunk");
    return crop_frame(recon, C, H, W);
  }
  if (kind != 1) throw CodecError("unknown chunk kind");
  if (prev_recon == nullptr) throw CodecError("P-frame chunk without a previous reconstruction");
  Tensor p4 = reshape(pad_frame_to16(*prev_recon), {1, C, Hp, Wp});

  Tensor wh, w_hat;
  if (model.has_w()) {
    wh = decode_factorized_tensor(r, model.hyper_prior_w(), {1, cfg.hyper, hh, hw});
    DiscretizedGaussian pw = model.prior_w(wh, lh, lw);
    w_hat = decode_gaussian_tensor(r, pw, {1, cfg.latent, lh, lw});
  }
  Tensor vh = decode_factorized_tensor(r, model.hyper_prior_v(), {1, cfg.hyper, hh, hw});
  DiscretizedGaussian pv = model.prior_v(vh, wh, w_hat, lh, lw);
  Tensor v_hat = decode_gaussian_tensor(r, pv, {1, cfg.latent, lh, lw});
  if (r.remaining() != 0) throw CodecError("trailing bytes in P-frame chunk");

  auto pred = model.predict(p4, w_hat);
  Tensor recon = model.reconstruct(pred, model.decode_residual(v_hat, w_hat));
  return crop_frame(recon, C, H, W);
}

}  // namespace

Tensor decode_frame(const VideoModel& model, const std::vector<uint8_t>& chunk,
                    const Tensor* prev_recon, int64_t height, int64_t width) {
  int64_t C = model.config().frame_channels;
  if (prev_recon != nullptr) {
    height = prev_recon->dim(1);
    width = prev_recon->dim(2);
  } else if (height < 1 || width < 1) {
    throw UsageError("decode_frame of an I-frame needs explicit frame dimensions");
  }
  return decode_frame_dims(model, chunk, prev_recon, C, height, width);
}

VideoEncode encode_video(const VideoModel& model, const std::vector<Tensor>& clip,
                         double beta_id) {
  if (clip.empty()) throw UsageError("cannot encode an empty clip");
  const VariantConfig& cfg = model.config();
  int64_t H = clip[0].dim(1), W = clip[0].dim(2);
  for (const auto& f : clip)
    if (f.shape() != clip[0].shape()) throw UsageError("clip frames disagree on shape");

  VideoEncode out;
  out.stream.header.variant = cfg.variant;
  out.stream.header.structured_prior = cfg.structured_prior;
  out.stream.header.frame_channels = static_cast<uint8_t>(cfg.frame_channels);
  out.stream.header.width = static_cast<uint32_t>(W);
  out.stream.header.height = static_cast<uint32_t>(H);
  out.stream.header.frame_count = static_cast<uint32_t>(clip.size());
  out.stream.header.config_hash = cfg.hash();
  out.stream.header.beta = beta_id;

  Tensor prev;
  for (size_t t = 0; t < clip.size(); ++t) {
    FrameCode fc = encode_frame(model, clip[t], t == 0 ? nullptr : &prev);
    out.stream.chunks.push_back(std::move(fc.chunk));
    out.frame_est_bits.push_back(fc.est_bits);
    out.frame_payload_bits.push_back(fc.payload_bits);
    out.est_bits += fc.est_bits;
    prev = fc.recon;
    out.recons.push_back(std::move(fc.recon));
  }
  return out;
}

std::vector<Tensor> decode_video(const VideoModel& model, const Bitstream& stream) {
  const VariantConfig& cfg = model.config();
  if (stream.header.variant != cfg.variant ||
      stream.header.structured_prior != cfg.structured_prior)
    throw UsageError("bitstream variant does not match the checkpoint");
  if (stream.header.config_hash != cfg.hash())
    throw UsageError("bitstream was produced with a different model configuration");
  if (stream.header.frame_channels != cfg.frame_channels)
    throw UsageError("bitstream channel count does not match the checkpoint");

  int64_t C = cfg.frame_channels;
  int64_t H = stream.header.height, W = stream.header.width;
  std::vector<Tensor> frames;
  frames.reserve(stream.chunks.size());
  Tensor prev;
  for (size_t t = 0; t < stream.chunks.size(); ++t) {
    Tensor f = decode_frame_dims(model, stream.chunks[t], t == 0 ? nullptr : &prev, C, H, W);
    prev = f;
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<uint8_t> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
}

void write_binary_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace stavc
