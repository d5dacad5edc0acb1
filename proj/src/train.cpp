#include "stavc/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "stavc/checkpoint.hpp"
#include "stavc/image_io.hpp"

namespace stavc {

void TrainConfig::validate() const {
  model.validate();
  if (beta <= 0.0) throw UsageError("beta must be > 0");
  if (steps < 1) throw UsageError("steps must be >= 1");
  if (frames_per_clip < 2) throw UsageError("clips must have at least 2 frames");
  if (batch < 1) throw UsageError("batch must be >= 1");
  if (crop % 16 != 0 || crop_final % 16 != 0)
    throw UsageError("crop sizes must be divisible by 16 (the stride product)");
  if (final_frac < 0.0 || final_frac > 1.0) throw UsageError("final_frac must be in [0,1]");
  if (lr_initial <= 0.0 || lr_decayed <= 0.0) throw UsageError("learning rates must be > 0");
}

int64_t TrainConfig::effective_decay_step() const {
  return decay_step >= 0 ? decay_step : static_cast<int64_t>(0.85 * static_cast<double>(steps));
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["beta"] = beta;
  j["steps"] = steps;
  j["lr_initial"] = lr_initial;
  j["lr_decayed"] = lr_decayed;
  j["decay_step"] = decay_step;
  j["crop"] = crop;
  j["crop_final"] = crop_final;
  j["final_frac"] = final_frac;
  j["frames_per_clip"] = frames_per_clip;
  j["batch"] = batch;
  j["seed"] = seed;
  j["log_every"] = log_every;
  j["snapshot_every"] = snapshot_every;
  j["model"] = nlohmann::json::parse(model.to_json());
  nlohmann::json s;
  s["width"] = source.width;
  s["height"] = source.height;
  s["channels"] = source.channels;
  s["sprite_count"] = source.sprite_count;
  s["velocity_max"] = source.velocity_max;
  s["texture"] = static_cast<int>(source.texture);
  s["blur_event_prob"] = source.blur_event_prob;
  s["occlusion_prob"] = source.occlusion_prob;
  s["seed"] = source.seed;
  j["source"] = s;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad train config JSON: ") + e.what());
  }
  TrainConfig c;
  auto get = [&](const char* k, auto def) {
    using T = decltype(def);
    return j.contains(k) ? j.at(k).get<T>() : def;
  };
  c.beta = get("beta", c.beta);
  c.steps = get("steps", c.steps);
  c.lr_initial = get("lr_initial", c.lr_initial);
  c.lr_decayed = get("lr_decayed", c.lr_decayed);
  c.decay_step = get("decay_step", c.decay_step);
  c.crop = get("crop", c.crop);
  c.crop_final = get("crop_final", c.crop_final);
  c.final_frac = get("final_frac", c.final_frac);
  c.frames_per_clip = get("frames_per_clip", c.frames_per_clip);
  c.batch = get("batch", c.batch);
  c.seed = get("seed", c.seed);
  c.log_every = get("log_every", c.log_every);
  c.snapshot_every = get("snapshot_every", c.snapshot_every);
  if (j.contains("model")) c.model = VariantConfig::from_json(j.at("model").dump());
  if (j.contains("source")) {
    const auto& s = j.at("source");
    auto gs = [&](const char* k, auto def) {
      using T = decltype(def);
      return s.contains(k) ? s.at(k).get<T>() : def;
    };
    c.source.width = gs("width", c.source.width);
    c.source.height = gs("height", c.source.height);
    c.source.channels = gs("channels", c.source.channels);
    c.source.sprite_count = gs("sprite_count", c.source.sprite_count);
    c.source.velocity_max = gs("velocity_max", c.source.velocity_max);
    c.source.texture = static_cast<SyntheticSource::Texture>(gs("texture", 0));
    c.source.blur_event_prob = gs("blur_event_prob", c.source.blur_event_prob);
    c.source.occlusion_prob = gs("occlusion_prob", c.source.occlusion_prob);
    c.source.seed = gs("seed", c.source.seed);
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

RdParts rd_loss(const VideoModel& model, const std::vector<Tensor>& clip_frames, double beta,
                RandomSource& noise) {
  if (clip_frames.size() < 2) throw UsageError("rd_loss needs a clip of at least 2 frames");
  const Shape& s = clip_frames[0].shape();
  if (s.size() != 4) throw UsageError("rd_loss frames must be [B,C,H,W]");
  int64_t B = s[0], C = s[1], H = s[2], W = s[3];
  int64_t T = static_cast<int64_t>(clip_frames.size());

  Tensor dist_sum;   // sum of squared errors over all frames
  Tensor bits_sum;   // total estimated bits
  int64_t lh = VideoModel::latent_dim(H), lw = VideoModel::latent_dim(W);

  auto add_to = [](Tensor& acc, const Tensor& t) { acc = acc.defined() ? acc + t : t; };

  {
    const Tensor& x0 = clip_frames[0];
    auto fwd = model.i_frame_forward(x0, &noise);
    add_to(dist_sum, sum(square(fwd.recon - x0)));
    add_to(bits_sum, sum(model.iframe_hyper_prior().bits(fwd.yh_hat)));
    DiscretizedGaussian prior = model.iframe_prior(fwd.yh_hat, lh, lw);
    add_to(bits_sum, sum(bits(prior, fwd.y_hat)));
    Tensor prev = fwd.recon;
    for (int64_t t = 1; t < T; ++t) {
      const Tensor& x = clip_frames[static_cast<size_t>(t)];
      auto p = model.p_frame_forward(x, prev, &noise);
      add_to(dist_sum, sum(square(p.recon - x)));
      if (model.has_w()) {
        add_to(bits_sum, sum(model.hyper_prior_w().bits(p.lat.w_hyper_hat)));
        DiscretizedGaussian pw = model.prior_w(p.lat.w_hyper_hat, lh, lw);
        add_to(bits_sum, sum(bits(pw, p.lat.w_hat)));
      }
      add_to(bits_sum, sum(model.hyper_prior_v().bits(p.lat.v_hyper_hat)));
      DiscretizedGaussian pv =
          model.prior_v(p.lat.v_hyper_hat, p.lat.w_hyper_hat, p.lat.w_hat, lh, lw);
      add_to(bits_sum, sum(bits(pv, p.lat.v_hat)));
      prev = p.recon;
    }
  }

  double inv_elems = 1.0 / static_cast<double>(B * T * C * H * W);
  double inv_pixels = 1.0 / static_cast<double>(B * T * H * W);
  Tensor d = mul(dist_sum, inv_elems);
  Tensor r = mul(bits_sum, inv_pixels);
  RdParts parts;
  parts.loss = d + mul(r, beta);
  parts.distortion = d.item();
  parts.rate_bpp = r.item();
  return parts;
}

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

void adam_init(AdamState& st, const ParamStore& params) {
  st.m.clear();
  st.v.clear();
  st.step = 0;
  for (const auto& p : params.items()) {
    st.m.emplace_back(p.tensor.numel(), 0.0);
    st.v.emplace_back(p.tensor.numel(), 0.0);
  }
}

void adam_step(ParamStore& params, AdamState& st, double lr) {
  auto& items = params.items();
  if (st.m.size() != items.size()) throw UsageError("adam state does not match parameters");
  st.step += 1;
  double b1t = 1.0 - std::pow(kAdamBeta1, static_cast<double>(st.step));
  double b2t = 1.0 - std::pow(kAdamBeta2, static_cast<double>(st.step));
  for (size_t i = 0; i < items.size(); ++i) {
    Tensor& t = items[i].tensor;
    auto& val = t.values();
    auto& m = st.m[i];
    auto& v = st.v[i];
    const double* g = t.has_grad() ? t.grad().data() : nullptr;
    for (size_t e = 0; e < val.size(); ++e) {
      double ge = g ? g[e] : 0.0;
      m[e] = kAdamBeta1 * m[e] + (1.0 - kAdamBeta1) * ge;
      v[e] = kAdamBeta2 * v[e] + (1.0 - kAdamBeta2) * ge * ge;
      double mh = m[e] / b1t;
      double vh = v[e] / b2t;
      val[e] -= lr * mh / (std::sqrt(vh) + kAdamEps);
    }
  }
}

// ---------------------------------------------------------------------------
// loop
// ---------------------------------------------------------------------------

namespace {

std::vector<Tensor> make_batch(const TrainConfig& cfg, int64_t step, int crop) {
  SyntheticSource src = cfg.source;
  src.width = crop;
  src.height = crop;
  std::vector<std::vector<Tensor>> clips;
  for (int b = 0; b < cfg.batch; ++b) {
    uint64_t salt = static_cast<uint64_t>(step) * 1000003ull + static_cast<uint64_t>(b) + 1;
    clips.push_back(generate_clip(src, cfg.frames_per_clip, salt).frames);
  }
  std::vector<Tensor> time_major;
  for (int t = 0; t < cfg.frames_per_clip; ++t) {
    std::vector<Tensor> at_t;
    for (int b = 0; b < cfg.batch; ++b) at_t.push_back(clips[b][static_cast<size_t>(t)]);
    time_major.push_back(stack_batch(at_t));
  }
  return time_major;
}

}  // namespace

namespace {

// writes the batch frames below /tmp for post-mortem inspection
std::string dump_batch(const std::vector<Tensor>& batch, int64_t step) {
  std::string dir = "/tmp/stavc_diagnostic_step" + std::to_string(step);
  try {
    Clip flat;
    for (const auto& frames_t : batch) {
      for (int64_t b = 0; b < frames_t.dim(0); ++b) {
        NoGradGuard ng;
        flat.push_back(select_batch(frames_t, b));
      }
    }
    save_frames_ppm(dir, flat, "batch");
  } catch (...) {
    return "(dump failed)";
  }
  return dir;
}

}  // namespace

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "step,loss,D,R,lr\n";
  char line[160];
  for (const auto& c : curve) {
    std::snprintf(line, sizeof(line), "%lld,%.10g,%.10g,%.10g,%.10g\n",
                  static_cast<long long>(c.step), c.loss, c.distortion, c.rate_bpp, c.lr);
    out += line;
  }
  return out;
}

TrainResult train(VideoModel& model, const TrainConfig& cfg, const std::string& curve_csv_path,
                  const std::string& snapshot_prefix) {
  cfg.validate();
  if (model.config().hash() != cfg.model.hash())
    throw UsageError("model does not match the training configuration");

  AdamState st;
  adam_init(st, model.params());
  TrainResult result;
  int64_t final_from =
      cfg.steps - static_cast<int64_t>(cfg.final_frac * static_cast<double>(cfg.steps));

  for (int64_t step = 0; step < cfg.steps; ++step) {
    int crop = step >= final_from ? cfg.crop_final : cfg.crop;
    std::vector<Tensor> batch = make_batch(cfg, step, crop);
    RandomSource noise(cfg.seed ^ (0xabcf00d5ull + static_cast<uint64_t>(step) * 7919ull));
    RdParts parts;
    try {
      parts = rd_loss(model, batch, cfg.beta, noise);
    } catch (const NumericError& e) {
      std::string dir = dump_batch(batch, step);
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(step) +
                         "; offending batch dumped to " + dir);
    }
    double loss_val = parts.loss.item();
    if (!std::isfinite(loss_val)) {
      std::string dir = dump_batch(batch, step);
      throw NumericError("training loss went non-finite at step " + std::to_string(step) +
                         " (D=" + std::to_string(parts.distortion) +
                         ", R=" + std::to_string(parts.rate_bpp) + "); offending batch dumped to " +
                         dir);
    }
    parts.loss.backward();
    double lr = step < cfg.effective_decay_step() ? cfg.lr_initial : cfg.lr_decayed;
    adam_step(model.params(), st, lr);

    if (step == 0) result.initial_loss = loss_val;
    result.final_loss = loss_val;
    if (step % cfg.log_every == 0 || step + 1 == cfg.steps)
      result.curve.push_back({step, loss_val, parts.distortion, parts.rate_bpp, lr});

    if (cfg.snapshot_every > 0 && !snapshot_prefix.empty() && step > 0 &&
        step % cfg.snapshot_every == 0) {
      CheckpointMeta meta;
      meta.config = cfg.model;
      meta.beta = cfg.beta;
      meta.seed = cfg.seed;
      meta.train_steps = step;
      save_checkpoint(snapshot_prefix + "_step" + std::to_string(step) + ".ckpt", model, meta);
    }
  }

  if (!curve_csv_path.empty()) {
    std::ofstream out(curve_csv_path, std::ios::trunc);
    if (!out) throw DataError("cannot write loss curve: " + curve_csv_path);
    out << curve_to_csv(result.curve);
  }
  return result;
}

}  // namespace stavc
