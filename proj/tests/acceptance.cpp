// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Run through ctest or directly; --only N restricts to one
// criterion for debugging.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stavc/checkpoint.hpp"
#include "stavc/codec.hpp"
#include "stavc/metrics.hpp"
#include "stavc/scale_space.hpp"
#include "stavc/train.hpp"

using namespace stavc;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Tensor rand_t(Shape s, RandomSource& rng, double lo, double hi, bool rg = true) {
  return Tensor::rand_uniform(std::move(s), rng, lo, hi, rg);
}

Tensor rgb_frame_from(const std::vector<double>& gray, int64_t H, int64_t W) {
  std::vector<double> rgb;
  for (int c = 0; c < 3; ++c) rgb.insert(rgb.end(), gray.begin(), gray.end());
  return Tensor::from_data({3, H, W}, std::move(rgb));
}

std::vector<Tensor> eval_clip(uint64_t seed, int frames, int hw) {
  SyntheticSource src;
  src.width = src.height = hw;
  src.seed = seed;
  return generate_clip(src, frames).frames;
}

// ---------------------------------------------------------------------------
// criterion 1: gradient integrity
// ---------------------------------------------------------------------------

bool criterion1(std::string& detail) {
  RandomSource rng(1001);
  double worst_op = 0.0;
  auto check = [&](const char* name, double err, double tol) {
    worst_op = std::max(worst_op, err / tol);
    if (err >= tol) detail += std::string(name) + " rel err " + std::to_string(err) + "; ";
    return err < tol;
  };

  bool ok = true;
  {  // elementwise ops
    auto unary = [&](const char* name, auto op, double lo, double hi) {
      Tensor x = rand_t({2, 3, 5}, rng, lo, hi);
      ok = check(name, oracles::grad_max_rel_err(x, [&] { return sum(op(x)); }), 1e-4) && ok;
    };
    unary("exp", [](const Tensor& t) { return stavc::exp(t); }, -1, 1);
    unary("log", [](const Tensor& t) { return stavc::log(t); }, 0.5, 2);
    unary("tanh", [](const Tensor& t) { return stavc::tanh(t); }, -2, 2);
    unary("softplus", [](const Tensor& t) { return softplus(t); }, -3, 3);
    unary("sigmoid", [](const Tensor& t) { return sigmoid(t); }, -3, 3);
    unary("relu", [](const Tensor& t) { return relu(t); }, 0.2, 2);
    unary("leaky_relu", [](const Tensor& t) { return leaky_relu(t); }, -2, -0.2);
    unary("normal_cdf", [](const Tensor& t) { return normal_cdf(t); }, -2, 2);

    Tensor a = rand_t({3, 4}, rng, -1, 1);
    Tensor b = rand_t({3, 4}, rng, 0.5, 2);
    ok = check("add", oracles::grad_max_rel_err(a, [&] { return sum(add(a, b)); }), 1e-4) && ok;
    ok = check("sub", oracles::grad_max_rel_err(b, [&] { return sum(sub(a, b)); }), 1e-4) && ok;
    ok = check("mul", oracles::grad_max_rel_err(a, [&] { return sum(mul(a, b)); }), 1e-4) && ok;
    ok = check("div", oracles::grad_max_rel_err(b, [&] { return sum(div(a, b)); }), 1e-4) && ok;
  }
  {  // convolutions
    Tensor x = rand_t({2, 3, 6, 6}, rng, -1, 1);
    Tensor w = rand_t({4, 3, 3, 3}, rng, -0.5, 0.5);
    Tensor b = rand_t({4}, rng, -0.1, 0.1);
    auto loss = [&] { return sum(square(conv2d(x, w, b, 2, 1))); };
    ok = check("conv2d/x", oracles::grad_max_rel_err(x, loss), 1e-4) && ok;
    ok = check("conv2d/w", oracles::grad_max_rel_err(w, loss), 1e-4) && ok;
    ok = check("conv2d/b", oracles::grad_max_rel_err(b, loss), 1e-4) && ok;

    Tensor xt = rand_t({2, 3, 4, 4}, rng, -1, 1);
    Tensor wt = rand_t({3, 2, 5, 5}, rng, -0.4, 0.4);
    Tensor bt = rand_t({2}, rng, -0.1, 0.1);
    auto loss_t = [&] { return sum(square(conv2d_transpose(xt, wt, bt, 2, 2))); };
    ok = check("conv2d_transpose/x", oracles::grad_max_rel_err(xt, loss_t), 1e-4) && ok;
    ok = check("conv2d_transpose/w", oracles::grad_max_rel_err(wt, loss_t), 1e-4) && ok;
  }
  {  // resampling, blur, warp
    Tensor r = rand_t({1, 2, 6, 6}, rng, 0, 1);
    ok = check("avg_pool2x", oracles::grad_max_rel_err(r, [&] { return sum(square(avg_pool2x(r))); }),
               1e-4) && ok;
    ok = check("upsample2x",
               oracles::grad_max_rel_err(r, [&] { return sum(square(upsample_bilinear2x(r))); }),
               1e-4) && ok;
    GaussianKernel k = create_gaussian_kernel(1.0);
    ok = check("gaussian_blur",
               oracles::grad_max_rel_err(r, [&] { return sum(square(gaussian_blur(r, k))); }),
               1e-4) && ok;

    Tensor img = rand_t({2, 8, 8}, rng, 0, 1);
    FlowField f;
    auto off_knot = [&](Shape s) {
      Tensor t = Tensor::zeros(std::move(s), true);
      for (auto& v : t.values()) v = std::floor(rng.uniform(-2, 2)) + rng.uniform(0.25, 0.75);
      return t;
    };
    f.dx = off_knot({8, 8});
    f.dy = off_knot({8, 8});
    f.scale = off_knot({8, 8});
    for (auto& v : f.scale.values()) v = std::fabs(v);
    auto wloss = [&] {
      ScaleSpaceVolume vol = build_scale_space_volume(img, 1.0, 2);
      return sum(square(scale_space_warp(vol, f)));
    };
    ok = check("warp/volume", oracles::grad_max_rel_err(img, wloss), 1e-3) && ok;
    ok = check("warp/dx", oracles::grad_max_rel_err(f.dx, wloss), 1e-3) && ok;
    ok = check("warp/dy", oracles::grad_max_rel_err(f.dy, wloss), 1e-3) && ok;
    ok = check("warp/scale", oracles::grad_max_rel_err(f.scale, wloss), 1e-3) && ok;
  }
  {  // entropy models
    Tensor z = rand_t({1, 2, 3, 3}, rng, -2, 2);
    Tensor mu = rand_t({1, 2, 3, 3}, rng, -1, 1);
    Tensor sc = rand_t({1, 2, 3, 3}, rng, 0.3, 2.0);
    auto gloss = [&] { return sum(bits(DiscretizedGaussian{mu, sc}, z)); };
    ok = check("gaussian_bits/z", oracles::grad_max_rel_err(z, gloss), 1e-4) && ok;
    ok = check("gaussian_bits/scale", oracles::grad_max_rel_err(sc, gloss), 1e-4) && ok;
    FactorizedPrior fp = FactorizedPrior::init(2);
    auto floss = [&] { return sum(fp.bits(z)); };
    ok = check("factorized_bits/z", oracles::grad_max_rel_err(z, floss), 1e-4) && ok;
    Tensor w2 = fp.w2;
    ok = check("factorized_bits/w2", oracles::grad_max_rel_err(w2, floss), 1e-4) && ok;
  }

  // end-to-end: full desk-scale STAT-SSF rate-distortion loss on a 2-frame
  // 16x16 clip, finite differences sampled across every parameter tensor
  VariantConfig cfg;  // desk-scale defaults
  cfg.variant = Variant::STAT_SSF;
  cfg.structured_prior = true;
  VideoModel model(cfg, 42);
  // generic operating point: decoded flow away from interpolation knots
  model.params().at("w.dec.d3.b").values() = {0.43, -0.31, 0.2};
  SyntheticSource src;
  src.width = src.height = 16;
  src.seed = 3;
  GeneratedClip clip = generate_clip(src, 2);
  std::vector<Tensor> frames;
  for (const auto& f : clip.frames) frames.push_back(stack_batch({f}));

  auto e2e = [&] {
    RandomSource noise(90210);
    return rd_loss(model, frames, 0.01, noise).loss;
  };
  double worst_e2e = 0.0;
  for (const auto& p : model.params().items()) {
    Tensor t = p.tensor;
    double err = oracles::grad_max_rel_err(t, e2e, 1e-3, 3);
    worst_e2e = std::max(worst_e2e, err);
    if (err >= 1e-3) {
      detail += "rd_loss grad vs FD failed at " + p.name + " (rel err " + std::to_string(err) +
                "); ";
      ok = false;
    }
  }
  {
    std::ostringstream os;
    os << "worst e2e rel err " << worst_e2e << " over " << model.params().items().size()
       << " tensors";
    detail += os.str();
  }
  return ok;
}

// ---------------------------------------------------------------------------
// criterion 2: flow invertibility
// ---------------------------------------------------------------------------

bool criterion2(std::string& detail) {
  RandomSource rng(2002);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    Tensor y = rand_t({4, 7}, rng, -5, 5, false);
    ScaleShift ss{rand_t({4, 7}, rng, -3, 3, false), rand_t({4, 7}, rng, 0.1, 10.0, false)};
    Tensor back = maf_inverse(maf_forward(y, ss), ss);
    for (int64_t i = 0; i < y.numel(); ++i)
      worst = std::max(worst, std::fabs(back.values()[i] - y.values()[i]));
  }
  std::ostringstream os;
  os << "sup-norm round-trip error " << worst << " over 100 cases";
  detail = os.str();
  return worst < 1e-5;
}

// ---------------------------------------------------------------------------
// criterion 3: scale-space pyramid vs direct blur + cost
// ---------------------------------------------------------------------------

bool criterion3(std::string& detail) {
  NoGradGuard ng;
  bool ok = true;
  double min_psnr = 1e9;
  for (double sigma0 : {1.0, 1.5}) {
    for (uint64_t seed : {11ull, 22ull, 33ull}) {
      auto nat = oracles::natural_image(128, 128, seed);
      Tensor img = Tensor::from_data({1, 128, 128}, nat);
      ScaleSpaceVolume vol = build_scale_space_volume(img, sigma0, 4);
      for (int k = 1; k <= 4; ++k) {
        double sigma = std::sqrt(vol.composed_variances[static_cast<size_t>(k)]);
        auto ref = oracles::dense_blur2d(nat, 128, 128, create_gaussian_kernel(sigma).taps);
        double p = oracles::psnr_of(vol.levels[static_cast<size_t>(k)].values(), ref);
        min_psnr = std::min(min_psnr, p);
        if (p < 30.0) {
          ok = false;
          std::ostringstream os;
          os << "sigma0 " << sigma0 << " level " << k << " psnr " << p << "; ";
          detail += os.str();
        }
      }
    }
  }

  // cost: full pyramid at the default depth vs one direct top-level blur
  auto nat = oracles::natural_image(512, 512, 5);
  Tensor big = Tensor::from_data({1, 512, 512}, nat);
  double sigma0 = 1.5;
  int M = 5;
  double var = 0, s2 = 1;
  for (int i = 0; i < M; ++i) {
    var += s2 * sigma0 * sigma0;
    s2 *= 4;
  }
  GaussianKernel top = create_gaussian_kernel(std::sqrt(var));

  auto time_median = [&](const std::function<void()>& fn) {
    std::vector<double> ts;
    for (int r = 0; r < 5; ++r) {
      auto t0 = Clock::now();
      fn();
      ts.push_back(seconds_since(t0));
    }
    std::sort(ts.begin(), ts.end());
    return ts[2];
  };
  double t_pyramid = time_median([&] { build_scale_space_volume(big, sigma0, M); });
  double t_direct_top = time_median([&] { gaussian_blur(big, top); });
  double t_m1 = time_median([&] { build_scale_space_volume(big, sigma0, 1); });
  // marginal cost of the deepest level: going from an M-1 volume to an M one
  double marginal_top = t_pyramid - time_median([&] { build_scale_space_volume(big, sigma0, M - 1); });
  double speedup_top = t_direct_top / marginal_top;
  // the whole volume vs blurring every level directly with its own kernel
  double t_direct_volume = 0.0;
  {
    ScaleSpaceVolume probe = build_scale_space_volume(big, sigma0, M);
    for (int k = 1; k <= M; ++k) {
      GaussianKernel kk =
          create_gaussian_kernel(std::sqrt(probe.composed_variances[static_cast<size_t>(k)]));
      t_direct_volume += time_median([&] { gaussian_blur(big, kk); });
    }
  }

  std::ostringstream os;
  os << "min level psnr " << min_psnr << " dB; top level: direct " << t_direct_top * 1e3
     << "ms (taps " << top.taps.size() << ") vs pyramid marginal " << marginal_top * 1e3
     << "ms (speedup " << speedup_top << "x); whole volume: direct " << t_direct_volume * 1e3
     << "ms vs pyramid " << t_pyramid * 1e3 << "ms (" << t_direct_volume / t_pyramid
     << "x); level-1 cost " << t_m1 * 1e3 << "ms";
  detail += os.str();
  if (speedup_top < 5.0) ok = false;
  if (marginal_top > 2.0 * t_m1) ok = false;
  return ok;
}

// ---------------------------------------------------------------------------
// criterion 4: warp identities
// ---------------------------------------------------------------------------

bool criterion4(std::string& detail) {
  NoGradGuard ng;
  auto nat = oracles::natural_image(32, 32, 7);
  Tensor img = rgb_frame_from(nat, 32, 32);
  ScaleSpaceVolume vol = build_scale_space_volume(img, 1.5, 3);

  FlowField zero;
  zero.dx = Tensor::zeros({32, 32});
  zero.dy = Tensor::zeros({32, 32});
  zero.scale = Tensor::zeros({32, 32});
  Tensor w0 = scale_space_warp(vol, zero);
  bool exact = w0.values() == img.values();

  FlowField shift = zero;
  shift.dx = Tensor::full({32, 32}, 2.0);
  shift.dy = Tensor::full({32, 32}, -1.0);
  Tensor ws = scale_space_warp(vol, shift);
  auto ref = oracles::shift_clamped(nat, 32, 32, 2, -1);
  double worst = 0.0;
  for (int64_t i = 1; i < 31; ++i)
    for (int64_t j = 1; j < 29; ++j)  // interior under (2,-1) shift
      for (int64_t c = 0; c < 3; ++c)
        worst = std::max(worst,
                         std::fabs(ws.value_at({c, i, j}) - ref[static_cast<size_t>(i * 32 + j)]));

  std::ostringstream os;
  os << "zero-flow exact: " << (exact ? "yes" : "NO") << "; integer-shift max interior err "
     << worst;
  detail = os.str();
  return exact && worst == 0.0;
}

// ---------------------------------------------------------------------------
// criterion 5: codec soundness across variants, priors, init and trained
// ---------------------------------------------------------------------------

bool criterion5(std::string& detail) {
  bool ok = true;
  std::vector<Tensor> clip = eval_clip(505, 10, 64);
  int checked = 0;
  double worst_gap_bits = 0.0;

  for (Variant v : {Variant::TAT, Variant::SSF, Variant::STAT, Variant::STAT_SSF}) {
    for (bool sp : {false, true}) {
      for (bool trained : {false, true}) {
        VariantConfig cfg;
        cfg.variant = v;
        cfg.structured_prior = sp;
        VideoModel model(cfg, 7000 + static_cast<uint64_t>(v) * 2 + sp);
        if (trained) {
          TrainConfig tc;
          tc.model = cfg;
          tc.steps = 30;
          tc.crop = 32;
          tc.crop_final = 32;
          tc.batch = 2;
          tc.frames_per_clip = 2;
          tc.seed = 99;
          tc.source.width = tc.source.height = 32;
          tc.source.seed = 99;
          tc.log_every = 10;
          train(model, tc, "");
        }
        VideoEncode enc = encode_video(model, clip, 0.01);
        std::vector<Tensor> dec = decode_video(model, Bitstream::parse(enc.stream.serialize()));
        for (size_t t = 0; t < clip.size(); ++t) {
          if (dec[t].values() != enc.recons[t].values()) {
            ok = false;
            detail += std::string(variant_name(v)) + (sp ? "-sp" : "") +
                      (trained ? " trained" : " random") + ": recon mismatch at frame " +
                      std::to_string(t) + "; ";
            break;
          }
        }
        for (size_t t = 0; t < clip.size(); ++t) {
          double est = enc.frame_est_bits[t];
          double actual = static_cast<double>(enc.frame_payload_bits[t]);
          double slack = 0.01 * est + 128.0;
          worst_gap_bits = std::max(worst_gap_bits, std::fabs(actual - est) - 0.01 * est);
          if (std::fabs(actual - est) > slack) {
            ok = false;
            std::ostringstream os;
            os << variant_name(v) << (sp ? "-sp" : "") << (trained ? " trained" : " random")
               << ": frame " << t << " actual " << actual << " bits vs estimate " << est << "; ";
            detail += os.str();
          }
        }
        ++checked;
      }
    }
  }
  std::ostringstream os;
  os << checked << " configurations x 10 frames bit-exact; worst |actual-est| beyond 1% was "
     << worst_gap_bits << " bits (allowance 128)";
  detail += os.str();
  return ok;
}

// ---------------------------------------------------------------------------
// criterion 6: entropy model normalization
// ---------------------------------------------------------------------------

bool criterion6(std::string& detail) {
  bool ok = true;
  double worst = 0.0;
  for (double scale : {0.04, 0.1, 0.5, 1.0, 4.0, 8.0, 64.0}) {
    for (double mean : {-3.7, 0.0, 2.25}) {
      int64_t lo = static_cast<int64_t>(std::floor(mean - 8 * scale)) - 1;
      int64_t hi = static_cast<int64_t>(std::ceil(mean + 8 * scale)) + 1;
      double sum = 0.0;
      for (int64_t k = lo; k <= hi; ++k) sum += gaussian_pmf_scalar(k, mean, scale);
      worst = std::max(worst, std::fabs(sum - 1.0));
      if (std::fabs(sum - 1.0) >= 1e-6) ok = false;

      auto folded = gaussian_pmf_folded(mean, scale, lo, hi);
      double fsum = 0.0;
      for (double p : folded) fsum += p;
      worst = std::max(worst, std::fabs(fsum - 1.0));
      if (std::fabs(fsum - 1.0) >= 1e-6) ok = false;

      FreqTable t = quantize_pmf(folded, lo);
      uint32_t total = 0;
      for (uint32_t f : t.freq) total += f;
      if (total != kFreqTotal) ok = false;
    }
  }
  FactorizedPrior fp = FactorizedPrior::init(4);
  for (int64_t c = 0; c < 4; ++c) {
    auto folded = factorized_pmf_folded(fp, c, -40, 40);
    double fsum = 0.0;
    for (double p : folded) fsum += p;
    worst = std::max(worst, std::fabs(fsum - 1.0));
    if (std::fabs(fsum - 1.0) >= 1e-6) ok = false;
  }
  std::ostringstream os;
  os << "worst |sum-1| " << worst << " across scales [0.04, 64]";
  detail = os.str();
  return ok;
}

// ---------------------------------------------------------------------------
// criterion 7: desk-scale training
// ---------------------------------------------------------------------------

bool criterion7(std::string& detail) {
  TrainConfig cfg;  // desk-scale defaults: crop 64, batch 4, 3-frame clips
  cfg.model.variant = Variant::STAT_SSF;
  cfg.beta = 0.01;
  cfg.steps = 2000;
  cfg.seed = 2026;
  cfg.source.seed = 2026;
  cfg.log_every = 10;

  VideoModel model(cfg.model, cfg.seed);
  TrainResult r = train(model, cfg, "acceptance_curve.csv");

  double head = 0, tail = 0;
  int navg = 5;
  for (int i = 0; i < navg; ++i) {
    head += r.curve[static_cast<size_t>(i)].loss;
    tail += r.curve[r.curve.size() - 1 - static_cast<size_t>(i)].loss;
  }
  head /= navg;
  tail /= navg;
  bool halved = tail < 0.5 * head;

  // bitwise reproducibility, demonstrated on shorter runs to stay in budget
  TrainConfig rcfg = cfg;
  rcfg.steps = 50;
  VideoModel ma(rcfg.model, rcfg.seed);
  VideoModel mb(rcfg.model, rcfg.seed);
  train(ma, rcfg, "");
  train(mb, rcfg, "");
  bool reproducible = true;
  for (size_t i = 0; i < ma.params().items().size(); ++i)
    reproducible = reproducible && ma.params().items()[i].tensor.values() ==
                                       mb.params().items()[i].tensor.values();

  CheckpointMeta meta;
  meta.config = cfg.model;
  meta.beta = cfg.beta;
  meta.seed = cfg.seed;
  meta.train_steps = cfg.steps;
  save_checkpoint("acceptance_statssf.ckpt", model, meta);

  // documented measurement: train-proxy rate vs the coded rate. The proxy
  // estimates entropy-coded bits, so the comparable figure is the range-coder
  // payload; whole-file bpp adds fixed framing on top.
  std::vector<Tensor> clip = eval_clip(717, 8, 64);
  VideoEncode enc = encode_video(model, clip, cfg.beta);
  double pixels = static_cast<double>(8 * 64 * 64);
  double file_bpp = 8.0 * static_cast<double>(enc.stream.serialize().size()) / pixels;
  int64_t payload = 0;
  for (int64_t b : enc.frame_payload_bits) payload += b;
  double payload_bpp = static_cast<double>(payload) / pixels;
  std::vector<Tensor> tm;
  for (const auto& f : clip) tm.push_back(stack_batch({f}));
  RandomSource noise(5150);
  double proxy_bpp = rd_loss(model, tm, cfg.beta, noise).rate_bpp;

  // trained desk-scale codec on a static clip: P-frames cost a small floor
  std::vector<Tensor> still(6, clip[0]);
  VideoEncode senc = encode_video(model, still, cfg.beta);
  size_t i_chunk = senc.stream.chunks[0].size();
  size_t p_max = 0;
  for (size_t t = 1; t < still.size(); ++t)
    p_max = std::max(p_max, senc.stream.chunks[t].size());
  bool p_small = p_max < i_chunk;

  std::ostringstream os;
  os << "loss " << head << " -> " << tail << " (" << (tail / head * 100.0)
     << "% of initial, 5-point averages; raw " << r.initial_loss << " -> " << r.final_loss
     << "); 50-step rerun bitwise identical: " << (reproducible ? "yes" : "NO")
     << "; static clip: I-chunk " << i_chunk << " B, largest P-chunk " << p_max
     << " B; [measured] proxy R " << proxy_bpp << " bpp vs coded payload " << payload_bpp
     << " bpp (" << (std::fabs(payload_bpp - proxy_bpp) / proxy_bpp * 100.0)
     << "% apart; whole file " << file_bpp << " bpp incl. framing)";
  detail = os.str();
  return halved && reproducible && p_small;
}

// ---------------------------------------------------------------------------
// criterion 8: comparative report (emitted, not asserted)
// ---------------------------------------------------------------------------

bool criterion8(std::string& detail) {
  std::vector<Tensor> clip = eval_clip(808, 10, 64);
  std::vector<RDPoint> points;
  for (Variant v : {Variant::TAT, Variant::SSF, Variant::STAT_SSF}) {
    TrainConfig tc;
    tc.model.variant = v;
    tc.beta = 0.01;
    tc.steps = 500;
    tc.crop = 32;
    tc.crop_final = 32;
    tc.batch = 2;
    tc.frames_per_clip = 2;
    tc.seed = 888;
    tc.source.width = tc.source.height = 32;
    tc.source.seed = 888;
    tc.log_every = 50;
    VideoModel model(tc.model, tc.seed);
    train(model, tc, "");
    CheckpointMeta meta;
    meta.config = tc.model;
    meta.beta = tc.beta;
    EvalReport rep = evaluate_model(model, meta, clip, "synthetic-64");
    points.push_back(rep.points[0]);
  }
  std::string csv = rd_points_csv(points);
  write_binary_file("acceptance_comparative.csv", std::vector<uint8_t>(csv.begin(), csv.end()));

  std::ostringstream os;
  os << "matched-beta table written to acceptance_comparative.csv:\n" << csv;
  double ssf_psnr = 0, statssf_psnr = 0, ssf_bpp = 0, statssf_bpp = 0;
  for (const auto& p : points) {
    if (p.variant == "ssf") {
      ssf_psnr = p.psnr;
      ssf_bpp = p.bpp;
    }
    if (p.variant == "stat-ssf") {
      statssf_psnr = p.psnr;
      statssf_bpp = p.bpp;
    }
  }
  os << "  ordering observed (reported, not asserted): stat-ssf "
     << (statssf_psnr >= ssf_psnr && statssf_bpp <= ssf_bpp * 1.05 ? "matches" : "does not match")
     << " the expected >= ssf at this toy scale";
  detail = os.str();
  return true;  // report artifact only
}

// ---------------------------------------------------------------------------
// criterion 9: structured-prior rate gain on correlated latents
// ---------------------------------------------------------------------------

bool criterion9(std::string& detail) {
  // synthetic correlated latent source: v = w + 0.1 * noise, w piecewise
  // smooth across a 4x4 latent grid
  const int64_t B = 8, C = 32, LH = 4, LW = 4;
  auto sample_pair = [&](RandomSource& rng) {
    Tensor w = Tensor::zeros({B, C, LH, LW});
    for (auto& x : w.values()) x = std::round(rng.uniform(-6, 6)) + rng.uniform(-0.3, 0.3);
    Tensor v = Tensor::zeros({B, C, LH, LW});
    for (int64_t i = 0; i < v.numel(); ++i)
      v.values()[i] = w.values()[i] + 0.1 * rng.normal();
    return std::make_pair(w, v);
  };

  auto rate_of = [&](bool structured) {
    VariantConfig cfg;
    cfg.structured_prior = structured;
    VideoModel model(cfg, 4242);
    AdamState st;
    adam_init(st, model.params());
    RandomSource data_rng(999);
    for (int step = 0; step < 400; ++step) {
      auto [w, v] = sample_pair(data_rng);
      RandomSource noise(static_cast<uint64_t>(step) + 1);
      Tensor w_tilde = quantize_train(w, noise);
      Tensor vh = model.hyper_encode_v(v);
      Tensor vh_tilde = quantize_train(vh, noise);
      Tensor v_tilde = quantize_train(v, noise);
      DiscretizedGaussian prior =
          model.prior_v(vh_tilde, Tensor::zeros({B, 32, 1, 1}), w_tilde, LH, LW);
      Tensor loss = mean(bits(prior, v_tilde)) + mean(model.hyper_prior_v().bits(vh_tilde));
      loss.backward();
      adam_step(model.params(), st, 1e-3);
    }
    // held-out evaluation with rounding
    NoGradGuard ng;
    RandomSource eval_rng(31337);
    double total_bits = 0;
    int64_t total_syms = 0;
    for (int rep = 0; rep < 20; ++rep) {
      auto [w, v] = sample_pair(eval_rng);
      Tensor w_hat = quantize_eval(w);
      Tensor v_hat = quantize_eval(v);
      Tensor vh_hat = quantize_eval(model.hyper_encode_v(v));
      DiscretizedGaussian prior =
          model.prior_v(vh_hat, Tensor::zeros({B, 32, 1, 1}), w_hat, LH, LW);
      total_bits += sum(bits(prior, v_hat)).item() +
                    sum(model.hyper_prior_v().bits(vh_hat)).item();
      total_syms += v_hat.numel();
    }
    return total_bits / static_cast<double>(total_syms);
  };

  double structured = rate_of(true);
  double factorized = rate_of(false);
  std::ostringstream os;
  os << "avg bits per v symbol: structured " << structured << " vs factorized " << factorized
     << " (gain " << (factorized - structured) << " bits)";
  detail = os.str();
  return structured < factorized;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);

  struct Entry {
    int id;
    const char* name;
    std::function<bool(std::string&)> run;
  };
  std::vector<Entry> criteria = {
      {1, "gradient integrity", criterion1},
      {2, "flow invertibility", criterion2},
      {3, "scale-space oracle and cost", criterion3},
      {4, "warp identities", criterion4},
      {5, "codec soundness", criterion5},
      {6, "entropy model normalization", criterion6},
      {7, "desk-scale training", criterion7},
      {8, "comparative report", criterion8},
      {9, "structured-prior rate gain", criterion9},
  };

  int failures = 0;
  for (auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    std::string detail;
    auto t0 = Clock::now();
    bool pass = false;
    try {
      pass = c.run(detail);
    } catch (const std::exception& e) {
      detail += std::string("exception: ") + e.what();
    }
    double dt = seconds_since(t0);
    std::printf("[%s] criterion %d: %s (%.1fs) - %s\n", pass ? "PASS" : "FAIL", c.id, c.name, dt,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  return failures;
}
