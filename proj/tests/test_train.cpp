#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "oracles.hpp"
#include "stavc/checkpoint.hpp"
#include "stavc/train.hpp"

using namespace stavc;

namespace {

VariantConfig tiny_model(Variant v = Variant::STAT_SSF, bool sp = false) {
  VariantConfig c;
  c.variant = v;
  c.structured_prior = sp;
  c.hidden = 8;
  c.latent = 4;
  c.hyper = 4;
  c.cond_hidden = 4;
  c.scale_depth = 3;
  return c;
}

TrainConfig tiny_train(uint64_t seed, int64_t steps) {
  TrainConfig t;
  t.model = tiny_model();
  t.beta = 0.01;
  t.steps = steps;
  t.crop = 32;
  t.crop_final = 32;
  t.batch = 2;
  t.frames_per_clip = 2;
  t.seed = seed;
  t.log_every = 1;
  t.source.width = 32;
  t.source.height = 32;
  t.source.seed = seed;
  return t;
}

std::vector<Tensor> batch_of(const GeneratedClip& g) {
  std::vector<Tensor> tm;
  for (const auto& f : g.frames) tm.push_back(stack_batch({f}));
  return tm;
}

}  // namespace

TEST_CASE("rd_loss is distortion plus beta times rate") {
  VideoModel m(tiny_model(), 3);
  SyntheticSource src;
  src.width = src.height = 32;
  src.seed = 5;
  auto clip = batch_of(generate_clip(src, 2));

  RandomSource n1(42), n2(42), n3(42);
  RdParts a = rd_loss(m, clip, 0.02, n1);
  CHECK(a.loss.item() ==
        doctest::Approx(a.distortion + 0.02 * a.rate_bpp).epsilon(1e-12));
  CHECK(a.distortion >= 0.0);
  CHECK(a.rate_bpp >= 0.0);

  // beta = 0 reduces the loss to pure distortion
  RdParts b = rd_loss(m, clip, 0.0, n2);
  CHECK(b.loss.item() == doctest::Approx(b.distortion).epsilon(1e-12));

  // same noise stream, same value
  RdParts c = rd_loss(m, clip, 0.02, n3);
  CHECK(c.loss.item() == a.loss.item());
}

TEST_CASE("rd_loss gradients match finite differences end to end") {
  VideoModel m(tiny_model(Variant::STAT_SSF, true), 7);
  // push the decoded flow off the interpolation knots
  m.params().at("w.dec.d3.b").values() = {0.41, -0.33, 0.25};
  SyntheticSource src;
  src.width = src.height = 16;
  src.seed = 11;
  auto clip = batch_of(generate_clip(src, 2));

  auto loss = [&] {
    RandomSource noise(777);
    return rd_loss(m, clip, 0.01, noise).loss;
  };
  for (const char* n :
       {"w.enc.c2.w", "v.enc.c0.w", "iframe.dec.d3.w", "v.prior.w2", "hsig.c1.b", "v.hmix.w"}) {
    CAPTURE(n);
    Tensor t = m.params().at(n);
    CHECK(oracles::grad_max_rel_err(t, loss, 1e-3, 16) < 1e-3);
  }
}

TEST_CASE("adam on a quadratic bowl matches a scalar simulation") {
  // f(x) = x^2, analytic gradient 2x. The oracle is an independent scalar
  // rewrite of the update rule.
  ParamStore ps;
  Tensor x = ps.create_zeros("x", {1});
  x.values()[0] = 1.0;
  AdamState st;
  adam_init(st, ps);

  double ox = 1.0, om = 0.0, ov = 0.0;
  double prev = 1.0;
  for (int i = 1; i <= 100; ++i) {
    x.grad_mut()[0] = 2.0 * x.values()[0];
    adam_step(ps, st, 0.1);

    double g = 2.0 * ox;
    om = 0.9 * om + 0.1 * g;
    ov = 0.999 * ov + 0.001 * g * g;
    double mh = om / (1.0 - std::pow(0.9, i));
    double vh = ov / (1.0 - std::pow(0.999, i));
    ox -= 0.1 * mh / (std::sqrt(vh) + 1e-8);

    CHECK(x.values()[0] == doctest::Approx(ox).epsilon(1e-12));
    // monotone while far from the optimum; momentum may overshoot near it
    if (i <= 8) {
      CHECK(std::fabs(x.values()[0]) < prev);
      prev = std::fabs(x.values()[0]);
    }
  }
  CHECK(std::fabs(x.values()[0]) < 0.35);
}

TEST_CASE("adam first step magnitude is the learning rate") {
  for (double g0 : {1e-6, 1.0, 1e6}) {
    ParamStore ps;
    Tensor x = ps.create_zeros("x", {1});
    AdamState st;
    adam_init(st, ps);
    x.grad_mut()[0] = g0;
    adam_step(ps, st, 0.01);
    CHECK(std::fabs(x.values()[0]) == doctest::Approx(0.01).epsilon(1e-3));
  }
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  ParamStore ps;
  Tensor x = ps.create_zeros("x", {2});
  x.values() = {3.0, -1.5};
  AdamState st;
  adam_init(st, ps);
  x.grad_mut();  // zeros
  adam_step(ps, st, 0.1);
  CHECK(x.values() == std::vector<double>{3.0, -1.5});
}

TEST_CASE("short training runs decrease the loss and are reproducible") {
  TrainConfig cfg = tiny_train(123, 80);
  cfg.lr_initial = 3e-4;
  cfg.lr_decayed = 3e-5;
  VideoModel m1(cfg.model, cfg.seed);
  TrainResult r1 = train(m1, cfg, "");
  double head = 0, tail = 0;
  for (int i = 0; i < 5; ++i) {
    head += r1.curve[static_cast<size_t>(i)].loss;
    tail += r1.curve[r1.curve.size() - 1 - static_cast<size_t>(i)].loss;
  }
  CHECK(tail < 0.8 * head);  // averaged ends, robust to per-step noise

  VideoModel m2(cfg.model, cfg.seed);
  TrainResult r2 = train(m2, cfg, "");
  REQUIRE(r1.curve.size() == r2.curve.size());
  for (size_t i = 0; i < r1.curve.size(); ++i) {
    CHECK(r1.curve[i].loss == r2.curve[i].loss);  // bitwise
  }
  // identical parameters after identical runs
  for (size_t i = 0; i < m1.params().items().size(); ++i)
    CHECK(m1.params().items()[i].tensor.values() == m2.params().items()[i].tensor.values());

  // a different seed trains differently
  TrainConfig cfg3 = tiny_train(321, 80);
  cfg3.lr_initial = 3e-4;
  cfg3.lr_decayed = 3e-5;
  VideoModel m3(cfg3.model, cfg3.seed);
  TrainResult r3 = train(m3, cfg3, "");
  CHECK(r3.curve.back().loss != r1.curve.back().loss);
}

TEST_CASE("learning-rate schedule switches at the decay step") {
  TrainConfig cfg = tiny_train(9, 10);
  cfg.decay_step = 6;
  VideoModel m(cfg.model, cfg.seed);
  TrainResult r = train(m, cfg, "/tmp/stavc_curve_test.csv");
  for (const auto& c : r.curve)
    CHECK(c.lr == (c.step < 6 ? cfg.lr_initial : cfg.lr_decayed));

  // emitted CSV carries the schedule
  std::string csv = curve_to_csv(r.curve);
  CHECK(csv.rfind("step,loss,D,R,lr\n", 0) == 0);
  CHECK(csv.find("0.0001") != std::string::npos);
  CHECK(csv.find("1e-05") != std::string::npos);
  std::remove("/tmp/stavc_curve_test.csv");
}

TEST_CASE("a poisoned model aborts training with a numeric error") {
  TrainConfig cfg = tiny_train(5, 20);
  VideoModel m(cfg.model, cfg.seed);
  m.params().at("iframe.enc.c0.w").values()[0] = 1e308;  // overflows immediately
  CHECK_THROWS_AS(train(m, cfg, ""), NumericError);
}

TEST_CASE("train config JSON round trip") {
  TrainConfig cfg = tiny_train(77, 250);
  cfg.model.variant = Variant::SSF;
  cfg.model.structured_prior = true;
  cfg.source.texture = SyntheticSource::Texture::Checker;
  TrainConfig back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.steps == 250);
  CHECK(back.seed == 77);
  CHECK(back.model.variant == Variant::SSF);
  CHECK(back.model.structured_prior);
  CHECK(back.source.texture == SyntheticSource::Texture::Checker);
  CHECK_THROWS_AS(TrainConfig::from_json("{not json"), DataError);
}

TEST_CASE("synthetic clips: global translation is an exact shift") {
  SyntheticSource src;
  src.width = src.height = 48;
  src.sprite_count = 0;
  src.velocity_max = 1;
  src.blur_event_prob = 0.0;
  src.occlusion_prob = 0.0;
  // find a seed whose camera motion is exactly (1, 0)
  GeneratedClip g;
  bool found = false;
  for (uint64_t s = 0; s < 200 && !found; ++s) {
    src.seed = s;
    g = generate_clip(src, 3);
    found = g.cam_dx == 1 && g.cam_dy == 0;
  }
  REQUIRE(found);
  // every frame is the previous one shifted left by one pixel
  for (size_t t = 1; t < g.frames.size(); ++t) {
    const auto& prev = g.frames[t - 1].values();
    const auto& cur = g.frames[t].values();
    int64_t C = 3, H = 48, W = 48;
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < H; ++i)
        for (int64_t j = 0; j + 1 < W; ++j)
          CHECK(cur[(c * H + i) * W + j] == prev[(c * H + i) * W + j + 1]);
  }
}

TEST_CASE("synthetic blur events carry their ground truth") {
  SyntheticSource src;
  src.width = src.height = 32;
  src.blur_event_prob = 1.0;
  src.seed = 4;
  GeneratedClip g = generate_clip(src, 5);
  bool any = false;
  for (size_t t = 1; t < g.blur_sigma.size(); ++t) {
    if (g.blur_sigma[t] > 0) {
      any = true;
      CHECK(g.blur_sigma[t] >= g.blur_sigma[t - 1]);  // progressive
    }
  }
  CHECK(any);
}

TEST_CASE("synthetic determinism") {
  SyntheticSource src;
  src.width = src.height = 32;
  src.seed = 99;
  GeneratedClip a = generate_clip(src, 3);
  GeneratedClip b = generate_clip(src, 3);
  for (size_t t = 0; t < 3; ++t) CHECK(a.frames[t].values() == b.frames[t].values());
  src.seed = 100;
  GeneratedClip c = generate_clip(src, 3);
  CHECK(a.frames[0].values() != c.frames[0].values());

  CHECK_THROWS_AS(generate_clip(src, 1), UsageError);
}
