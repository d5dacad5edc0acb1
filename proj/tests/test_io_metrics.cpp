#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "stavc/checkpoint.hpp"
#include "stavc/image_io.hpp"
#include "stavc/metrics.hpp"
#include "stavc/train.hpp"
#include "stavc/synthetic.hpp"

using namespace stavc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// test-only PNG writer (filter 0 rows, single zlib-compressed IDAT)
void write_png(const std::string& path, const std::vector<uint8_t>& interleaved, uint32_t W,
               uint32_t H, int channels) {
  std::vector<uint8_t> raw;
  for (uint32_t y = 0; y < H; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), interleaved.begin() + y * W * channels,
               interleaved.begin() + (y + 1) * W * channels);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(bound);
  REQUIRE(compress2(comp.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) == Z_OK);
  comp.resize(bound);

  auto be32 = [](uint32_t v) {
    return std::vector<uint8_t>{uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8), uint8_t(v)};
  };
  auto chunk_crc = [](const std::vector<uint8_t>& type_and_data) {
    return ::crc32(0, type_and_data.data(), static_cast<uInt>(type_and_data.size()));
  };
  std::ofstream out(path, std::ios::binary);
  const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.write(reinterpret_cast<const char*>(sig), 8);
  auto emit = [&](const char* type, const std::vector<uint8_t>& data) {
    auto len = be32(static_cast<uint32_t>(data.size()));
    out.write(reinterpret_cast<const char*>(len.data()), 4);
    std::vector<uint8_t> td(type, type + 4);
    td.insert(td.end(), data.begin(), data.end());
    uint32_t crc = static_cast<uint32_t>(chunk_crc(td));
    out.write(reinterpret_cast<const char*>(td.data()), static_cast<std::streamsize>(td.size()));
    auto c = be32(crc);
    out.write(reinterpret_cast<const char*>(c.data()), 4);
  };
  std::vector<uint8_t> ihdr;
  for (uint8_t b : be32(W)) ihdr.push_back(b);
  for (uint8_t b : be32(H)) ihdr.push_back(b);
  ihdr.push_back(8);                                            // bit depth
  ihdr.push_back(channels == 1 ? 0 : channels == 3 ? 2 : 6);    // color type
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  emit("IHDR", ihdr);
  emit("IDAT", comp);
  emit("IEND", {});
}

}  // namespace

TEST_CASE("ppm round trip maps bytes to k/255 exactly") {
  TempDir td("stavc_io_test");
  std::vector<double> vals(3 * 4 * 5);
  for (size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<double>(i % 256) / 255.0;
  Tensor img = Tensor::from_data({3, 4, 5}, vals);
  std::string p = (td.path / "img.ppm").string();
  save_image_ppm(p, img);
  Tensor back = load_image(p);
  CHECK(back.shape() == img.shape());
  CHECK(back.values() == img.values());
}

TEST_CASE("png loading matches the encoded bytes") {
  TempDir td("stavc_png_test");
  uint32_t W = 6, H = 4;
  std::vector<uint8_t> rgb(W * H * 3);
  for (size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<uint8_t>((i * 37) % 256);
  std::string p = (td.path / "img.png").string();
  write_png(p, rgb, W, H, 3);
  Tensor t = load_image(p);
  CHECK(t.shape() == Shape{3, H, W});
  for (uint32_t y = 0; y < H; ++y)
    for (uint32_t x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(t.value_at({c, y, x}) ==
              doctest::Approx(rgb[(y * W + x) * 3 + c] / 255.0).epsilon(1e-12));

  // grayscale and RGBA (alpha dropped)
  std::vector<uint8_t> gray(W * H);
  for (size_t i = 0; i < gray.size(); ++i) gray[i] = static_cast<uint8_t>(i);
  write_png((td.path / "g.png").string(), gray, W, H, 1);
  CHECK(load_image((td.path / "g.png").string()).shape() == Shape{1, H, W});

  std::vector<uint8_t> rgba(W * H * 4, 128);
  write_png((td.path / "a.png").string(), rgba, W, H, 4);
  CHECK(load_image((td.path / "a.png").string()).shape() == Shape{3, H, W});
}

TEST_CASE("frame directories load in numeric order") {
  TempDir td("stavc_frames_test");
  SyntheticSource src;
  src.width = src.height = 32;
  src.seed = 8;
  Clip clip = generate_clip(src, 3).frames;
  // deliberately awkward numbering: 2, 10, 33 stay in numeric order
  save_image_ppm((td.path / "f_2.ppm").string(), clip[0]);
  save_image_ppm((td.path / "f_10.ppm").string(), clip[1]);
  save_image_ppm((td.path / "f_33.ppm").string(), clip[2]);
  Clip loaded = load_frames(td.path.string());
  REQUIRE(loaded.size() == 3);
  for (int t = 0; t < 3; ++t) {
    double p = psnr(loaded[static_cast<size_t>(t)], clip[static_cast<size_t>(t)]);
    CHECK(p > 45.0);  // only 8-bit quantization error
  }

  // inconsistent dims are an ingestion error
  save_image_ppm((td.path / "f_40.ppm").string(), Tensor::zeros({3, 16, 16}));
  CHECK_THROWS_AS(load_frames(td.path.string()), DataError);
}

TEST_CASE("empty directory and unsupported depth are ingestion errors") {
  TempDir td("stavc_empty_test");
  CHECK_THROWS_AS(load_frames(td.path.string()), DataError);

  // 16-bit PPM
  std::ofstream out(td.path / "deep.ppm", std::ios::binary);
  out << "P6\n2 2\n65535\n";
  for (int i = 0; i < 24; ++i) out.put(0);
  out.close();
  CHECK_THROWS_AS(load_image((td.path / "deep.ppm").string()), DataError);
}

TEST_CASE("raw planar round trip") {
  TempDir td("stavc_raw_test");
  SyntheticSource src;
  src.width = 48;
  src.height = 32;
  src.seed = 3;
  Clip clip = generate_clip(src, 4).frames;
  std::string p = (td.path / "clip.raw").string();
  save_raw_planar(p, clip);
  Clip back = load_frames(p);
  REQUIRE(back.size() == 4);
  for (size_t t = 0; t < 4; ++t) CHECK(psnr(back[t], clip[t]) > 45.0);

  // size mismatch with the sidecar is an error
  auto bytes = read_binary_file(p);
  bytes.pop_back();
  write_binary_file(p, bytes);
  CHECK_THROWS_AS(load_frames(p), DataError);
}

TEST_CASE("psnr fixed points") {
  Tensor a = Tensor::zeros({1, 4, 4});
  CHECK(psnr(a, a) == kPsnrCap);
  Tensor b = Tensor::full({1, 4, 4}, 1.0);
  CHECK(psnr(a, b) == doctest::Approx(0.0));
  Tensor c = Tensor::full({1, 4, 4}, 0.1);
  CHECK(psnr(a, c) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK_THROWS_AS(psnr(a, Tensor::zeros({1, 2, 2})), UsageError);
}

TEST_CASE("clip psnr averages per-frame values") {
  Tensor x = Tensor::zeros({1, 4, 4});
  Tensor e1 = Tensor::full({1, 4, 4}, 0.1);   // 20 dB
  Tensor e2 = Tensor::full({1, 4, 4}, 0.01);  // 40 dB
  double v = clip_psnr({x, x}, {e1, e2});
  CHECK(v == doctest::Approx(30.0).epsilon(1e-9));
  // definitionally different from pooling the errors first
  double pooled = psnr(concat_channels({reshape(x, {1, 1, 4, 4}), reshape(x, {1, 1, 4, 4})}),
                       concat_channels({reshape(e1, {1, 1, 4, 4}), reshape(e2, {1, 1, 4, 4})}));
  CHECK(v != doctest::Approx(pooled).epsilon(1e-6));
}

TEST_CASE("bpp accounting") {
  CHECK(bpp(1000, 10, 16, 16) == doctest::Approx(3.125));
  CHECK_THROWS_AS(bpp(1, 0, 16, 16), UsageError);
}

TEST_CASE("evaluate_model verifies synchrony and reports actual above estimate") {
  VariantConfig cfg;
  cfg.variant = Variant::SSF;
  cfg.hidden = 8;
  cfg.latent = 4;
  cfg.hyper = 4;
  cfg.cond_hidden = 4;
  cfg.scale_depth = 3;
  VideoModel m(cfg, 21);
  CheckpointMeta meta;
  meta.config = cfg;
  meta.beta = 0.01;

  SyntheticSource src;
  src.width = src.height = 32;
  src.seed = 13;
  Clip clip = generate_clip(src, 3).frames;
  EvalReport rep = evaluate_model(m, meta, clip, "synthetic");
  REQUIRE(rep.points.size() == 1);
  CHECK(rep.points[0].bpp > rep.est_bpp);  // headers and framing are counted
  CHECK(rep.points[0].psnr > 5.0);
  CHECK(rep.per_frame_psnr.size() == 3);
}

TEST_CASE("rd csv is sorted by bpp and stable for fixed inputs") {
  std::vector<RDPoint> pts(3);
  pts[0] = {"ssf", 0.01, 0.8, 30.0, 10, 1.5, "d"};
  pts[1] = {"tat", 0.02, 0.2, 27.0, 10, 1.25, "d"};
  pts[2] = {"stat-ssf", 0.04, 0.5, 29.0, 10, 0.75, "d"};
  std::string csv = rd_points_csv(pts);
  CHECK(csv ==
        "variant,beta,bpp,psnr,frames,seconds\n"
        "tat,0.02,0.200000,27.0000,10,1.250\n"
        "stat-ssf,0.04,0.500000,29.0000,10,0.750\n"
        "ssf,0.01,0.800000,30.0000,10,1.500\n");
  CHECK(csv == rd_points_csv(pts));
}

TEST_CASE("external codec harness degrades gracefully without ffmpeg") {
  SyntheticSource src;
  src.width = src.height = 32;
  src.seed = 2;
  Clip clip = generate_clip(src, 2).frames;
  TempDir td("stavc_ext_test");
  ExternalCodecResult r = external_codec_harness(clip, {30}, td.path.string());
  if (!r.available) {
    CHECK(r.points.empty());
    CHECK(r.status.find("unavailable") != std::string::npos);
  } else {
    for (const auto& p : r.points) CHECK(p.bpp > 0.0);
  }
}

TEST_CASE("sweep orders checkpoints by rate as beta varies") {
  TempDir td("stavc_sweep_beta");
  VariantConfig mc;
  mc.hidden = 8;
  mc.latent = 4;
  mc.hyper = 4;
  mc.cond_hidden = 4;
  mc.scale_depth = 3;
  std::vector<std::string> paths;
  for (double beta : {0.002, 0.12}) {
    TrainConfig tc;
    tc.model = mc;
    tc.beta = beta;
    tc.steps = 120;
    tc.crop = 32;
    tc.crop_final = 32;
    tc.batch = 2;
    tc.frames_per_clip = 2;
    tc.seed = 12;
    tc.lr_initial = 3e-4;
    tc.lr_decayed = 3e-5;
    tc.source.width = tc.source.height = 32;
    tc.source.seed = 12;
    tc.log_every = 30;
    VideoModel m(tc.model, tc.seed);
    train(m, tc, "");
    CheckpointMeta meta;
    meta.config = tc.model;
    meta.beta = tc.beta;
    std::string p = (td.path / ("b" + std::to_string(beta) + ".ckpt")).string();
    save_checkpoint(p, m, meta);
    paths.push_back(p);
  }
  SyntheticSource src;
  src.width = src.height = 32;
  src.seed = 9;
  Clip clip = generate_clip(src, 4).frames;
  std::vector<RDPoint> pts = rd_sweep(paths, clip, "beta-order");
  REQUIRE(pts.size() == 2);
  // smaller beta -> more bits spent
  CHECK(pts[0].bpp > pts[1].bpp);
}
