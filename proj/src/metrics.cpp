#include "stavc/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include "json.hpp"

namespace fs = std::filesystem;

namespace stavc {

double psnr(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw UsageError("psnr operands must have the same shape");
  const auto& av = a.values();
  const auto& bv = b.values();
  double se = 0.0;
  for (size_t i = 0; i < av.size(); ++i) {
    double d = av[i] - bv[i];
    se += d * d;
  }
  double mse = se / static_cast<double>(av.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double clip_psnr(const Clip& a, const Clip& b) {
  if (a.size() != b.size() || a.empty()) throw UsageError("clip_psnr needs equal-length clips");
  double s = 0.0;
  for (size_t t = 0; t < a.size(); ++t) s += psnr(a[t], b[t]);
  return s / static_cast<double>(a.size());
}

double bpp(size_t total_bytes, int64_t frames, int64_t height, int64_t width) {
  if (frames < 1 || height < 1 || width < 1) throw UsageError("bpp needs positive dimensions");
  return 8.0 * static_cast<double>(total_bytes) /
         static_cast<double>(frames * height * width);
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["est_bpp"] = est_bpp;
  j["per_frame_psnr"] = per_frame_psnr;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) {
    nlohmann::json q;
    q["variant"] = p.variant;
    q["beta"] = p.beta;
    q["bpp"] = p.bpp;
    q["psnr"] = p.psnr;
    q["frames"] = p.frames;
    q["seconds"] = p.seconds;
    q["dataset"] = p.dataset;
    pts.push_back(q);
  }
  j["points"] = pts;
  return j.dump(2);
}

EvalReport evaluate_model(const VideoModel& model, const CheckpointMeta& meta, const Clip& clip,
                          const std::string& dataset_id) {
  if (clip.empty()) throw UsageError("empty clip");
  auto t0 = std::chrono::steady_clock::now();
  VideoEncode enc = encode_video(model, clip, meta.beta);
  std::vector<uint8_t> bytes = enc.stream.serialize();
  Clip dec = decode_video(model, Bitstream::parse(bytes));
  for (size_t t = 0; t < clip.size(); ++t) {
    if (dec[t].values() != enc.recons[t].values())
      throw CodecError("decoder reconstruction diverged from encoder at frame " +
                       std::to_string(t));
  }
  auto t1 = std::chrono::steady_clock::now();

  int64_t H = clip[0].dim(1), W = clip[0].dim(2);
  EvalReport rep;
  rep.config_hash = model.config().hash();
  RDPoint p;
  p.variant = variant_name(model.config().variant);
  if (model.config().structured_prior) p.variant += "-sp";
  p.beta = meta.beta;
  p.bpp = bpp(bytes.size(), static_cast<int64_t>(clip.size()), H, W);
  p.psnr = clip_psnr(clip, dec);
  p.frames = static_cast<int64_t>(clip.size());
  p.seconds = std::chrono::duration<double>(t1 - t0).count();
  p.dataset = dataset_id;
  rep.points.push_back(p);
  rep.est_bpp = enc.est_bits / static_cast<double>(clip.size() * H * W);
  for (size_t t = 0; t < clip.size(); ++t) rep.per_frame_psnr.push_back(psnr(clip[t], dec[t]));
  return rep;
}

std::vector<RDPoint> rd_sweep(const std::vector<std::string>& checkpoint_paths, const Clip& clip,
                              const std::string& dataset_id) {
  std::vector<RDPoint> points;
  for (const auto& path : checkpoint_paths) {
    LoadedCheckpoint lc = load_checkpoint(path);
    EvalReport rep = evaluate_model(*lc.model, lc.meta, clip, dataset_id);
    points.insert(points.end(), rep.points.begin(), rep.points.end());
  }
  return points;
}

std::string rd_points_csv(std::vector<RDPoint> points) {
  std::stable_sort(points.begin(), points.end(),
                   [](const RDPoint& a, const RDPoint& b) { return a.bpp < b.bpp; });
  std::string out = "variant,beta,bpp,psnr,frames,seconds\n";
  char line[256];
  for (const auto& p : points) {
    std::snprintf(line, sizeof(line), "%s,%.6g,%.6f,%.4f,%lld,%.3f\n", p.variant.c_str(), p.beta,
                  p.bpp, p.psnr, static_cast<long long>(p.frames), p.seconds);
    out += line;
  }
  return out;
}

// ---------------------------------------------------------------------------
// external codec harness
// ---------------------------------------------------------------------------

namespace {

int run_cmd(const std::string& cmd) { return std::system(cmd.c_str()); }

bool binary_available(const std::string& name) {
  std::string cmd = "command -v " + name + " >/dev/null 2>&1";
  return run_cmd(cmd) == 0;
}

}  // namespace

ExternalCodecResult external_codec_harness(const Clip& clip, const std::vector<int>& qualities,
                                           const std::string& workdir) {
  ExternalCodecResult res;
  if (clip.empty()) throw UsageError("empty clip");
  if (!binary_available("ffmpeg")) {
    res.available = false;
    res.status = "unavailable: ffmpeg not found on PATH";
    return res;
  }
  res.available = true;
  fs::create_directories(workdir);
  std::string frames_dir = (fs::path(workdir) / "frames").string();
  save_frames_ppm(frames_dir, clip, "frame");

  int64_t H = clip[0].dim(1), W = clip[0].dim(2);
  for (int q : qualities) {
    std::string out_mkv = (fs::path(workdir) / ("ext_q" + std::to_string(q) + ".mkv")).string();
    std::string dec_dir = (fs::path(workdir) / ("dec_q" + std::to_string(q))).string();
    fs::create_directories(dec_dir);
    // low-latency: B-frames disabled, quality driven by crf
    std::string enc_cmd = "ffmpeg -y -loglevel error -i '" + frames_dir +
                          "/frame_%05d.ppm' -c:v libx265 -x265-params bframes=0 -crf " +
                          std::to_string(q) + " '" + out_mkv + "' 2>/dev/null";
    if (run_cmd(enc_cmd) != 0) {
      res.status += "encode failed at crf " + std::to_string(q) + "; ";
      continue;
    }
    std::string dec_cmd = "ffmpeg -y -loglevel error -i '" + out_mkv + "' '" + dec_dir +
                          "/frame_%05d.ppm' 2>/dev/null";
    if (run_cmd(dec_cmd) != 0) {
      res.status += "decode failed at crf " + std::to_string(q) + "; ";
      continue;
    }
    Clip dec = load_frames(dec_dir);
    if (dec.size() != clip.size()) {
      res.status += "frame count mismatch at crf " + std::to_string(q) + "; ";
      continue;
    }
    RDPoint p;
    p.variant = "hevc-rgb";
    p.beta = static_cast<double>(q);
    p.bpp = bpp(fs::file_size(out_mkv), static_cast<int64_t>(clip.size()), H, W);
    p.psnr = clip_psnr(clip, dec);
    p.frames = static_cast<int64_t>(clip.size());
    p.dataset = "external";
    res.points.push_back(p);
  }
  if (res.status.empty()) res.status = "ok";
  return res;
}

}  // namespace stavc
