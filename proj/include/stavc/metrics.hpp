#pragma once

#include <string>
#include <vector>

#include "stavc/checkpoint.hpp"
#include "stavc/codec.hpp"
#include "stavc/image_io.hpp"

namespace stavc {

// 10*log10(1 / MSE) over [0,1] frames; identical inputs return the 100 dB cap.
double psnr(const Tensor& a, const Tensor& b);
inline constexpr double kPsnrCap = 100.0;

// mean over frames of per-frame PSNR (not the PSNR of the mean error)
double clip_psnr(const Clip& a, const Clip& b);

// 8*bytes / (frames*h*w); header and checksum bytes included.
double bpp(size_t total_bytes, int64_t frames, int64_t height, int64_t width);

struct RDPoint {
  std::string variant;
  double beta = 0;
  double bpp = 0;
  double psnr = 0;
  int64_t frames = 0;
  double seconds = 0;
  std::string dataset;
};

struct EvalReport {
  std::vector<RDPoint> points;
  std::vector<double> per_frame_psnr;  // of the last evaluated point
  double est_bpp = 0;                  // entropy-model estimate for comparison
  uint64_t config_hash = 0;
  std::string to_json() const;
};

// Encode+decode one clip under one model; verifies decoder/encoder
// reconstruction synchrony (throws CodecError on any mismatch).
EvalReport evaluate_model(const VideoModel& model, const CheckpointMeta& meta, const Clip& clip,
                          const std::string& dataset_id);

// Encodes+decodes the clip under every checkpoint, emits a CSV sorted by bpp.
// A synchrony failure aborts the sweep.
std::vector<RDPoint> rd_sweep(const std::vector<std::string>& checkpoint_paths, const Clip& clip,
                              const std::string& dataset_id);

// schema: variant,beta,bpp,psnr,frames,seconds
std::string rd_points_csv(std::vector<RDPoint> points);

struct ExternalCodecResult {
  bool available = false;
  std::string status;
  std::vector<RDPoint> points;
};

// Shells out to a system encoder (ffmpeg/x265, bframes disabled, one point
// per quality value). Reports unavailable without failing when the binary is
// missing.
ExternalCodecResult external_codec_harness(const Clip& clip, const std::vector<int>& qualities,
                                           const std::string& workdir);

}  // namespace stavc
