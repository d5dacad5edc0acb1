#pragma once

#include <vector>

#include "stavc/bitstream.hpp"
#include "stavc/transforms.hpp"

namespace stavc {

// Frames are [C,H,W] in [0,1]. Arbitrary sizes are replicate-padded up to the
// backbone stride product (16) on the way in and cropped on the way out;
// encoder and decoder apply identical padding, so their reconstructions stay
// bit-identical.
Tensor pad_frame_to16(const Tensor& frame);

struct FrameCode {
  std::vector<uint8_t> chunk;
  Tensor recon;            // what the decoder will reconstruct, original size
  double est_bits = 0;     // entropy-model estimate for the coded symbols
  int64_t payload_bits = 0;  // range-coder output bits (excludes framing)
};

// prev_recon == nullptr selects the I-frame path.
FrameCode encode_frame(const VideoModel& model, const Tensor& x, const Tensor* prev_recon);
// Frame dimensions come from prev_recon when present; an I-frame chunk
// (prev_recon == nullptr) needs them passed explicitly (decode_video supplies
// them from the stream header).
Tensor decode_frame(const VideoModel& model, const std::vector<uint8_t>& chunk,
                    const Tensor* prev_recon, int64_t height = -1, int64_t width = -1);

struct VideoEncode {
  Bitstream stream;
  std::vector<Tensor> recons;
  double est_bits = 0;
  std::vector<double> frame_est_bits;
  std::vector<int64_t> frame_payload_bits;
};

VideoEncode encode_video(const VideoModel& model, const std::vector<Tensor>& clip,
                         double beta_id = 0.0);
std::vector<Tensor> decode_video(const VideoModel& model, const Bitstream& stream);

std::vector<uint8_t> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace stavc
