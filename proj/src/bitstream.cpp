#include "stavc/bitstream.hpp"

#include <array>

namespace stavc {

namespace {

std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> t{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    t[i] = c;
  }
  return t;
}

}  // namespace

uint32_t crc32(const uint8_t* data, size_t n) {
  static const std::array<uint32_t, 256> table = make_crc_table();
  uint32_t c = 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

std::vector<uint8_t> Bitstream::serialize() const {
  ByteWriter w;
  w.bytes(kBitstreamMagic, sizeof(kBitstreamMagic));
  w.u16(kBitstreamVersion);
  w.u8(static_cast<uint8_t>(header.variant));
  w.u8(header.structured_prior ? 1 : 0);
  w.u8(header.frame_channels);
  w.u8(0);  // reserved
  w.u32(header.width);
  w.u32(header.height);
  w.u32(header.frame_count);
  w.u64(header.config_hash);
  w.f64(header.beta);
  if (chunks.size() != header.frame_count) throw CodecError("chunk count mismatch");
  for (const auto& c : chunks) {
    w.u32(static_cast<uint32_t>(c.size()));
    w.bytes(c.data(), c.size());
  }
  uint32_t crc = crc32(w.data().data(), w.size());
  w.u32(crc);
  return w.take();
}

Bitstream Bitstream::parse(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < sizeof(kBitstreamMagic) + 4) throw CodecError("stream too short");
  uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  uint32_t computed = crc32(bytes.data(), bytes.size() - 4);
  if (stored != computed) throw CodecError("checksum mismatch: corrupt stream");

  ByteReader r(bytes.data(), bytes.size() - 4);
  if (r.str(sizeof(kBitstreamMagic)) != std::string(kBitstreamMagic, sizeof(kBitstreamMagic)))
    throw CodecError("bad magic: not a stavc bitstream");
  if (r.u16() != kBitstreamVersion) throw CodecError("unsupported bitstream version");

  Bitstream s;
  uint8_t variant_id = r.u8();
  if (variant_id > 3) throw CodecError("unknown variant id");
  s.header.variant = static_cast<Variant>(variant_id);
  s.header.structured_prior = r.u8() != 0;
  s.header.frame_channels = r.u8();
  r.u8();
  s.header.width = r.u32();
  s.header.height = r.u32();
  s.header.frame_count = r.u32();
  s.header.config_hash = r.u64();
  s.header.beta = r.f64();
  s.chunks.reserve(s.header.frame_count);
  for (uint32_t i = 0; i < s.header.frame_count; ++i) {
    uint32_t len = r.u32();
    s.chunks.push_back(r.blob(len));
  }
  if (r.remaining() != 0) throw CodecError("trailing bytes after last chunk");
  return s;
}

}  // namespace stavc
