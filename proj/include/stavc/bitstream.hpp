#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "stavc/error.hpp"
#include "stavc/transforms.hpp"

namespace stavc {

uint32_t crc32(const uint8_t* data, size_t n);

// Little-endian byte packing shared by the bitstream and checkpoint formats.
class ByteWriter {
 public:
  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v) { raw(&v, 2); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void i32(int32_t v) { raw(&v, 4); }
  void i64(int64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void bytes(const void* p, size_t n) { raw(p, n); }
  void str(const std::string& s) { raw(s.data(), s.size()); }
  const std::vector<uint8_t>& data() const { return out_; }
  std::vector<uint8_t> take() { return std::move(out_); }
  size_t size() const { return out_.size(); }

 private:
  void raw(const void* p, size_t n) {
    size_t o = out_.size();
    out_.resize(o + n);
    std::memcpy(out_.data() + o, p, n);
  }
  std::vector<uint8_t> out_;
};

class ByteReader {
 public:
  ByteReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}
  uint8_t u8() { return *take(1); }
  uint16_t u16() { return rd<uint16_t>(); }
  uint32_t u32() { return rd<uint32_t>(); }
  uint64_t u64() { return rd<uint64_t>(); }
  int32_t i32() { return rd<int32_t>(); }
  int64_t i64() { return rd<int64_t>(); }
  double f64() { return rd<double>(); }
  std::string str(size_t n) {
    const uint8_t* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  std::vector<uint8_t> blob(size_t n) {
    const uint8_t* p = take(n);
    return std::vector<uint8_t>(p, p + n);
  }
  size_t remaining() const { return size_ - pos_; }
  size_t pos() const { return pos_; }

 private:
  template <class T>
  T rd() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const uint8_t* take(size_t n) {
    if (pos_ + n > size_) throw CodecError("unexpected end of stream");
    const uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

// Self-delimiting container: header, one length-prefixed chunk per frame, and
// a CRC32 trailer over everything before it. Decodable with nothing but the
// matching checkpoint.
struct BitstreamHeader {
  Variant variant = Variant::STAT_SSF;
  bool structured_prior = false;
  uint8_t frame_channels = 3;
  uint32_t width = 0;   // original (pre-padding) dimensions
  uint32_t height = 0;
  uint32_t frame_count = 0;
  uint64_t config_hash = 0;
  double beta = 0.0;
};

struct Bitstream {
  BitstreamHeader header;
  std::vector<std::vector<uint8_t>> chunks;  // one per frame

  std::vector<uint8_t> serialize() const;
  static Bitstream parse(const std::vector<uint8_t>& bytes);
  size_t byte_size() const { return serialize().size(); }
};

inline constexpr char kBitstreamMagic[6] = {'S', 'T', 'A', 'V', 'C', '1'};
inline constexpr uint16_t kBitstreamVersion = 1;

}  // namespace stavc
