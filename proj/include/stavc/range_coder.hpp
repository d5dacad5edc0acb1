#pragma once

#include <cstdint>
#include <vector>

#include "stavc/entropy.hpp"
#include "stavc/error.hpp"

namespace stavc {

// Byte-oriented range coder with carry propagation (cache + pending-FF
// scheme). Renormalization keeps range >= 2^24; frequency totals are fixed at
// 2^16. decode(encode(s)) == s for any symbol sequence with positive
// frequencies; flush overhead is at most a few bytes per stream.
class RangeEncoder {
 public:
  RangeEncoder() { out_.reserve(64); }

  void encode(uint32_t cum, uint32_t freq) {
    range_ >>= kFreqTotalBits;
    low_ += static_cast<uint64_t>(cum) * range_;
    range_ *= freq;
    while (range_ < kTop) {
      shift_low();
      range_ <<= 8;
    }
  }

  void encode_symbol(int64_t s, const FreqTable& t) {
    if (!t.contains(s)) throw CodecError("symbol " + std::to_string(s) + " outside coder support");
    size_t i = static_cast<size_t>(s - t.lo);
    if (t.freq[i] == 0) throw CodecError("zero-frequency symbol");
    encode(t.cum[i], t.freq[i]);
  }

  // Seals the stream. No further encode calls allowed.
  std::vector<uint8_t> finish() {
    while (range_ < kTop) {
      shift_low();
      range_ <<= 8;
    }
    uint64_t v = (low_ + kTop - 1) & ~(kTop - 1);  // inside [low, low+range)
    low_ = v;
    shift_low();
    shift_low();
    return std::move(out_);
  }

  size_t bytes_written() const { return out_.size(); }

 private:
  static constexpr uint64_t kTop = 1ull << 24;

  void shift_low() {
    if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      uint8_t carry = static_cast<uint8_t>(low_ >> 32);
      if (!first_)
        out_.push_back(static_cast<uint8_t>(cache_ + carry));
      else
        first_ = false;  // leading byte is always zero; dropped
      while (pending_ > 0) {
        out_.push_back(static_cast<uint8_t>(0xFF + carry));
        --pending_;
      }
      cache_ = static_cast<uint8_t>(low_ >> 24);
    } else {
      ++pending_;
    }
    low_ = (low_ << 8) & 0xFFFFFFFFull;
  }

  uint64_t low_ = 0;
  uint64_t range_ = 0xFFFFFFFFull;
  uint8_t cache_ = 0;
  int64_t pending_ = 0;
  bool first_ = true;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  RangeDecoder(const uint8_t* data, size_t size) : data_(data), size_(size) {
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }

  int64_t decode_symbol(const FreqTable& t) {
    uint64_t r = range_ >> kFreqTotalBits;
    uint32_t f = static_cast<uint32_t>(code_ / r);
    if (f > kFreqTotal - 1) f = kFreqTotal - 1;
    // largest index with cum[i] <= f
    size_t leftIdx = 0, rightIdx = t.cum.size() - 1;
    while (rightIdx - leftIdx > 1) {
      size_t mid = (leftIdx + rightIdx) / 2;
      if (t.cum[mid] <= f)
        leftIdx = mid;
      else
        rightIdx = mid;
    }
    size_t i = leftIdx;
    code_ -= static_cast<uint64_t>(t.cum[i]) * r;
    range_ = r * t.freq[i];
    while (range_ < kTop) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
    return t.lo + static_cast<int64_t>(i);
  }

  // Reads past the payload resolve to zero; a correctly flushed stream needs
  // at most 4 of them (the initial 4-byte priming minus the flush bytes).
  // Anything beyond that means the stream was truncated.
  size_t overreads() const { return overreads_; }
  void check_not_truncated() const {
    if (overreads_ > 4) throw CodecError("truncated entropy-coded stream");
  }

 private:
  static constexpr uint64_t kTop = 1ull << 24;

  uint8_t next_byte() {
    if (pos_ < size_) return data_[pos_++];
    ++overreads_;
    return 0;
  }

  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  size_t overreads_ = 0;
  uint64_t code_ = 0;
  uint64_t range_ = 0xFFFFFFFFull;
};

// Convenience wrappers (tests and simple callers). A single shared table or
// one table per symbol.
std::vector<uint8_t> rc_encode(const std::vector<int64_t>& symbols, const FreqTable& table);
std::vector<uint8_t> rc_encode(const std::vector<int64_t>& symbols,
                               const std::vector<FreqTable>& tables);
std::vector<int64_t> rc_decode(const std::vector<uint8_t>& bytes, const FreqTable& table,
                               size_t n);
std::vector<int64_t> rc_decode(const std::vector<uint8_t>& bytes,
                               const std::vector<FreqTable>& tables, size_t n);

}  // namespace stavc
