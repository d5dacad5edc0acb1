#include "stavc/range_coder.hpp"

namespace stavc {

std::vector<uint8_t> rc_encode(const std::vector<int64_t>& symbols, const FreqTable& table) {
  RangeEncoder enc;
  for (int64_t s : symbols) enc.encode_symbol(s, table);
  return enc.finish();
}

std::vector<uint8_t> rc_encode(const std::vector<int64_t>& symbols,
                               const std::vector<FreqTable>& tables) {
  if (symbols.size() != tables.size())
    throw UsageError("rc_encode: one table per symbol required");
  RangeEncoder enc;
  for (size_t i = 0; i < symbols.size(); ++i) enc.encode_symbol(symbols[i], tables[i]);
  return enc.finish();
}

std::vector<int64_t> rc_decode(const std::vector<uint8_t>& bytes, const FreqTable& table,
                               size_t n) {
  RangeDecoder dec(bytes.data(), bytes.size());
  std::vector<int64_t> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = dec.decode_symbol(table);
  dec.check_not_truncated();
  return out;
}

std::vector<int64_t> rc_decode(const std::vector<uint8_t>& bytes,
                               const std::vector<FreqTable>& tables, size_t n) {
  if (tables.size() != n) throw UsageError("rc_decode: one table per symbol required");
  RangeDecoder dec(bytes.data(), bytes.size());
  std::vector<int64_t> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = dec.decode_symbol(tables[i]);
  dec.check_not_truncated();
  return out;
}

}  // namespace stavc
