#ifndef NLAIC_RANGECODER_H_
#define NLAIC_RANGECODER_H_

#include <cstdint>
#include <span>
#include <vector>

namespace nlaic {

// Quantized cumulative frequency table: cum[0] = 0 < cum[1] < ... <
// cum[n] = 65536. Every symbol keeps frequency >= 1 so any in-alphabet
// symbol stays codable.
struct CdfTable {
  std::vector<std::uint32_t> cum;
  int size() const { return static_cast<int>(cum.size()) - 1; }
  std::uint32_t freq(int s) const { return cum[static_cast<size_t>(s) + 1] - cum[static_cast<size_t>(s)]; }
};

// 16-bit quantization with a per-symbol floor of 1 and largest-remainder
// redistribution so the total is exactly 2^16.
CdfTable build_cdf(const std::vector<double>& pmf);

// Self-information of a symbol under its quantized table, in bits.
double table_bits(const CdfTable& t, int symbol);

// 32-bit range coder, byte-wise renormalization, multiplicative interval
// split, carry propagation into the output buffer. Integer arithmetic only.
class RangeEncoder {
 public:
  void encode(const CdfTable& t, int symbol);
  std::vector<std::uint8_t> finish();
  size_t bytes_written() const { return out_.size(); }

 private:
  void shift_out();
  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::vector<std::uint8_t> out_;
  bool finished_ = false;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);
  int decode(const CdfTable& t);
  // All bytes the encoder wrote must have been consumed.
  void finish() const;

 private:
  std::uint8_t next_byte();
  std::span<const std::uint8_t> bytes_;
  size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

// Adaptive per-symbol table source; table(i) is called in stream order and
// may depend on every previously reported symbol.
class CdfSource {
 public:
  virtual ~CdfSource() = default;
  virtual const CdfTable& table(size_t index) = 0;
  virtual void on_symbol(size_t index, int symbol) { (void)index, (void)symbol; }
};

std::vector<std::uint8_t> rc_encode(std::span<const int> symbols, CdfSource& src);
std::vector<int> rc_decode(std::span<const std::uint8_t> bytes, CdfSource& src, size_t count);

}  // namespace nlaic

#endif  // NLAIC_RANGECODER_H_
