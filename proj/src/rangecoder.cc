#include "nlaic/rangecoder.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nlaic/detmath.h"

namespace nlaic {

namespace {
constexpr std::uint32_t kTop = 1u << 24;
constexpr std::uint32_t kTotal = 1u << 16;
}  // namespace

CdfTable build_cdf(const std::vector<double>& pmf) {
  const size_t n = pmf.size();
  if (n == 0) throw std::invalid_argument("build_cdf: empty pmf");
  if (n > kTotal) throw std::invalid_argument("build_cdf: alphabet larger than 2^16");
  double sum = 0.0;
  for (double p : pmf) {
    if (p < 0.0) throw std::invalid_argument("build_cdf: negative probability");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-6) throw std::invalid_argument("build_cdf: pmf sums to " + std::to_string(sum));

  std::vector<std::uint32_t> f(n);
  std::vector<double> rem(n);
  std::int64_t total = 0;
  for (size_t i = 0; i < n; ++i) {
    double raw = pmf[i] * 65536.0;
    double fl = std::floor(raw);
    rem[i] = raw - fl;
    f[i] = static_cast<std::uint32_t>(std::max(1.0, fl));
    total += f[i];
  }
  if (total < 65536) {
    std::int64_t d = 65536 - total;
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return rem[a] > rem[b]; });
    size_t k = 0;
    while (d > 0) {
      f[idx[k % n]] += 1;
      --d;
      ++k;
    }
  } else if (total > 65536) {
    std::int64_t d = total - 65536;
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return f[a] > f[b]; });
    while (d > 0) {
      bool any = false;
      for (size_t k = 0; k < n && d > 0; ++k) {
        if (f[idx[k]] > 1) {
          f[idx[k]] -= 1;
          --d;
          any = true;
        }
      }
      if (!any) throw std::logic_error("build_cdf: cannot reach total 2^16");
    }
  }
  CdfTable t;
  t.cum.resize(n + 1);
  t.cum[0] = 0;
  for (size_t i = 0; i < n; ++i) t.cum[i + 1] = t.cum[i] + f[i];
  return t;
}

double table_bits(const CdfTable& t, int symbol) {
  return -det_log2(static_cast<double>(t.freq(symbol)) / 65536.0);
}

void RangeEncoder::shift_out() {
  out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
  low_ = (low_ << 8) & 0xFFFFFFFFull;
  range_ <<= 8;
}

void RangeEncoder::encode(const CdfTable& t, int symbol) {
  if (finished_) throw std::logic_error("RangeEncoder: encode after finish");
  if (symbol < 0 || symbol >= t.size())
    throw std::invalid_argument("RangeEncoder: symbol " + std::to_string(symbol) + " outside alphabet of size " +
                                std::to_string(t.size()));
  if (t.size() == 1) return;  // probability 1: zero bits
  const std::uint64_t r = range_;
  const std::uint32_t base = static_cast<std::uint32_t>((r * t.cum[static_cast<size_t>(symbol)]) >> 16);
  const std::uint32_t top = static_cast<std::uint32_t>((r * t.cum[static_cast<size_t>(symbol) + 1]) >> 16);
  low_ += base;
  range_ = top - base;
  if (low_ > 0xFFFFFFFFull) {  // carry into already emitted bytes
    size_t i = out_.size();
    for (;;) {
      if (i == 0) throw std::logic_error("RangeEncoder: carry with empty buffer");
      --i;
      if (++out_[i] != 0) break;
    }
    low_ &= 0xFFFFFFFFull;
  }
  while (range_ < kTop) shift_out();
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  if (finished_) throw std::logic_error("RangeEncoder: finish called twice");
  finished_ = true;
  for (int i = 0; i < 4; ++i) {
    out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
    low_ = (low_ << 8) & 0xFFFFFFFFull;
  }
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= bytes_.size()) throw std::runtime_error("range decoder: truncated stream (corrupt payload)");
  return bytes_[pos_++];
}

int RangeDecoder::decode(const CdfTable& t) {
  if (t.size() == 1) return 0;
  const std::uint64_t r = range_;
  // Largest s with (r * cum[s]) >> 16 <= code, by binary search; the mapped
  // bases are nondecreasing in s.
  int lo = 0, hi = t.size();  // invariant: base(lo) <= code < base(hi) conceptually
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    const std::uint32_t base = static_cast<std::uint32_t>((r * t.cum[static_cast<size_t>(mid)]) >> 16);
    if (base <= code_)
      lo = mid;
    else
      hi = mid;
  }
  const int symbol = lo;
  const std::uint32_t base = static_cast<std::uint32_t>((r * t.cum[static_cast<size_t>(symbol)]) >> 16);
  const std::uint32_t top = static_cast<std::uint32_t>((r * t.cum[static_cast<size_t>(symbol) + 1]) >> 16);
  code_ -= base;
  range_ = top - base;
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  return symbol;
}

void RangeDecoder::finish() const {
  if (pos_ != bytes_.size())
    throw std::runtime_error("range decoder: " + std::to_string(bytes_.size() - pos_) +
                             " unconsumed trailing bytes (corrupt payload)");
}

std::vector<std::uint8_t> rc_encode(std::span<const int> symbols, CdfSource& src) {
  RangeEncoder enc;
  for (size_t i = 0; i < symbols.size(); ++i) {
    enc.encode(src.table(i), symbols[i]);
    src.on_symbol(i, symbols[i]);
  }
  return enc.finish();
}

std::vector<int> rc_decode(std::span<const std::uint8_t> bytes, CdfSource& src, size_t count) {
  RangeDecoder dec(bytes);
  std::vector<int> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    int s = dec.decode(src.table(i));
    out.push_back(s);
    src.on_symbol(i, s);
  }
  dec.finish();
  return out;
}

}  // namespace nlaic
