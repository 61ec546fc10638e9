#include "nlaic/bitstream.h"

#include <stdexcept>

namespace nlaic {

namespace {

void put_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x & 0xFF));
}

void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>((x >> 16) & 0xFF));
  v.push_back(static_cast<std::uint8_t>((x >> 8) & 0xFF));
  v.push_back(static_cast<std::uint8_t>(x & 0xFF));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, size_t off) {
  return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, size_t off) {
  return (static_cast<std::uint32_t>(b[off]) << 24) | (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) | static_cast<std::uint32_t>(b[off + 3]);
}

}  // namespace

std::vector<std::uint8_t> serialize_bitstream(const BitstreamHeader& h, std::span<const std::uint8_t> hyper,
                                              std::span<const std::uint8_t> main) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + hyper.size() + main.size());
  out.push_back('N');
  out.push_back('L');
  out.push_back('C');
  out.push_back('1');
  out.push_back(kBitstreamVersion);
  put_u16(out, h.width);
  put_u16(out, h.height);
  put_u16(out, h.latent_channels);
  out.push_back(h.quality);
  out.push_back(static_cast<std::uint8_t>(h.variant));
  out.push_back(h.latent_bound);
  out.push_back(h.hyper_bound);
  out.push_back(h.pad_right);
  out.push_back(h.pad_bottom);
  if (hyper.size() > 0xFFFFFFFFull) throw std::invalid_argument("bitstream: hyper segment too large");
  put_u32(out, static_cast<std::uint32_t>(hyper.size()));
  out.insert(out.end(), hyper.begin(), hyper.end());
  out.insert(out.end(), main.begin(), main.end());
  return out;
}

ParsedBitstream parse_bitstream(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw std::runtime_error("bitstream: truncated header");
  if (bytes[0] != 'N' || bytes[1] != 'L' || bytes[2] != 'C' || bytes[3] != '1')
    throw std::runtime_error("bitstream: bad magic");
  if (bytes[4] != kBitstreamVersion)
    throw std::runtime_error("bitstream: unsupported version " + std::to_string(bytes[4]));
  ParsedBitstream p;
  p.header.width = get_u16(bytes, 5);
  p.header.height = get_u16(bytes, 7);
  p.header.latent_channels = get_u16(bytes, 9);
  p.header.quality = bytes[11];
  p.header.variant = context_variant_from_u8(bytes[12]);
  p.header.latent_bound = bytes[13];
  p.header.hyper_bound = bytes[14];
  p.header.pad_right = bytes[15];
  p.header.pad_bottom = bytes[16];
  const std::uint32_t hyper_len = get_u32(bytes, 17);
  if (kHeaderSize + static_cast<size_t>(hyper_len) > bytes.size())
    throw std::runtime_error("bitstream: hyper segment length overruns payload");
  p.hyper.assign(bytes.begin() + kHeaderSize, bytes.begin() + kHeaderSize + hyper_len);
  p.main.assign(bytes.begin() + kHeaderSize + hyper_len, bytes.end());
  return p;
}

}  // namespace nlaic
