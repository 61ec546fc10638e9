#ifndef NLAIC_BITSTREAM_H_
#define NLAIC_BITSTREAM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "nlaic/entropy.h"

namespace nlaic {

// Container layout, version 1 (all integers big-endian):
//   magic "NLC1" | version u8 | width u16 | height u16 | latent channels u16
//   | quality u8 | context variant u8 | latent bound u8 | hyper bound u8
//   | pad right u8 | pad bottom u8 | hyper length u32 | hyper | main
// width/height are the original (unpadded) image dims. Fixed 21-byte header.
inline constexpr size_t kHeaderSize = 21;
inline constexpr std::uint8_t kBitstreamVersion = 1;

struct BitstreamHeader {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint16_t latent_channels = 0;
  std::uint8_t quality = 0;
  ContextVariant variant = ContextVariant::kHyperOnly;
  std::uint8_t latent_bound = 0;
  std::uint8_t hyper_bound = 0;
  std::uint8_t pad_right = 0;
  std::uint8_t pad_bottom = 0;
};

struct ParsedBitstream {
  BitstreamHeader header;
  std::vector<std::uint8_t> hyper;
  std::vector<std::uint8_t> main;
};

std::vector<std::uint8_t> serialize_bitstream(const BitstreamHeader& h, std::span<const std::uint8_t> hyper,
                                              std::span<const std::uint8_t> main);
ParsedBitstream parse_bitstream(std::span<const std::uint8_t> bytes);

}  // namespace nlaic

#endif  // NLAIC_BITSTREAM_H_
