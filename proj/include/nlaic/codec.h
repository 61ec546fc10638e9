#ifndef NLAIC_CODEC_H_
#define NLAIC_CODEC_H_

#include <cstdint>
#include <span>
#include <vector>

#include "nlaic/bitstream.h"
#include "nlaic/model.h"

namespace nlaic {

struct EncodeResult {
  std::vector<std::uint8_t> bytes;
  double estimated_bpp = 0.0;  // header bits + quantized-table self-information
  double actual_bpp = 0.0;     // 8 * filesize / (W * H)
  size_t hyper_bytes = 0;
  size_t main_bytes = 0;
  LatentVolume latent_symbols;
  LatentVolume hyper_symbols;
  BitstreamHeader header;
};

// Encodes an RGB image in [0,1]. Dims are reflection-padded to the model's
// 64-pixel grid; the original dims and padding go in the header. The active
// context variant is the model's.
EncodeResult encode_image(const Tensor& img, const CodecModel& model, int quality);

// Re-encode from known symbol planes (what a decoder reconstructs); with the
// same model this reproduces an encode_image bitstream byte for byte.
EncodeResult encode_from_symbols(const LatentVolume& latents, const LatentVolume& hyper, const CodecModel& model,
                                 const BitstreamHeader& header);

enum class DecodeSchedule {
  kAuto,        // per-channel batching for channel_only, per-row for no_left
  kSequential,  // force symbol-by-symbol prediction
};

struct DecodeResult {
  Tensor image;  // [3,H,W] unpadded, clamped to [0,1]
  LatentVolume latent_symbols;
  LatentVolume hyper_symbols;
  BitstreamHeader header;
};

DecodeResult decode_bitstream(std::span<const std::uint8_t> bytes, const CodecModel& model,
                              DecodeSchedule schedule = DecodeSchedule::kAuto);

struct RateBreakdown {
  size_t header_bytes = 0;
  size_t hyper_bytes = 0;
  size_t main_bytes = 0;
  double header_share = 0.0;  // percentages, sum to 100
  double hyper_share = 0.0;
  double main_share = 0.0;
};

RateBreakdown rate_breakdown(std::span<const std::uint8_t> bytes);

// Symmetric (edge-inclusive) reflection padding on the right/bottom edges.
Tensor pad_reflect(const Tensor& img, int multiple, int* pad_right, int* pad_bottom);
Tensor crop_top_left(const Tensor& img, int height, int width);

}  // namespace nlaic

#endif  // NLAIC_CODEC_H_
