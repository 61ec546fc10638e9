#ifndef NLAIC_QUANT_H_
#define NLAIC_QUANT_H_

#include <vector>

#include "nlaic/rng.h"
#include "nlaic/tensor.h"

namespace nlaic {

enum class QuantizeMode { kNoise, kRound };

// Rounding rule for the whole codec: half away from zero. Bitstreams depend
// on it.
double round_half_away(double x);

// kNoise adds i.i.d. U[-0.5,0.5) (training proxy only); kRound quantizes to
// integers.
Tensor quantize(const Tensor& x, QuantizeMode mode, Rng* rng = nullptr);

// Per-channel affine quality scaling (SF/ISF). quality 0 is the identity.
struct QualityScalingSet {
  Tensor a, b;  // [C], a > 0
  int quality = 0;

  static QualityScalingSet identity(int channels, int quality = 0);
  int channels() const { return a.dim(0); }
  void validate() const;
};

Tensor apply_sf(const Tensor& x, const QualityScalingSet& sf);
Tensor apply_isf(const Tensor& b_hat, const QualityScalingSet& sf);

// Integer-quantized latent plane plus its alphabet bound L = max|symbol|.
struct LatentVolume {
  std::vector<int> shape;  // [C,h,w]
  std::vector<int> symbols;
  int bound = 0;

  int channels() const { return shape[0]; }
  Tensor dequantized(const QualityScalingSet& sf) const;  // ISF applied
};

LatentVolume quantize_symbols(const Tensor& scaled);

}  // namespace nlaic

#endif  // NLAIC_QUANT_H_
