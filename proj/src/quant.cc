#include "nlaic/quant.h"

#include <cmath>
#include <stdexcept>

namespace nlaic {

double round_half_away(double x) { return std::round(x); }

Tensor quantize(const Tensor& x, QuantizeMode mode, Rng* rng) {
  Tensor out(x.shape());
  if (mode == QuantizeMode::kRound) {
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = round_half_away(x[i]);
    return out;
  }
  if (!rng) throw std::invalid_argument("quantize: noise mode requires an rng (training only)");
  for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] + (rng->u01() - 0.5);
  return out;
}

QualityScalingSet QualityScalingSet::identity(int channels, int quality) {
  QualityScalingSet s;
  s.a = Tensor::full({channels}, 1.0);
  s.b = Tensor::zeros({channels});
  s.quality = quality;
  return s;
}

void QualityScalingSet::validate() const {
  if (a.rank() != 1 || !a.same_shape(b)) throw std::invalid_argument("scaling set: a and b must be [C]");
  for (std::int64_t i = 0; i < a.size(); ++i)
    if (!(a[i] > 0.0)) throw std::invalid_argument("scaling set: a must be positive in every channel");
}

namespace {

void check_channels(const Tensor& x, const QualityScalingSet& sf, const char* op) {
  if (x.rank() != 3 || x.dim(0) != sf.channels())
    throw std::invalid_argument(std::string(op) + ": tensor " + x.shape_str() + " does not match scaling channels " +
                                std::to_string(sf.channels()));
}

}  // namespace

Tensor apply_sf(const Tensor& x, const QualityScalingSet& sf) {
  check_channels(x, sf, "apply_sf");
  Tensor out(x.shape());
  const int hw = x.dim(1) * x.dim(2);
  for (int c = 0; c < x.dim(0); ++c) {
    const double ac = sf.a[c], bc = sf.b[c];
    const double* src = x.data() + static_cast<std::int64_t>(c) * hw;
    double* dst = out.data() + static_cast<std::int64_t>(c) * hw;
    for (int i = 0; i < hw; ++i) dst[i] = ac * src[i] + bc;
  }
  return out;
}

Tensor apply_isf(const Tensor& b_hat, const QualityScalingSet& sf) {
  check_channels(b_hat, sf, "apply_isf");
  Tensor out(b_hat.shape());
  const int hw = b_hat.dim(1) * b_hat.dim(2);
  for (int c = 0; c < b_hat.dim(0); ++c) {
    const double ac = sf.a[c], bc = sf.b[c];
    const double* src = b_hat.data() + static_cast<std::int64_t>(c) * hw;
    double* dst = out.data() + static_cast<std::int64_t>(c) * hw;
    for (int i = 0; i < hw; ++i) dst[i] = (src[i] - bc) / ac;
  }
  return out;
}

LatentVolume quantize_symbols(const Tensor& scaled) {
  if (scaled.rank() != 3) throw std::invalid_argument("quantize_symbols: [C,h,w] tensor required");
  LatentVolume v;
  v.shape = scaled.shape();
  v.symbols.resize(static_cast<size_t>(scaled.size()));
  int bound = 0;
  for (std::int64_t i = 0; i < scaled.size(); ++i) {
    int s = static_cast<int>(round_half_away(scaled[i]));
    v.symbols[static_cast<size_t>(i)] = s;
    bound = std::max(bound, std::abs(s));
  }
  v.bound = bound;
  return v;
}

Tensor LatentVolume::dequantized(const QualityScalingSet& sf) const {
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(symbols[static_cast<size_t>(i)]);
  return apply_isf(t, sf);
}

}  // namespace nlaic
