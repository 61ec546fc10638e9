#include "nlaic/codec.h"

#include <cmath>
#include <stdexcept>

#include "nlaic/rangecoder.h"

namespace nlaic {

namespace {

// Per-channel factorized tables for the hyper segment, symbols in raster
// (channel-major) order.
class HyperCdfSource : public CdfSource {
 public:
  HyperCdfSource(const FactorizedDensity& d, int bound, int plane) : plane_(plane) {
    tables_.reserve(static_cast<size_t>(d.channels));
    for (int c = 0; c < d.channels; ++c) tables_.push_back(build_cdf(d.pmf(c, bound)));
  }
  const CdfTable& table(size_t index) override { return tables_[index / static_cast<size_t>(plane_)]; }
  double bits(std::span<const int> symbols, int bound) const {
    double acc = 0.0;
    for (size_t i = 0; i < symbols.size(); ++i) acc += table_bits(tables_[i / static_cast<size_t>(plane_)], symbols[i] + bound);
    return acc;
  }

 private:
  int plane_;
  std::vector<CdfTable> tables_;
};

struct SymbolCoord {
  int c, i, j;
};

// Per-symbol conditional Gaussian tables for the main segment. Encode side:
// (mu,sigma) precomputed from the fully reconstructed latent. The table for
// index t is built lazily in stream order.
class MainEncodeSource : public CdfSource {
 public:
  MainEncodeSource(const EntropyParams& ep, const QualityScalingSet& sf, int bound) : ep_(ep), sf_(sf), bound_(bound) {
    hw_ = ep.mu.dim(1) * ep.mu.dim(2);
  }
  const CdfTable& table(size_t index) override {
    const int c = static_cast<int>(index) / hw_;
    table_ = build_cdf(gaussian_pmf(ep_.mu[static_cast<std::int64_t>(index)], ep_.sigma[static_cast<std::int64_t>(index)],
                                    sf_.a[c], sf_.b[c], bound_));
    return table_;
  }
  double bits_for(size_t index, int symbol) {
    return table_bits(table(index), symbol + bound_);
  }

 private:
  const EntropyParams& ep_;
  const QualityScalingSet& sf_;
  int bound_;
  int hw_ = 0;
  CdfTable table_;
};

double image_bpp(size_t bytes, int width, int height) {
  return 8.0 * static_cast<double>(bytes) / (static_cast<double>(width) * static_cast<double>(height));
}

void check_model_match(const BitstreamHeader& h, const CodecModel& model) {
  if (h.latent_channels != model.arch.latent_channels)
    throw std::runtime_error("model mismatch: bitstream carries " + std::to_string(h.latent_channels) +
                             " latent channels, model has " + std::to_string(model.arch.latent_channels));
  if (h.variant != model.arch.variant)
    throw std::runtime_error("model mismatch: bitstream context variant " + to_string(h.variant) +
                             ", model trained for " + to_string(model.arch.variant));
  if (h.quality >= model.num_quality())
    throw std::runtime_error("model mismatch: bitstream quality " + std::to_string(h.quality) +
                             ", model has tables 0.." + std::to_string(model.num_quality() - 1));
}

}  // namespace

Tensor pad_reflect(const Tensor& img, int multiple, int* pad_right, int* pad_bottom) {
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  const int Hp = (H + multiple - 1) / multiple * multiple;
  const int Wp = (W + multiple - 1) / multiple * multiple;
  *pad_right = Wp - W;
  *pad_bottom = Hp - H;
  if (Hp == H && Wp == W) return img;
  auto fold = [](int i, int n) {
    int j = i % (2 * n);
    return j < n ? j : 2 * n - 1 - j;
  };
  Tensor out({C, Hp, Wp});
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < Hp; ++i) {
      const int si = fold(i, H);
      for (int j = 0; j < Wp; ++j) out.at3(c, i, j) = img.at3(c, si, fold(j, W));
    }
  return out;
}

Tensor crop_top_left(const Tensor& img, int height, int width) {
  const int C = img.dim(0);
  if (height > img.dim(1) || width > img.dim(2)) throw std::invalid_argument("crop: target larger than source");
  if (height == img.dim(1) && width == img.dim(2)) return img;
  Tensor out({C, height, width});
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) out.at3(c, i, j) = img.at3(c, i, j);
  return out;
}

EncodeResult encode_from_symbols(const LatentVolume& latents, const LatentVolume& hyper, const CodecModel& model,
                                 const BitstreamHeader& header) {
  const int C = model.arch.latent_channels;
  const QualityScalingSet sf = model.scaling_for(header.quality);

  Tensor z_hat(hyper.shape);
  for (std::int64_t i = 0; i < z_hat.size(); ++i) z_hat[i] = static_cast<double>(hyper.symbols[static_cast<size_t>(i)]);
  const Tensor hyper_feats = model.hyper_decode(z_hat);
  const Tensor x_hat = latents.dequantized(sf);
  const EntropyParams ep = context_predict(model.ctx, model.arch.variant, x_hat, hyper_feats);

  // Hyper segment.
  const int zplane = hyper.shape[1] * hyper.shape[2];
  HyperCdfSource hyper_src(model.density, hyper.bound, zplane);
  std::vector<int> zsyms(hyper.symbols.size());
  for (size_t i = 0; i < zsyms.size(); ++i) zsyms[i] = hyper.symbols[i] + hyper.bound;
  double hyper_bits = hyper_src.bits(hyper.symbols, hyper.bound);
  const std::vector<std::uint8_t> hyper_bytes = rc_encode(zsyms, hyper_src);

  // Main segment.
  MainEncodeSource main_src(ep, sf, latents.bound);
  double main_bits = 0.0;
  RangeEncoder enc;
  for (size_t t = 0; t < latents.symbols.size(); ++t) {
    const CdfTable& tab = main_src.table(t);
    main_bits += table_bits(tab, latents.symbols[t] + latents.bound);
    enc.encode(tab, latents.symbols[t] + latents.bound);
  }
  const std::vector<std::uint8_t> main_bytes = enc.finish();

  EncodeResult r;
  r.header = header;
  r.header.latent_channels = static_cast<std::uint16_t>(C);
  r.header.latent_bound = static_cast<std::uint8_t>(latents.bound);
  r.header.hyper_bound = static_cast<std::uint8_t>(hyper.bound);
  r.bytes = serialize_bitstream(r.header, hyper_bytes, main_bytes);
  r.hyper_bytes = hyper_bytes.size();
  r.main_bytes = main_bytes.size();
  r.latent_symbols = latents;
  r.hyper_symbols = hyper;
  r.estimated_bpp = (8.0 * kHeaderSize + hyper_bits + main_bits) /
                    (static_cast<double>(r.header.width) * static_cast<double>(r.header.height));
  r.actual_bpp = image_bpp(r.bytes.size(), r.header.width, r.header.height);
  return r;
}

EncodeResult encode_image(const Tensor& img, const CodecModel& model, int quality) {
  if (img.rank() != 3 || img.dim(0) != 3)
    throw std::invalid_argument("encode: expected [3,H,W] image, got " + img.shape_str());
  if (img.dim(1) > 0xFFFF || img.dim(2) > 0xFFFF) throw std::invalid_argument("encode: image dims exceed 65535");
  const QualityScalingSet sf = model.scaling_for(quality);

  BitstreamHeader h;
  h.width = static_cast<std::uint16_t>(img.dim(2));
  h.height = static_cast<std::uint16_t>(img.dim(1));
  h.quality = static_cast<std::uint8_t>(quality);
  h.variant = model.arch.variant;
  int pad_r = 0, pad_b = 0;
  const Tensor padded = pad_reflect(img, ArchConfig::kDownsampleFactor, &pad_r, &pad_b);
  h.pad_right = static_cast<std::uint8_t>(pad_r);
  h.pad_bottom = static_cast<std::uint8_t>(pad_b);

  const Tensor x0 = model.main_encode(padded);
  const Tensor z0 = model.hyper_encode(x0);

  LatentVolume hyper = quantize_symbols(z0);
  if (hyper.bound > 255)
    throw std::runtime_error("encode: hyper symbol bound " + std::to_string(hyper.bound) + " exceeds 255");
  LatentVolume latents = quantize_symbols(apply_sf(x0, sf));
  if (latents.bound > 255)
    throw std::runtime_error("encode: latent symbol bound " + std::to_string(latents.bound) + " exceeds 255");

  return encode_from_symbols(latents, hyper, model, h);
}

DecodeResult decode_bitstream(std::span<const std::uint8_t> bytes, const CodecModel& model, DecodeSchedule schedule) {
  ParsedBitstream p = parse_bitstream(bytes);
  check_model_match(p.header, model);
  const int f = ArchConfig::kDownsampleFactor;
  const int Hp = p.header.height + p.header.pad_bottom;
  const int Wp = p.header.width + p.header.pad_right;
  if (Hp % f != 0 || Wp % f != 0) throw std::runtime_error("bitstream: padded dims not on the coding grid");
  const int C = model.arch.latent_channels;
  const int lh = Hp / 16, lw = Wp / 16;
  const int zh = lh / 4, zw = lw / 4;
  const QualityScalingSet sf = model.scaling_for(p.header.quality);

  // Hyper plane.
  HyperCdfSource hyper_src(model.density, p.header.hyper_bound, zh * zw);
  std::vector<int> zsyms = rc_decode(p.hyper, hyper_src, static_cast<size_t>(C) * zh * zw);
  LatentVolume hyper;
  hyper.shape = {C, zh, zw};
  hyper.bound = p.header.hyper_bound;
  hyper.symbols.resize(zsyms.size());
  Tensor z_hat({C, zh, zw});
  for (size_t i = 0; i < zsyms.size(); ++i) {
    hyper.symbols[i] = zsyms[i] - hyper.bound;
    z_hat[static_cast<std::int64_t>(i)] = static_cast<double>(hyper.symbols[i]);
  }
  const Tensor hyper_feats = model.hyper_decode(z_hat);

  // Main plane: sequential arithmetic decoding; (mu,sigma) evaluation is
  // batched along the variant's dependency-free axes unless forced
  // sequential. Both orders read only finalized causal taps, so the
  // predictions are identical.
  const ContextVariant v = p.header.variant;
  const int L = p.header.latent_bound;
  MaskTaps taps;
  if (v != ContextVariant::kHyperOnly) {
    const int kk = model.ctx.kernel->value.dim(0);
    taps = masked_taps(mask_variant(v), kk, kk, kk);
  }
  LatentVolume latents;
  latents.shape = {C, lh, lw};
  latents.bound = L;
  latents.symbols.resize(static_cast<size_t>(C) * lh * lw);
  Tensor x_hat({C, lh, lw});
  Tensor mu_plane({C, lh, lw}), sigma_plane({C, lh, lw});

  RangeDecoder dec(p.main);
  size_t t = 0;
  auto decode_at = [&](int c, int i, int j) {
    CdfTable tab = build_cdf(gaussian_pmf(mu_plane.at3(c, i, j), sigma_plane.at3(c, i, j), sf.a[c], sf.b[c], L));
    const int sym = dec.decode(tab) - L;
    latents.symbols[t++] = sym;
    x_hat.at3(c, i, j) = (static_cast<double>(sym) - sf.b[c]) / sf.a[c];
  };
  auto predict_at = [&](int c, int i, int j) {
    double mu, sigma;
    context_predict_at(model.ctx, taps, v, x_hat, hyper_feats, c, i, j, &mu, &sigma);
    mu_plane.at3(c, i, j) = mu;
    sigma_plane.at3(c, i, j) = sigma;
  };

  const bool seq = schedule == DecodeSchedule::kSequential;
  if (!seq && v == ContextVariant::kHyperOnly) {
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < lh; ++i)
        for (int j = 0; j < lw; ++j) predict_at(c, i, j);
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < lh; ++i)
        for (int j = 0; j < lw; ++j) decode_at(c, i, j);
  } else if (!seq && v == ContextVariant::kChannelOnly) {
    for (int c = 0; c < C; ++c) {
      for (int i = 0; i < lh; ++i)
        for (int j = 0; j < lw; ++j) predict_at(c, i, j);
      for (int i = 0; i < lh; ++i)
        for (int j = 0; j < lw; ++j) decode_at(c, i, j);
    }
  } else if (!seq && v == ContextVariant::kNoLeft) {
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < lh; ++i) {
        for (int j = 0; j < lw; ++j) predict_at(c, i, j);
        for (int j = 0; j < lw; ++j) decode_at(c, i, j);
      }
  } else {
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < lh; ++i)
        for (int j = 0; j < lw; ++j) {
          predict_at(c, i, j);
          decode_at(c, i, j);
        }
  }
  dec.finish();

  DecodeResult r;
  r.header = p.header;
  r.latent_symbols = latents;
  r.hyper_symbols = hyper;
  r.image = crop_top_left(model.main_decode(x_hat), p.header.height, p.header.width);
  return r;
}

RateBreakdown rate_breakdown(std::span<const std::uint8_t> bytes) {
  ParsedBitstream p = parse_bitstream(bytes);
  RateBreakdown b;
  b.header_bytes = kHeaderSize;
  b.hyper_bytes = p.hyper.size();
  b.main_bytes = p.main.size();
  const double total = static_cast<double>(bytes.size());
  b.header_share = 100.0 * static_cast<double>(b.header_bytes) / total;
  b.hyper_share = 100.0 * static_cast<double>(b.hyper_bytes) / total;
  b.main_share = 100.0 - b.header_share - b.hyper_share;
  return b;
}

}  // namespace nlaic
