#include "nlaic/entropy.h"

#include <cmath>
#include <stdexcept>

#include "nlaic/detmath.h"

namespace nlaic {

std::string to_string(ContextVariant v) {
  switch (v) {
    case ContextVariant::kHyperOnly:
      return "hyper_only";
    case ContextVariant::kChannelOnly:
      return "channel_only";
    case ContextVariant::kNoLeft:
      return "no_left";
    case ContextVariant::kFullCausal:
      return "full_causal";
  }
  return "?";
}

ContextVariant context_variant_from_u8(unsigned v) {
  if (v > 3) throw std::invalid_argument("unknown context variant code " + std::to_string(v));
  return static_cast<ContextVariant>(v);
}

ContextVariant context_variant_from_string(const std::string& s) {
  for (unsigned v = 0; v <= 3; ++v)
    if (s == to_string(static_cast<ContextVariant>(v))) return static_cast<ContextVariant>(v);
  throw std::invalid_argument("unknown context variant \"" + s +
                              "\" (expected hyper_only|channel_only|no_left|full_causal)");
}

MaskVariant mask_variant(ContextVariant v) {
  switch (v) {
    case ContextVariant::kChannelOnly:
      return MaskVariant::kChannelOnly;
    case ContextVariant::kNoLeft:
      return MaskVariant::kNoLeft;
    case ContextVariant::kFullCausal:
      return MaskVariant::kFullCausal;
    case ContextVariant::kHyperOnly:
      break;
  }
  throw std::invalid_argument("hyper_only has no masked convolution");
}

// ---------------------------------------------------------------------------
// Factorized density
// ---------------------------------------------------------------------------

namespace {
constexpr int kWidths[5] = {1, 3, 3, 3, 1};
constexpr double kInvLn2 = 1.4426950408889634074;
constexpr double kProbFloor = 1e-12;
}  // namespace

FactorizedDensity FactorizedDensity::make(ParamStore& ps, const std::string& prefix, int channels, Rng& rng) {
  FactorizedDensity d;
  d.channels = channels;
  const double scale = 1.7782794100389228;  // 10^(1/4), overall init spread 10
  for (int k = 0; k < 4; ++k) {
    const int wi = kWidths[k], wo = kWidths[k + 1];
    const double minit = det_log(det_expm1(1.0 / (scale * wo)));
    d.m[k] = ps.create(prefix + ".m" + std::to_string(k), Tensor::full({channels, wo, wi}, minit));
    Tensor bias({channels, wo});
    for (std::int64_t i = 0; i < bias.size(); ++i) bias[i] = rng.uniform(-0.5, 0.5);
    d.b[k] = ps.create(prefix + ".b" + std::to_string(k), std::move(bias));
    if (k < 3) d.a[k] = ps.create(prefix + ".a" + std::to_string(k), Tensor::zeros({channels, wo}));
  }
  return d;
}

double FactorizedDensity::cdf(int channel, double x) const {
  double cur[3] = {x, 0.0, 0.0};
  double nxt[3];
  for (int k = 0; k < 4; ++k) {
    const int wi = kWidths[k], wo = kWidths[k + 1];
    const double* M = m[k]->value.data() + static_cast<std::int64_t>(channel) * wo * wi;
    const double* B = b[k]->value.data() + static_cast<std::int64_t>(channel) * wo;
    for (int o = 0; o < wo; ++o) {
      double acc = B[o];
      for (int i = 0; i < wi; ++i) acc += det_softplus(M[o * wi + i]) * cur[i];
      nxt[o] = acc;
    }
    if (k < 3) {
      const double* A = a[k]->value.data() + static_cast<std::int64_t>(channel) * wo;
      for (int o = 0; o < wo; ++o) nxt[o] += det_tanh(A[o]) * det_tanh(nxt[o]);
    }
    for (int o = 0; o < wo; ++o) cur[o] = nxt[o];
  }
  return det_sigmoid(cur[0]);
}

NodeRef FactorizedDensity::cdf_node(const NodeRef& x) const {
  const int C = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (C != channels) throw std::invalid_argument("factorized cdf: channel mismatch");
  const int N = h * w;
  std::vector<NodeRef> per_channel;
  per_channel.reserve(static_cast<size_t>(C));
  for (int c = 0; c < C; ++c) {
    NodeRef cur = ag::reshape(ag::slice0(x, c, c + 1), {1, N});
    for (int k = 0; k < 4; ++k) {
      const int wi = kWidths[k], wo = kWidths[k + 1];
      auto W = ag::softplus(ag::reshape(ag::slice0(m[k], c, c + 1), {wo, wi}));
      auto B = ag::reshape(ag::slice0(b[k], c, c + 1), {wo});
      cur = ag::linear(W, cur, B);
      if (k < 3) {
        auto A = ag::tanh_(ag::reshape(ag::slice0(a[k], c, c + 1), {wo}));
        auto Abc = ag::reshape(ag::broadcast_chw(A, 1, N), {wo, N});
        cur = ag::add(cur, ag::mul(Abc, ag::tanh_(cur)));
      }
    }
    per_channel.push_back(ag::sigmoid(cur));
  }
  return ag::reshape(ag::concat0(per_channel), {C, h, w});
}

std::vector<double> FactorizedDensity::pmf(int channel, int bound) const {
  const int n = 2 * bound + 1;
  std::vector<double> edges(static_cast<size_t>(n - 1));
  for (int k = -bound; k < bound; ++k)
    edges[static_cast<size_t>(k + bound)] = cdf(channel, static_cast<double>(k) + 0.5);
  std::vector<double> p(static_cast<size_t>(n));
  if (n == 1) {
    p[0] = 1.0;
    return p;
  }
  p[0] = edges[0];
  for (int i = 1; i < n - 1; ++i) p[static_cast<size_t>(i)] = edges[static_cast<size_t>(i)] - edges[static_cast<size_t>(i - 1)];
  p[static_cast<size_t>(n - 1)] = 1.0 - edges[static_cast<size_t>(n - 2)];
  return p;
}

// ---------------------------------------------------------------------------
// Context model
// ---------------------------------------------------------------------------

ContextModel ContextModel::make(ParamStore& ps, const std::string& prefix, int kernel_size, int fusion_width,
                                Rng& rng) {
  if (kernel_size % 2 == 0) throw std::invalid_argument("context kernel must be odd");
  ContextModel cm;
  cm.fusion_width = fusion_width;
  // Zero-initialized masked kernel: a fresh causal model starts exactly at
  // the hyperprior-only predictor, which is also the refinement warm start.
  cm.kernel = ps.create(prefix + ".kernel", Tensor::zeros({kernel_size, kernel_size, kernel_size}));
  cm.bias = ps.create(prefix + ".bias", Tensor::zeros({1}));
  Tensor w1({fusion_width, 3});
  const double s1 = std::sqrt(2.0 / 3.0);
  for (std::int64_t i = 0; i < w1.size(); ++i) w1[i] = s1 * rng.normal();
  cm.w1 = ps.create(prefix + ".f1.w", std::move(w1));
  cm.b1 = ps.create(prefix + ".f1.b", Tensor::zeros({fusion_width}));
  Tensor w2({2, fusion_width});
  const double s2 = std::sqrt(2.0 / fusion_width);
  for (std::int64_t i = 0; i < w2.size(); ++i) w2[i] = s2 * rng.normal();
  cm.w2 = ps.create(prefix + ".f2.w", std::move(w2));
  cm.b2 = ps.create(prefix + ".f2.b", Tensor::zeros({2}));
  return cm;
}

void context_predict_at(const ContextModel& cm, const MaskTaps& taps, ContextVariant v, const Tensor& latent,
                        const Tensor& hyper, int c, int i, int j, double* mu, double* sigma) {
  const int C = latent.dim(0);
  double ctx = 0.0;
  if (v != ContextVariant::kHyperOnly)
    ctx = masked_conv3d_at(latent, cm.kernel->value, cm.bias->value[0], taps, c, i, j);
  const double h1 = hyper.at3(c, i, j);
  const double h2 = hyper.at3(C + c, i, j);
  const int F = cm.fusion_width;
  const double* W1 = cm.w1->value.data();
  const double* B1 = cm.b1->value.data();
  const double* W2 = cm.w2->value.data();
  const double* B2 = cm.b2->value.data();
  double out[2];
  for (int r = 0; r < 2; ++r) out[r] = B2[r];
  for (int f = 0; f < F; ++f) {
    double hf = B1[f] + W1[f * 3 + 0] * ctx + W1[f * 3 + 1] * h1 + W1[f * 3 + 2] * h2;
    if (hf < 0.0) hf = 0.0;
    out[0] += W2[f] * hf;
    out[1] += W2[F + f] * hf;
  }
  *mu = out[0];
  double s = std::min(kSigmaLogClamp, std::max(-kSigmaLogClamp, out[1]));
  *sigma = det_exp(s);
}

EntropyParams context_predict(const ContextModel& cm, ContextVariant v, const Tensor& latent_unscaled,
                              const Tensor& hyper_feats) {
  const int C = latent_unscaled.dim(0), h = latent_unscaled.dim(1), w = latent_unscaled.dim(2);
  if (hyper_feats.rank() != 3 || hyper_feats.dim(0) != 2 * C || hyper_feats.dim(1) != h || hyper_feats.dim(2) != w)
    throw std::invalid_argument("context_predict: hyper features " + hyper_feats.shape_str() +
                                " do not align with latent " + latent_unscaled.shape_str());
  MaskTaps taps;
  if (v != ContextVariant::kHyperOnly) {
    const int k = cm.kernel->value.dim(0);
    taps = masked_taps(mask_variant(v), k, k, k);
  }
  EntropyParams ep;
  ep.mu = Tensor::zeros({C, h, w});
  ep.sigma = Tensor::zeros({C, h, w});
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double mu, sigma;
        context_predict_at(cm, taps, v, latent_unscaled, hyper_feats, c, i, j, &mu, &sigma);
        ep.mu.at3(c, i, j) = mu;
        ep.sigma.at3(c, i, j) = sigma;
      }
  return ep;
}

EntropyParamNodes context_predict_node(const ContextModel& cm, ContextVariant v, const NodeRef& latent,
                                       const NodeRef& hyper) {
  const int C = latent->value.dim(0), h = latent->value.dim(1), w = latent->value.dim(2);
  const int N = C * h * w;
  NodeRef f0;
  if (v == ContextVariant::kHyperOnly) {
    f0 = constant(Tensor::zeros({1, N}));
  } else {
    f0 = ag::reshape(ag::masked_conv3d(latent, cm.kernel, cm.bias, mask_variant(v)), {1, N});
  }
  auto h1 = ag::reshape(ag::slice0(hyper, 0, C), {1, N});
  auto h2 = ag::reshape(ag::slice0(hyper, C, 2 * C), {1, N});
  auto feats = ag::concat0({f0, h1, h2});
  auto hid = ag::relu(ag::linear(cm.w1, feats, cm.b1));
  auto out = ag::linear(cm.w2, hid, cm.b2);
  EntropyParamNodes ep;
  ep.mu = ag::reshape(ag::slice0(out, 0, 1), {C, h, w});
  ep.sigma = ag::exp_(ag::clamp(ag::reshape(ag::slice0(out, 1, 2), {C, h, w}), -kSigmaLogClamp, kSigmaLogClamp));
  return ep;
}

// ---------------------------------------------------------------------------
// Gaussian integer pmf and rate terms
// ---------------------------------------------------------------------------

double gaussian_bin_prob(int k, double mu, double sigma, double a, double b) {
  const double hi = ((static_cast<double>(k) + 0.5 - b) / a - mu) / sigma;
  const double lo = ((static_cast<double>(k) - 0.5 - b) / a - mu) / sigma;
  return det_normal_cdf(hi) - det_normal_cdf(lo);
}

std::vector<double> gaussian_pmf(double mu, double sigma, double a, double b, int bound) {
  const int n = 2 * bound + 1;
  std::vector<double> p(static_cast<size_t>(n));
  if (n == 1) {
    p[0] = 1.0;
    return p;
  }
  std::vector<double> edges(static_cast<size_t>(n - 1));
  for (int k = -bound; k < bound; ++k) {
    const double u = ((static_cast<double>(k) + 0.5 - b) / a - mu) / sigma;
    edges[static_cast<size_t>(k + bound)] = det_normal_cdf(u);
  }
  p[0] = edges[0];
  for (int i = 1; i < n - 1; ++i) p[static_cast<size_t>(i)] = edges[static_cast<size_t>(i)] - edges[static_cast<size_t>(i - 1)];
  p[static_cast<size_t>(n - 1)] = 1.0 - edges[static_cast<size_t>(n - 2)];
  return p;
}

NodeRef gaussian_rate_bits_node(const NodeRef& x_unscaled_noisy, const EntropyParamNodes& ep,
                                const NodeRef& half_width_chw) {
  auto hi = ag::divide(ag::sub(ag::add(x_unscaled_noisy, half_width_chw), ep.mu), ep.sigma);
  auto lo = ag::divide(ag::sub(ag::sub(x_unscaled_noisy, half_width_chw), ep.mu), ep.sigma);
  auto p = ag::clamp_min_passthrough(ag::sub(ag::normal_cdf(hi), ag::normal_cdf(lo)), kProbFloor);
  return ag::mul_scalar(ag::sum(ag::log_(p)), -kInvLn2);
}

NodeRef factorized_rate_bits_node(const FactorizedDensity& d, const NodeRef& z_noisy) {
  auto hi = d.cdf_node(ag::add_scalar(z_noisy, 0.5));
  auto lo = d.cdf_node(ag::add_scalar(z_noisy, -0.5));
  auto p = ag::clamp_min_passthrough(ag::sub(hi, lo), kProbFloor);
  return ag::mul_scalar(ag::sum(ag::log_(p)), -kInvLn2);
}

double estimate_rate_bits(const std::vector<double>& probs) {
  double acc = 0.0;
  for (double p : probs) {
    if (!(p > 0.0)) throw std::runtime_error("estimate_rate: zero-probability symbol (modeling failure)");
    acc += det_log2(p);
  }
  return -acc;
}

}  // namespace nlaic
