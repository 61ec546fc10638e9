#ifndef NLAIC_ENTROPY_H_
#define NLAIC_ENTROPY_H_

#include <cstdint>
#include <string>
#include <vector>

#include "nlaic/autograd.h"
#include "nlaic/nn.h"
#include "nlaic/quant.h"

namespace nlaic {

// Which causal neighbors the context model may read. Exactly one is active
// per bitstream (header field).
enum class ContextVariant : std::uint8_t {
  kHyperOnly = 0,
  kChannelOnly = 1,
  kNoLeft = 2,
  kFullCausal = 3,
};

std::string to_string(ContextVariant v);
ContextVariant context_variant_from_u8(unsigned v);
ContextVariant context_variant_from_string(const std::string& s);
MaskVariant mask_variant(ContextVariant v);  // rejects kHyperOnly

// Per-channel monotone CDF: depth-4/width-3 composition of affine maps with
// softplus-positive weights and bounded tanh nonlinearities, sigmoid on top.
struct FactorizedDensity {
  int channels = 0;
  NodeRef m[4];  // [C, w_out, w_in], widths 1-3-3-3-1
  NodeRef b[4];  // [C, w_out]
  NodeRef a[3];  // [C, w_out]

  static FactorizedDensity make(ParamStore& ps, const std::string& prefix, int channels, Rng& rng);

  double cdf(int channel, double x) const;
  NodeRef cdf_node(const NodeRef& x) const;  // x: [C,h,w]
  // Integer pmf over [-bound, bound]; edge symbols absorb the tails.
  std::vector<double> pmf(int channel, int bound) const;
};

// Single shared masked 3D kernel + per-element fusion head. The fusion is a
// 1x1x1 (per latent element) MLP over [ctx, hyper_mu_feat, hyper_sigma_feat],
// which is what keeps (mu,sigma) at a position a function of its own causal
// window only.
struct ContextModel {
  int fusion_width = 0;
  NodeRef kernel;  // [k,k,k]
  NodeRef bias;    // [1]
  NodeRef w1, b1;  // [F,3], [F]
  NodeRef w2, b2;  // [2,F], [2]

  static ContextModel make(ParamStore& ps, const std::string& prefix, int kernel_size, int fusion_width, Rng& rng);
};

struct EntropyParams {
  Tensor mu, sigma;  // [C,h,w]; sigma in [1e-6, 1e6]
};

struct EntropyParamNodes {
  NodeRef mu, sigma;
};

inline constexpr double kSigmaLogClamp = 13.8;

// Per-position prediction reading only the variant's causal window of
// `latent` (unscaled domain). Identical arithmetic on the encode batch pass
// and the symbol-by-symbol decode pass.
void context_predict_at(const ContextModel& cm, const MaskTaps& taps, ContextVariant v, const Tensor& latent,
                        const Tensor& hyper, int c, int i, int j, double* mu, double* sigma);

EntropyParams context_predict(const ContextModel& cm, ContextVariant v, const Tensor& latent_unscaled,
                              const Tensor& hyper_feats);

// Tape version for training (latent is the noise-quantized proxy).
EntropyParamNodes context_predict_node(const ContextModel& cm, ContextVariant v, const NodeRef& latent,
                                       const NodeRef& hyper);

// Conditional Gaussian integer pmf with the scaling-adjusted bin width:
// p(k) = Phi(((k+0.5-b)/a - mu)/sigma) - Phi(((k-0.5-b)/a - mu)/sigma).
double gaussian_bin_prob(int k, double mu, double sigma, double a, double b);
std::vector<double> gaussian_pmf(double mu, double sigma, double a, double b, int bound);

// Differentiable rate terms (bits) for the uniform-noise training proxies.
NodeRef gaussian_rate_bits_node(const NodeRef& x_unscaled_noisy, const EntropyParamNodes& ep,
                                const NodeRef& half_width_chw);
NodeRef factorized_rate_bits_node(const FactorizedDensity& d, const NodeRef& z_noisy);

// -sum log2 p over modeled probabilities; zero or negative probability is a
// modeling failure.
double estimate_rate_bits(const std::vector<double>& probs);

}  // namespace nlaic

#endif  // NLAIC_ENTROPY_H_
