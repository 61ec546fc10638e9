#ifndef NLAIC_DETMATH_H_
#define NLAIC_DETMATH_H_

// Deterministic replacements for the libm transcendentals used in network
// forward passes and probability evaluation. libm implementations differ
// across platforms at the ulp level; a decoder must reproduce the encoder's
// CDF tables bit-exactly, so every float that can reach the entropy coder is
// computed through these fixed algorithms instead. Plain IEEE-754 double
// arithmetic only (builds disable FMA contraction).

namespace nlaic {

double det_exp(double x);
double det_expm1(double x);
double det_log(double x);
double det_log1p(double x);
double det_tanh(double x);
double det_softplus(double x);
double det_erf(double x);
double det_erfc(double x);

// Saturates into the open interval (0,1): never returns exactly 0 or 1.
double det_sigmoid(double x);

// Standard normal CDF/density, tail-accurate via erfc.
double det_normal_cdf(double x);
double det_normal_pdf(double x);

double det_log2(double x);

}  // namespace nlaic

#endif  // NLAIC_DETMATH_H_
