#ifndef NLAIC_METRICS_H_
#define NLAIC_METRICS_H_

#include "nlaic/autograd.h"

namespace nlaic {

// PSNR on the 8-bit scale for [0,1] images: 10*log10(255^2/MSE_8bit),
// capped at 99 dB (the cap is the reported value for identical inputs).
double psnr(const Tensor& a, const Tensor& b);

// Multiscale SSIM, 11x11 Gaussian window sigma=1.5, canonical per-scale
// weights renormalized to the level count (default 3 for 64-pixel patches).
// Scales beyond the first use 2x2 average pooling.
double ms_ssim(const Tensor& a, const Tensor& b, int levels = 3);
NodeRef ms_ssim_node(const NodeRef& a, const NodeRef& b, int levels = 3);

// Display transform for MS-SSIM scores: -10*log10(1-d), capped at 99 dB.
double msssim_db(double d);

Tensor gaussian_window(int size = 11, double sigma = 1.5);

}  // namespace nlaic

#endif  // NLAIC_METRICS_H_
