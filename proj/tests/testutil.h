#ifndef NLAIC_TESTS_TESTUTIL_H_
#define NLAIC_TESTS_TESTUTIL_H_

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nlaic/autograd.h"
#include "nlaic/detmath.h"
#include "nlaic/image_io.h"
#include "nlaic/model.h"
#include "nlaic/rng.h"
#include "nlaic/tensor.h"

namespace testutil {

inline nlaic::Tensor rand_tensor(std::vector<int> shape, nlaic::Rng& rng, double lo = -1.0, double hi = 1.0) {
  nlaic::Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Small configuration used throughout the unit tests.
inline nlaic::ArchConfig tiny_arch(nlaic::ContextVariant v = nlaic::ContextVariant::kFullCausal) {
  nlaic::ArchConfig a;
  a.n_channels = 8;
  a.latent_channels = 8;
  a.context_kernel = 3;
  a.fusion_hidden = 12;
  a.variant = v;
  return a;
}

// Procedural photographic-looking test image: smooth gradients, a few
// soft blobs, an edge, and mild texture noise.
inline nlaic::Tensor synth_image(int h, int w, std::uint64_t seed) {
  nlaic::Rng rng(seed);
  const double cx = rng.uniform(0.2, 0.8) * w, cy = rng.uniform(0.2, 0.8) * h;
  const double fx = rng.uniform(1.0, 3.0), fy = rng.uniform(1.0, 3.0);
  const double edge = rng.uniform(0.3, 0.7) * w;
  double base[3], grad[3], amp[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.25, 0.7);
    grad[c] = rng.uniform(-0.25, 0.25);
    amp[c] = rng.uniform(0.05, 0.2);
  }
  nlaic::Tensor img({3, h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double di = (i - cy) / h, dj = (j - cx) / w;
      const double blob = nlaic::det_exp(-8.0 * (di * di + dj * dj));
      const double wave = 0.5 * (std::sin(6.28318 * fx * j / w) + std::sin(6.28318 * fy * i / h));
      const double step = j > edge ? 0.12 : 0.0;
      for (int c = 0; c < 3; ++c) {
        double v = base[c] + grad[c] * (static_cast<double>(i) / h + static_cast<double>(j) / w) +
                   amp[c] * (blob + 0.4 * wave) + step + 0.02 * (rng.u01() - 0.5);
        img.at3(c, i, j) = std::min(1.0, std::max(0.0, v));
      }
    }
  return img;
}

inline std::string make_corpus(const std::string& name, int count, int h, int w, std::uint64_t seed) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / name;
  fs::create_directories(dir);
  for (int k = 0; k < count; ++k) {
    char fname[32];
    std::snprintf(fname, sizeof(fname), "img%03d.ppm", k);
    nlaic::write_image((dir / fname).string(), synth_image(h, w, seed + static_cast<std::uint64_t>(k)));
  }
  return dir.string();
}

// Central finite differences against reverse-mode gradients. `build` must
// reconstruct the scalar loss from the parameters' current values.
inline double max_rel_grad_err(const std::function<nlaic::NodeRef()>& build,
                               const std::vector<nlaic::NodeRef>& params, double h = 1e-5) {
  for (const auto& p : params) p->zero_grad();
  nlaic::NodeRef loss = build();
  nlaic::backward(loss);
  std::vector<nlaic::Tensor> grads;
  for (const auto& p : params) grads.push_back(p->grad.size() ? p->grad : nlaic::Tensor::zeros(p->value.shape()));

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    nlaic::Tensor& v = params[pi]->value;
    for (std::int64_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + h;
      const double up = build()->value[0];
      v[i] = keep - h;
      const double dn = build()->value[0];
      v[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double ad = grads[pi][i];
      const double denom = std::max({std::fabs(fd), std::fabs(ad), 1e-2});
      worst = std::max(worst, std::fabs(fd - ad) / denom);
    }
  }
  return worst;
}

// Plain nested-loop cross-correlation, independent of the library path.
inline nlaic::Tensor conv2d_oracle(const nlaic::Tensor& x, const nlaic::Tensor& k, const nlaic::Tensor& b, int stride,
                                   int pad) {
  const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const int Ho = (H + 2 * pad - kh) / stride + 1, Wo = (W + 2 * pad - kw) / stride + 1;
  nlaic::Tensor out({Cout, Ho, Wo});
  for (int co = 0; co < Cout; ++co)
    for (int oh = 0; oh < Ho; ++oh)
      for (int ow = 0; ow < Wo; ++ow) {
        double acc = b[co];
        for (int ci = 0; ci < Cin; ++ci)
          for (int dh = 0; dh < kh; ++dh)
            for (int dw = 0; dw < kw; ++dw) {
              const int ih = oh * stride - pad + dh, iw = ow * stride - pad + dw;
              if (ih < 0 || iw < 0 || ih >= H || iw >= W) continue;
              acc += k[((static_cast<std::int64_t>(co) * Cin + ci) * kh + dh) * kw + dw] * x.at3(ci, ih, iw);
            }
        out.at3(co, oh, ow) = acc;
      }
  return out;
}

inline double max_abs_diff(const nlaic::Tensor& a, const nlaic::Tensor& b) {
  double m = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace testutil

#endif  // NLAIC_TESTS_TESTUTIL_H_
