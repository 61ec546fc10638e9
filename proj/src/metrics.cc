#include "nlaic/metrics.h"

#include <cmath>
#include <stdexcept>

#include "nlaic/detmath.h"

namespace nlaic {

double psnr(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  double mse = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double d = 255.0 * (a[i] - b[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * det_log2(255.0 * 255.0 / mse) / det_log2(10.0));
}

double msssim_db(double d) {
  if (d >= 1.0) return 99.0;
  return std::min(99.0, -10.0 * det_log2(1.0 - d) / det_log2(10.0));
}

Tensor gaussian_window(int size, double sigma) {
  Tensor w({size, size});
  const int c = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double di = i - c, dj = j - c;
      const double v = det_exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      w[static_cast<std::int64_t>(i) * size + j] = v;
      sum += v;
    }
  for (std::int64_t i = 0; i < w.size(); ++i) w[i] /= sum;
  return w;
}

namespace {

constexpr double kC1 = 0.01 * 0.01;  // (k1*R)^2 with R=1
constexpr double kC2 = 0.03 * 0.03;
constexpr double kCanonicalWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
constexpr int kWindow = 11;

}  // namespace

NodeRef ms_ssim_node(const NodeRef& a, const NodeRef& b, int levels) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument("ms_ssim: shape mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
  if (levels < 1 || levels > 5) throw std::invalid_argument("ms_ssim: levels must be 1..5");
  const int need = (1 << (levels - 1)) * kWindow;
  if (a->value.dim(1) < need || a->value.dim(2) < need)
    throw std::invalid_argument("ms_ssim: input " + a->value.shape_str() + " smaller than minimum " +
                                std::to_string(need) + "x" + std::to_string(need) + " for " + std::to_string(levels) +
                                " levels");
  double wsum = 0.0;
  for (int l = 0; l < levels; ++l) wsum += kCanonicalWeights[l];

  const Tensor win = gaussian_window(kWindow, 1.5);
  NodeRef xa = a, xb = b;
  NodeRef score;
  for (int l = 0; l < levels; ++l) {
    auto mu_a = ag::blur2d_valid(xa, win);
    auto mu_b = ag::blur2d_valid(xb, win);
    auto mu_a2 = ag::mul(mu_a, mu_a);
    auto mu_b2 = ag::mul(mu_b, mu_b);
    auto mu_ab = ag::mul(mu_a, mu_b);
    auto var_a = ag::sub(ag::blur2d_valid(ag::mul(xa, xa), win), mu_a2);
    auto var_b = ag::sub(ag::blur2d_valid(ag::mul(xb, xb), win), mu_b2);
    auto cov = ag::sub(ag::blur2d_valid(ag::mul(xa, xb), win), mu_ab);
    auto cs_map = ag::divide(ag::add_scalar(ag::mul_scalar(cov, 2.0), kC2),
                             ag::add_scalar(ag::add(var_a, var_b), kC2));
    NodeRef term;
    if (l == levels - 1) {
      auto l_map = ag::divide(ag::add_scalar(ag::mul_scalar(mu_ab, 2.0), kC1),
                              ag::add_scalar(ag::add(mu_a2, mu_b2), kC1));
      term = ag::mean(ag::mul(l_map, cs_map));
    } else {
      term = ag::mean(cs_map);
    }
    term = ag::clamp_min_passthrough(term, 1e-9);
    term = ag::pow_const(term, kCanonicalWeights[l] / wsum);
    score = l == 0 ? term : ag::mul(score, term);
    if (l + 1 < levels) {
      xa = ag::avgpool2d_2(xa);
      xb = ag::avgpool2d_2(xb);
    }
  }
  return score;
}

double ms_ssim(const Tensor& a, const Tensor& b, int levels) {
  return ms_ssim_node(constant(a), constant(b), levels)->value[0];
}

}  // namespace nlaic
