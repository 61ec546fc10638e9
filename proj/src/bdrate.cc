#include "nlaic/bdrate.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nlaic/detmath.h"

namespace nlaic {

void RDCurve::validate(size_t min_points) const {
  if (points.size() < min_points)
    throw std::invalid_argument("RD curve \"" + label + "\" has " + std::to_string(points.size()) +
                                " points, need at least " + std::to_string(min_points));
  for (size_t i = 0; i + 1 < points.size(); ++i)
    if (!(points[i].bpp < points[i + 1].bpp))
      throw std::invalid_argument("RD curve \"" + label + "\" bpp not strictly increasing at index " +
                                  std::to_string(i + 1));
  for (const auto& p : points)
    if (!(p.bpp > 0.0)) throw std::invalid_argument("RD curve \"" + label + "\": bpp must be positive");
}

namespace {

constexpr double kLn10 = 2.302585092994045684;

double metric_of(const RDPoint& p, BdMetric m) { return m == BdMetric::kPsnr ? p.psnr : p.msssim_db; }

// Cubic least-squares fit of y over centered x; returns coefficients of
// (x - center)^k.
struct Cubic {
  double c[4];
  double center;
  double integral(double lo, double hi) const {
    auto F = [&](double x) {
      const double t = x - center;
      return c[0] * t + c[1] * t * t / 2.0 + c[2] * t * t * t / 3.0 + c[3] * t * t * t * t / 4.0;
    };
    return F(hi) - F(lo);
  }
};

Cubic fit_cubic(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double center = 0.0;
  for (double v : x) center += v;
  center /= static_cast<double>(n);

  double s[7] = {0, 0, 0, 0, 0, 0, 0};
  double t[4] = {0, 0, 0, 0};
  for (size_t i = 0; i < n; ++i) {
    const double xc = x[i] - center;
    double p = 1.0;
    for (int k = 0; k <= 6; ++k) {
      s[k] += p;
      if (k <= 3) t[k] += p * y[i];
      p *= xc;
    }
  }
  double A[4][5];
  for (int r = 0; r < 4; ++r) {
    for (int cc = 0; cc < 4; ++cc) A[r][cc] = s[r + cc];
    A[r][4] = t[r];
  }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::fabs(A[r][col]) > std::fabs(A[piv][col])) piv = r;
    if (std::fabs(A[piv][col]) < 1e-12) throw std::runtime_error("bd_rate: degenerate fit (collinear points)");
    if (piv != col)
      for (int cc = 0; cc <= 4; ++cc) std::swap(A[piv][cc], A[col][cc]);
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = A[r][col] / A[col][col];
      for (int cc = col; cc <= 4; ++cc) A[r][cc] -= f * A[col][cc];
    }
  }
  Cubic out;
  out.center = center;
  for (int r = 0; r < 4; ++r) out.c[r] = A[r][4] / A[r][r];
  return out;
}

}  // namespace

double bd_rate(const RDCurve& anchor, const RDCurve& test, BdMetric metric) {
  anchor.validate(4);
  test.validate(4);

  auto extract = [&](const RDCurve& c, std::vector<double>& q, std::vector<double>& r) {
    for (const auto& p : c.points) {
      q.push_back(metric_of(p, metric));
      r.push_back(det_log(p.bpp) / kLn10);
    }
  };
  std::vector<double> qa, ra, qt, rt;
  extract(anchor, qa, ra);
  extract(test, qt, rt);

  const double lo = std::max(*std::min_element(qa.begin(), qa.end()), *std::min_element(qt.begin(), qt.end()));
  const double hi = std::min(*std::max_element(qa.begin(), qa.end()), *std::max_element(qt.begin(), qt.end()));
  if (!(hi > lo)) throw std::invalid_argument("bd_rate: quality ranges do not overlap");

  const Cubic fa = fit_cubic(qa, ra);
  const Cubic ft = fit_cubic(qt, rt);
  const double avg_diff = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
  return (det_exp(avg_diff * kLn10) - 1.0) * 100.0;
}

}  // namespace nlaic
