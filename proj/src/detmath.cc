#include "nlaic/detmath.h"

#include <cmath>
#include <limits>

namespace nlaic {

namespace {

constexpr double kLog2E = 1.4426950408889634074;
constexpr double kLn2Hi = 6.93147180369123816490e-01;
constexpr double kLn2Lo = 1.90821492927058770002e-10;
constexpr double kInvLn2 = 1.4426950408889634074;
constexpr double kSqrt1_2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// exp(r) for |r| <= 0.5*ln2, Taylor to degree 14 (rel. err < 1 ulp there).
double exp_poly(double r) {
  double p = 1.0 / 87178291200.0;  // 1/14!
  p = p * r + 1.0 / 6227020800.0;
  p = p * r + 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 1.0 / 2.0;
  p = p * r + 1.0;
  p = p * r + 1.0;
  return p;
}

// 2*atanh(s)/ (2s) tail: sum_k z^k/(2k+1), z = s^2, |s| <= 0.24.
double atanh_series(double z) {
  double w = 1.0 / 29.0;
  w = w * z + 1.0 / 27.0;
  w = w * z + 1.0 / 25.0;
  w = w * z + 1.0 / 23.0;
  w = w * z + 1.0 / 21.0;
  w = w * z + 1.0 / 19.0;
  w = w * z + 1.0 / 17.0;
  w = w * z + 1.0 / 15.0;
  w = w * z + 1.0 / 13.0;
  w = w * z + 1.0 / 11.0;
  w = w * z + 1.0 / 9.0;
  w = w * z + 1.0 / 7.0;
  w = w * z + 1.0 / 5.0;
  w = w * z + 1.0 / 3.0;
  w = w * z + 1.0;
  return w;
}

}  // namespace

double det_exp(double x) {
  if (std::isnan(x)) return x;
  if (x > 709.782712893384) return std::numeric_limits<double>::infinity();
  if (x < -745.2) return 0.0;
  double k = std::floor(x * kLog2E + 0.5);
  double r = (x - k * kLn2Hi) - k * kLn2Lo;
  return std::ldexp(exp_poly(r), static_cast<int>(k));
}

double det_expm1(double x) {
  if (x > 0.5 || x < -0.5) return det_exp(x) - 1.0;
  // Taylor sum_{n>=1} x^n/n!, degree 18.
  double p = 1.0 / 6402373705728000.0;  // 1/18!
  p = p * x + 1.0 / 355687428096000.0;
  p = p * x + 1.0 / 20922789888000.0;
  p = p * x + 1.0 / 1307674368000.0;
  p = p * x + 1.0 / 87178291200.0;
  p = p * x + 1.0 / 6227020800.0;
  p = p * x + 1.0 / 479001600.0;
  p = p * x + 1.0 / 39916800.0;
  p = p * x + 1.0 / 3628800.0;
  p = p * x + 1.0 / 362880.0;
  p = p * x + 1.0 / 40320.0;
  p = p * x + 1.0 / 5040.0;
  p = p * x + 1.0 / 720.0;
  p = p * x + 1.0 / 120.0;
  p = p * x + 1.0 / 24.0;
  p = p * x + 1.0 / 6.0;
  p = p * x + 1.0 / 2.0;
  p = p * x + 1.0;
  return p * x;
}

double det_log(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (x == 0.0) return -std::numeric_limits<double>::infinity();
  if (std::isinf(x)) return x;
  int e = 0;
  double m = std::frexp(x, &e);  // m in [0.5, 1)
  if (m < kSqrt1_2) {
    m *= 2.0;
    e -= 1;
  }
  double f = m - 1.0;
  double s = f / (2.0 + f);
  double logm = 2.0 * s * atanh_series(s * s);
  double ke = static_cast<double>(e);
  return ke * kLn2Hi + (ke * kLn2Lo + logm);
}

double det_log1p(double x) {
  if (x < -0.375 || x > 0.375) return det_log(1.0 + x);
  double s = x / (2.0 + x);
  return 2.0 * s * atanh_series(s * s);
}

double det_tanh(double x) {
  double a = x < 0.0 ? -x : x;
  if (a >= 22.0) return x < 0.0 ? -1.0 : 1.0;
  double em = det_expm1(-2.0 * a);
  double t = -em / (2.0 + em);
  return x < 0.0 ? -t : t;
}

double det_softplus(double x) {
  if (x > 36.0) return x + det_exp(-x);
  if (x < -36.0) return det_exp(x);
  return det_log1p(det_exp(x));
}

double det_sigmoid(double x) {
  double r;
  if (x >= 0.0) {
    r = 1.0 / (1.0 + det_exp(-x));
  } else {
    double e = det_exp(x);
    r = e / (1.0 + e);
  }
  // Keep the contract m in (0,1) even where the true value rounds to an end.
  constexpr double kLo = 2.2250738585072014e-308;
  if (r >= 1.0) r = 0.99999999999999988898;  // nextafter(1, 0)
  if (r <= 0.0) r = kLo;
  return r;
}

// Rational erf/erfc after W. J. Cody's CALERF (netlib specfun), with the
// exponentials routed through det_exp.
namespace {

constexpr double kErfA[5] = {3.16112374387056560e00, 1.13864154151050156e02,
                             3.77485237685302021e02, 3.20937758913846947e03,
                             1.85777706184603153e-1};
constexpr double kErfB[4] = {2.36012909523441209e01, 2.44024637934444173e02,
                             1.28261652607737228e03, 2.84423683343917062e03};
constexpr double kErfC[9] = {5.64188496988670089e-1, 8.88314979438837594e00,
                             6.61191906371416295e01, 2.98635138197400131e02,
                             8.81952221241769090e02, 1.71204761263407058e03,
                             2.05107837782607147e03, 1.23033935479799725e03,
                             2.15311535474403846e-8};
constexpr double kErfD[8] = {1.57449261107098347e01, 1.17693950891312499e02,
                             5.37181101862009858e02, 1.62138957456669019e03,
                             3.29079923573345963e03, 4.36261909014324716e03,
                             3.43936767414372164e03, 1.23033935480374942e03};
constexpr double kErfP[6] = {3.05326634961232344e-1, 3.60344899949804439e-1,
                             1.25781726111229246e-1, 1.60837851487422766e-2,
                             6.58749161529837803e-4, 1.63153871373020978e-2};
constexpr double kErfQ[5] = {2.56852019228982242e00, 1.87295284992346047e00,
                             5.27905102951428412e-1, 6.05183413124413191e-2,
                             2.33520497626869185e-3};
constexpr double kSqrPi = 5.6418958354775628695e-1;

// exp(-y*y) split so the squared term is computed on a 1/16 grid exactly.
double exp_nyy(double y) {
  double ysq = std::trunc(y * 16.0) / 16.0;
  double del = (y - ysq) * (y + ysq);
  return det_exp(-ysq * ysq) * det_exp(-del);
}

// erfc(y) for y > 0.46875.
double erfc_tail(double y) {
  if (y <= 4.0) {
    double xnum = kErfC[8] * y;
    double xden = y;
    for (int i = 0; i < 7; ++i) {
      xnum = (xnum + kErfC[i]) * y;
      xden = (xden + kErfD[i]) * y;
    }
    return exp_nyy(y) * (xnum + kErfC[7]) / (xden + kErfD[7]);
  }
  if (y >= 26.6) return 0.0;
  double ysq = 1.0 / (y * y);
  double xnum = kErfP[5] * ysq;
  double xden = ysq;
  for (int i = 0; i < 4; ++i) {
    xnum = (xnum + kErfP[i]) * ysq;
    xden = (xden + kErfQ[i]) * ysq;
  }
  double r = ysq * (xnum + kErfP[4]) / (xden + kErfQ[4]);
  r = (kSqrPi - r) / y;
  return exp_nyy(y) * r;
}

}  // namespace

double det_erf(double x) {
  double y = x < 0.0 ? -x : x;
  if (y <= 0.46875) {
    double ysq = y > 1.11e-16 ? y * y : 0.0;
    double xnum = kErfA[4] * ysq;
    double xden = ysq;
    for (int i = 0; i < 3; ++i) {
      xnum = (xnum + kErfA[i]) * ysq;
      xden = (xden + kErfB[i]) * ysq;
    }
    return x * (xnum + kErfA[3]) / (xden + kErfB[3]);
  }
  double r = 1.0 - erfc_tail(y);
  return x < 0.0 ? -r : r;
}

double det_erfc(double x) {
  double y = x < 0.0 ? -x : x;
  double r;
  if (y <= 0.46875) {
    r = 1.0 - det_erf(y);
  } else {
    r = erfc_tail(y);
  }
  return x < 0.0 ? 2.0 - r : r;
}

double det_normal_cdf(double x) { return 0.5 * det_erfc(-x * kSqrt1_2); }

double det_normal_pdf(double x) { return kInvSqrt2Pi * det_exp(-0.5 * x * x); }

double det_log2(double x) { return det_log(x) * kInvLn2; }

}  // namespace nlaic
