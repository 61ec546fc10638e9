#include <doctest.h>

#include <cmath>

#include "nlaic/detmath.h"
#include "nlaic/rng.h"

using namespace nlaic;

namespace {
double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }
}  // namespace

TEST_CASE("det transcendentals track libm to near ulp level") {
  Rng rng(11);
  for (int i = 0; i < 20000; ++i) {
    const double x = rng.uniform(-40.0, 40.0);
    CHECK(rel(det_exp(x), std::exp(x)) < 1e-14);
    CHECK(rel(det_tanh(x), std::tanh(x)) < 1e-13);
    CHECK(rel(det_softplus(x), std::log1p(std::exp(x))) < 1e-13);
    const double p = rng.uniform(1e-9, 1e7);
    CHECK(rel(det_log(p), std::log(p)) < 1e-14);
    const double e = rng.uniform(-7.0, 7.0);
    CHECK(rel(det_erf(e), std::erf(e)) < 1e-13);
    CHECK(rel(det_erfc(e), std::erfc(e)) < 1e-12);
  }
}

TEST_CASE("normal cdf tails and fixed points") {
  CHECK(det_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rel(det_normal_cdf(-8.0), 0.5 * std::erfc(8.0 / std::sqrt(2.0))) < 1e-12);
  CHECK(det_normal_cdf(40.0) == 1.0);
  CHECK(det_normal_cdf(-40.0) >= 0.0);
  CHECK(det_normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-14));
}

TEST_CASE("sigmoid saturates inside the open interval") {
  CHECK(det_sigmoid(0.0) == 0.5);
  CHECK(det_sigmoid(1000.0) < 1.0);
  CHECK(det_sigmoid(1000.0) > 0.999999);
  CHECK(det_sigmoid(-1000.0) > 0.0);
  CHECK(det_sigmoid(-1000.0) < 1e-100);
}

TEST_CASE("det_log2 of powers of two is exact to 1 ulp") {
  for (int k = -30; k <= 30; ++k) CHECK(det_log2(std::ldexp(1.0, k)) == doctest::Approx(k).epsilon(1e-14));
}
