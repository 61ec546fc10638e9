#include <doctest.h>

#include <cmath>

#include "nlaic/nn.h"
#include "testutil.h"

using namespace nlaic;
using testutil::max_abs_diff;
using testutil::rand_tensor;

namespace {

void zero_params(ParamStore& ps) {
  for (auto& [n, p] : ps.entries())
    for (std::int64_t i = 0; i < p->value.size(); ++i) p->value[i] = 0.0;
}

}  // namespace

TEST_CASE("resblock: zero parameters give the exact identity") {
  ParamStore ps;
  Rng rng(1);
  auto rb = make_resblock(ps, "rb", 4, rng);
  zero_params(ps);
  Tensor x = rand_tensor({4, 6, 6}, rng);
  CHECK(max_abs_diff(rb.forward(constant(x))->value, x) == 0.0);
}

TEST_CASE("resblock: shape preserved and composition matches a manual oracle") {
  ParamStore ps;
  Rng rng(2);
  auto rb = make_resblock(ps, "rb", 3, rng);
  Tensor x = rand_tensor({3, 5, 5}, rng);
  auto y = rb.forward(constant(x));
  REQUIRE(y->value.shape() == x.shape());

  Tensor h = testutil::conv2d_oracle(x, rb.c1.w->value, rb.c1.b->value, 1, 1);
  for (std::int64_t i = 0; i < h.size(); ++i) h[i] = std::max(0.0, h[i]);
  Tensor o = testutil::conv2d_oracle(h, rb.c2.w->value, rb.c2.b->value, 1, 1);
  for (std::int64_t i = 0; i < o.size(); ++i) o[i] += x[i];
  CHECK(max_abs_diff(y->value, o) < 1e-12);

  // channel mismatch rejected
  CHECK_THROWS_AS(rb.forward(constant(rand_tensor({2, 5, 5}, rng))), std::invalid_argument);
}

TEST_CASE("nln: single position collapses to Z = Wz g(x) + x") {
  ParamStore ps;
  Rng rng(3);
  auto nln = make_nln(ps, "nln", 5, 1, rng);
  // give w_z content (builder zero-initializes it)
  nln.w_z->value = rand_tensor({5, 5}, rng);
  Tensor x = rand_tensor({5, 1, 1}, rng);
  Tensor z = nln.forward(constant(x))->value;
  // g(x) then Wz then + x, all 5-vectors
  Tensor g({5}), expect({5, 1, 1});
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) g[i] += nln.w_g->value[static_cast<std::int64_t>(i) * 5 + j] * x[j];
  for (int i = 0; i < 5; ++i) {
    double acc = x[i];
    for (int j = 0; j < 5; ++j) acc += nln.w_z->value[static_cast<std::int64_t>(i) * 5 + j] * g[j];
    expect[i] = acc;
  }
  CHECK(max_abs_diff(z, expect) < 1e-12);
}

TEST_CASE("nln: matrix form equals the direct double-sum on random 8x4x4") {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    ParamStore ps;
    auto nln = make_nln(ps, "nln", 8, 1, rng);
    nln.w_z->value = rand_tensor({8, 8}, rng, -0.3, 0.3);
    Tensor x = rand_tensor({8, 4, 4}, rng);
    Tensor z = nln.forward(constant(x))->value;

    // Direct per-position weighted average, plain std::exp.
    const int C = 8, N = 16;
    auto col = [&](const Tensor& m, int idx, int ch) { return m[static_cast<std::int64_t>(ch) * N + idx]; };
    Tensor xf({C, N});
    for (int c = 0; c < C; ++c)
      for (int n = 0; n < N; ++n) xf[static_cast<std::int64_t>(c) * N + n] = x[static_cast<std::int64_t>(c) * N + n];
    auto apply = [&](const Tensor& w, int n, std::vector<double>& out) {
      for (int i = 0; i < C; ++i) {
        out[static_cast<size_t>(i)] = 0.0;
        for (int j = 0; j < C; ++j) out[static_cast<size_t>(i)] += w[static_cast<std::int64_t>(i) * C + j] * col(xf, n, j);
      }
    };
    Tensor expect({C, N});
    std::vector<double> th(C), ph(C), gg(C);
    for (int i = 0; i < N; ++i) {
      apply(nln.w_theta->value, i, th);
      std::vector<double> weights(static_cast<size_t>(N));
      double norm = 0.0;
      for (int j = 0; j < N; ++j) {
        apply(nln.w_phi->value, j, ph);
        double dot = 0.0;
        for (int c = 0; c < C; ++c) dot += th[static_cast<size_t>(c)] * ph[static_cast<size_t>(c)];
        weights[static_cast<size_t>(j)] = std::exp(dot);
        norm += weights[static_cast<size_t>(j)];
      }
      std::vector<double> y(C, 0.0);
      for (int j = 0; j < N; ++j) {
        apply(nln.w_g->value, j, gg);
        for (int c = 0; c < C; ++c) y[static_cast<size_t>(c)] += weights[static_cast<size_t>(j)] / norm * gg[static_cast<size_t>(c)];
      }
      for (int c = 0; c < C; ++c) {
        double acc = col(xf, i, c);
        for (int j = 0; j < C; ++j) acc += nln.w_z->value[static_cast<std::int64_t>(c) * C + j] * y[static_cast<size_t>(j)];
        expect[static_cast<std::int64_t>(c) * N + i] = acc;
      }
    }
    CHECK(max_abs_diff(z, expect) < 1e-9);
  }
}

TEST_CASE("nln: sparse key/value count and shape preservation") {
  ParamStore ps;
  Rng rng(5);
  auto nln = make_nln(ps, "nln", 4, 2, rng);
  Tensor x = rand_tensor({4, 5, 6}, rng);
  CHECK(nln.forward(constant(x))->value.shape() == x.shape());
  // ceil(5/2)*ceil(6/2) pooled keys
  CHECK(ag::maxpool2d(constant(x), 2)->value.shape() == std::vector<int>{4, 3, 3});
  CHECK(ag::maxpool2d(constant(x), 3)->value.shape() == std::vector<int>{4, 2, 2});
}

TEST_CASE("nln: s=1 bit-identical to a dense no-pool evaluation") {
  ParamStore ps;
  Rng rng(6);
  auto nln = make_nln(ps, "nln", 6, 1, rng);
  nln.w_z->value = rand_tensor({6, 6}, rng);
  Tensor x = rand_tensor({6, 4, 4}, rng);
  Tensor a = nln.forward(constant(x))->value;

  // dense form without the pooling call
  const int C = 6, N = 16;
  auto xf = ag::reshape(constant(x), {C, N});
  auto theta = ag::matmul(constant(nln.w_theta->value), xf);
  auto phi = ag::matmul(constant(nln.w_phi->value), xf);
  auto g = ag::matmul(constant(nln.w_g->value), xf);
  auto att = ag::softmax(ag::matmul(ag::transpose2d(theta), phi), 1);
  auto y = ag::matmul(g, ag::transpose2d(att));
  auto dense = ag::add(ag::reshape(ag::matmul(constant(nln.w_z->value), y), {C, 4, 4}), constant(x));
  CHECK(max_abs_diff(a, dense->value) == 0.0);
}

TEST_CASE("attention mask: zero parameters give 0.5 everywhere; range is open (0,1)") {
  ParamStore ps;
  Rng rng(7);
  auto nlam = make_nlam(ps, "m", 4, 1, rng);
  zero_params(ps);
  Tensor x = rand_tensor({4, 8, 8}, rng);
  Tensor m = nlam.attention_mask(constant(x))->value;
  REQUIRE(m.shape() == x.shape());
  for (std::int64_t i = 0; i < m.size(); ++i) CHECK(m[i] == 0.5);

  ParamStore ps2;
  auto nlam2 = make_nlam(ps2, "m", 4, 1, rng);
  Tensor m2 = nlam2.attention_mask(constant(x))->value;
  for (std::int64_t i = 0; i < m2.size(); ++i) {
    CHECK(m2[i] > 0.0);
    CHECK(m2[i] < 1.0);
  }
}

TEST_CASE("attention mask: matches the composed NLN+ResBlocks+1x1+sigmoid oracle") {
  ParamStore ps;
  Rng rng(8);
  auto nlam = make_nlam(ps, "m", 5, 1, rng);
  Tensor x = rand_tensor({5, 6, 6}, rng);
  Tensor m = nlam.attention_mask(constant(x))->value;
  auto t = nlam.nln.forward(constant(x));
  t = nlam.mask3.forward(nlam.mask2.forward(nlam.mask1.forward(t)));
  t = ag::sigmoid(nlam.mask_out(t));
  CHECK(max_abs_diff(m, t->value) == 0.0);
}

TEST_CASE("nlam: strongly negative mask bias recovers the identity in the limit") {
  ParamStore ps;
  Rng rng(9);
  auto nlam = make_nlam(ps, "m", 4, 1, rng);
  for (std::int64_t i = 0; i < nlam.mask_out.w->value.size(); ++i) nlam.mask_out.w->value[i] = 0.0;
  for (std::int64_t i = 0; i < nlam.mask_out.b->value.size(); ++i) nlam.mask_out.b->value[i] = -60.0;
  Tensor x = rand_tensor({4, 6, 6}, rng);
  Tensor y = nlam.forward(constant(x))->value;
  CHECK(max_abs_diff(y, x) < 1e-12);
}

TEST_CASE("nlam: output composes the two branches exactly; shape preserved") {
  ParamStore ps;
  Rng rng(10);
  auto nlam = make_nlam(ps, "m", 4, 1, rng);
  Tensor x = rand_tensor({4, 6, 6}, rng);
  NodeRef mask;
  Tensor y = nlam.forward(constant(x), &mask)->value;
  REQUIRE(y.shape() == x.shape());
  auto feat = nlam.main3.forward(nlam.main2.forward(nlam.main1.forward(constant(x))));
  Tensor expect(x.shape());
  for (std::int64_t i = 0; i < expect.size(); ++i) expect[i] = x[i] + mask->value[i] * feat->value[i];
  CHECK(max_abs_diff(y, expect) == 0.0);
}
