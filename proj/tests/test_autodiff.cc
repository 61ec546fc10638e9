#include <doctest.h>

#include <cmath>

#include "nlaic/autograd.h"
#include "nlaic/detmath.h"
#include "testutil.h"

using namespace nlaic;
using testutil::max_abs_diff;
using testutil::max_rel_grad_err;
using testutil::rand_tensor;

TEST_CASE("conv2d identity and counting kernels") {
  Rng rng(1);
  auto x = constant(rand_tensor({1, 5, 7}, rng));
  auto k = constant(Tensor({1, 1, 1, 1}, {1.0}));
  auto b = constant(Tensor::zeros({1}));
  auto y = ag::conv2d(x, k, b, 1, 0);
  CHECK(max_abs_diff(y->value, x->value) == 0.0);

  auto ones5 = constant(Tensor::full({1, 5, 5}, 1.0));
  auto ones3 = constant(Tensor::full({1, 1, 3, 3}, 1.0));
  auto y2 = ag::conv2d(ones5, ones3, b, 1, 0);
  CHECK(y2->value.shape() == std::vector<int>{1, 3, 3});
  for (std::int64_t i = 0; i < y2->value.size(); ++i) CHECK(y2->value[i] == 9.0);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  Rng rng(2);
  for (int stride : {1, 2})
    for (int pad : {0, 1, 2}) {
      Tensor x = rand_tensor({2, 7, 7}, rng);
      Tensor k = rand_tensor({4, 2, 3, 3}, rng);
      Tensor b = rand_tensor({4}, rng);
      auto y = ag::conv2d(constant(x), constant(k), constant(b), stride, pad);
      CHECK(max_abs_diff(y->value, testutil::conv2d_oracle(x, k, b, stride, pad)) < 1e-12);
    }
}

TEST_CASE("conv2d rejects channel mismatch naming both shapes") {
  Rng rng(3);
  auto x = constant(rand_tensor({3, 4, 4}, rng));
  auto k = constant(rand_tensor({4, 2, 3, 3}, rng));
  auto b = constant(Tensor::zeros({4}));
  CHECK_THROWS_WITH_AS(ag::conv2d(x, k, b, 1, 1), doctest::Contains("[3,4,4]"), std::invalid_argument);
  try {
    ag::conv2d(x, k, b, 1, 1);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("[4,2,3,3]") != std::string::npos);
  }
}

TEST_CASE("conv2d_transpose doubles spatial dims at stride 2") {
  Rng rng(4);
  auto x = constant(rand_tensor({2, 16, 16}, rng));
  auto k = constant(rand_tensor({2, 3, 5, 5}, rng));
  auto b = constant(Tensor::zeros({3}));
  auto y = ag::conv2d_transpose(x, k, b, 2, 2);
  CHECK(y->value.shape() == std::vector<int>{3, 32, 32});
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
  Rng rng(5);
  for (int stride : {1, 2}) {
    const int kh = 5, pad = 2;
    Tensor x = rand_tensor({2, 8, 8}, rng);
    Tensor k = rand_tensor({3, 2, kh, kh}, rng);  // conv: 2 -> 3 channels
    Tensor zero3 = Tensor::zeros({3});
    Tensor zero2 = Tensor::zeros({2});
    auto cx = ag::conv2d(constant(x), constant(k), constant(zero3), stride, pad);
    Tensor y = rand_tensor(cx->value.shape(), rng);
    // adjoint consumes k with swapped roles: [Cout,Cin,kh,kw] maps y back
    auto ty = ag::conv2d_transpose(constant(y), constant(k), constant(zero2), stride, pad);
    REQUIRE(ty->value.shape() == x.shape());
    double lhs = 0.0, rhs = 0.0;
    for (std::int64_t i = 0; i < cx->value.size(); ++i) lhs += cx->value[i] * y[i];
    for (std::int64_t i = 0; i < x.size(); ++i) rhs += x[i] * ty->value[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("conv2d_transpose 1x1 identity") {
  Rng rng(6);
  auto x = constant(rand_tensor({1, 6, 6}, rng));
  auto k = constant(Tensor({1, 1, 1, 1}, {1.0}));
  auto b = constant(Tensor::zeros({1}));
  auto y = ag::conv2d_transpose(x, k, b, 1, 0);
  CHECK(max_abs_diff(y->value, x->value) == 0.0);
}

TEST_CASE("masked_conv3d tap counts for a 3x3x3 window") {
  CHECK(masked_taps(MaskVariant::kFullCausal, 3, 3, 3).taps.size() == 13);
  CHECK(masked_taps(MaskVariant::kNoLeft, 3, 3, 3).taps.size() == 12);
  CHECK(masked_taps(MaskVariant::kChannelOnly, 3, 3, 3).taps.size() == 9);
  CHECK_THROWS_AS(masked_taps(MaskVariant::kFullCausal, 2, 3, 3), std::invalid_argument);
}

TEST_CASE("masked_conv3d first raster element sees only the bias") {
  Rng rng(7);
  auto x = constant(rand_tensor({3, 4, 4}, rng));
  auto k = constant(rand_tensor({3, 3, 3}, rng));
  auto b = constant(Tensor({1}, {0.37}));
  for (auto v : {MaskVariant::kFullCausal, MaskVariant::kNoLeft, MaskVariant::kChannelOnly}) {
    auto y = ag::masked_conv3d(x, k, b, v);
    CHECK(y->value.at3(0, 0, 0) == 0.37);
  }
}

TEST_CASE("masked_conv3d causality: exhaustive perturbation sweep on 4x6x6") {
  Rng rng(8);
  const int C = 4, H = 6, W = 6;
  Tensor x = rand_tensor({C, H, W}, rng);
  Tensor k = rand_tensor({3, 3, 3}, rng, 0.5, 1.5);  // nonzero taps
  auto b = constant(Tensor({1}, {0.1}));
  for (auto v : {MaskVariant::kFullCausal, MaskVariant::kNoLeft, MaskVariant::kChannelOnly}) {
    MaskTaps taps = masked_taps(v, 3, 3, 3);
    Tensor base = ag::masked_conv3d(constant(x), constant(k), b, v)->value;
    for (int uc = 0; uc < C; ++uc)
      for (int ui = 0; ui < H; ++ui)
        for (int uj = 0; uj < W; ++uj) {
          Tensor xp = x;
          xp.at3(uc, ui, uj) += 1.0;
          Tensor pert = ag::masked_conv3d(constant(xp), constant(k), b, v)->value;
          for (int c = 0; c < C; ++c)
            for (int i = 0; i < H; ++i)
              for (int j = 0; j < W; ++j) {
                bool reads = false;
                for (const auto& t : taps.taps)
                  if (c + t.dc == uc && i + t.di == ui && j + t.dj == uj) reads = true;
                if (reads)
                  CHECK(pert.at3(c, i, j) != base.at3(c, i, j));
                else
                  CHECK(pert.at3(c, i, j) == base.at3(c, i, j));
              }
        }
  }
}

TEST_CASE("matmul basics and oracle") {
  auto a = constant(Tensor({2, 2}, {1, 2, 3, 4}));
  auto v = constant(Tensor({2, 1}, {1, 1}));
  auto y = ag::matmul(a, v);
  CHECK(y->value[0] == 3.0);
  CHECK(y->value[1] == 7.0);

  auto eye = constant(Tensor({2, 2}, {1, 0, 0, 1}));
  CHECK(max_abs_diff(ag::matmul(eye, a)->value, a->value) == 0.0);

  Rng rng(9);
  Tensor m = rand_tensor({5, 4}, rng), n = rand_tensor({4, 3}, rng);
  Tensor expect({5, 3});
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j)
      for (int t = 0; t < 4; ++t) expect[static_cast<std::int64_t>(i) * 3 + j] += m[static_cast<std::int64_t>(i) * 4 + t] * n[static_cast<std::int64_t>(t) * 3 + j];
  CHECK(max_abs_diff(ag::matmul(constant(m), constant(n))->value, expect) < 1e-12);

  CHECK_THROWS_AS(ag::matmul(constant(m), constant(m)), std::invalid_argument);
}

TEST_CASE("softmax: constant rows, shift invariance, oracle, row sums") {
  Rng rng(10);
  auto c = constant(Tensor::full({1, 7}, 3.25));
  auto y = ag::softmax(c, 1);
  for (int i = 0; i < 7; ++i) CHECK(y->value[i] == doctest::Approx(1.0 / 7).epsilon(1e-14));

  Tensor r = rand_tensor({1, 9}, rng, -3, 3);
  Tensor rs = r;
  for (std::int64_t i = 0; i < rs.size(); ++i) rs[i] += 17.5;
  CHECK(max_abs_diff(ag::softmax(constant(r), 1)->value, ag::softmax(constant(rs), 1)->value) < 1e-12);

  // direct exp/sum oracle
  Tensor expect({1, 9});
  double z = 0.0;
  for (int i = 0; i < 9; ++i) z += std::exp(r[i]);
  for (int i = 0; i < 9; ++i) expect[i] = std::exp(r[i]) / z;
  CHECK(max_abs_diff(ag::softmax(constant(r), 1)->value, expect) < 1e-12);

  Tensor big = rand_tensor({6, 11}, rng, -30, 30);
  auto sm = ag::softmax(constant(big), 1);
  for (int i = 0; i < 6; ++i) {
    double s = 0.0;
    for (int j = 0; j < 11; ++j) {
      s += sm->value[static_cast<std::int64_t>(i) * 11 + j];
      CHECK(sm->value[static_cast<std::int64_t>(i) * 11 + j] > 0.0);
    }
    CHECK(std::fabs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("activations") {
  auto x = constant(Tensor({4}, {-1.0, 2.0, 0.0, -0.5}));
  auto r = ag::relu(x);
  CHECK(r->value[0] == 0.0);
  CHECK(r->value[1] == 2.0);
  CHECK(ag::sigmoid(constant(Tensor::scalar(0.0)))->value[0] == 0.5);
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const double v = rng.uniform(-40, 40);
    CHECK(std::fabs(det_sigmoid(v) + det_sigmoid(-v) - 1.0) < 1e-12);
    CHECK(det_sigmoid(v) > 0.0);
    CHECK(det_sigmoid(v) < 1.0);
  }
}

TEST_CASE("maxpool2d: identity, constants, window oracle") {
  Rng rng(12);
  Tensor x = rand_tensor({2, 5, 5}, rng);
  CHECK(max_abs_diff(ag::maxpool2d(constant(x), 1)->value, x) == 0.0);

  auto c = ag::maxpool2d(constant(Tensor::full({1, 6, 6}, 0.77)), 2);
  for (std::int64_t i = 0; i < c->value.size(); ++i) CHECK(c->value[i] == 0.77);

  Tensor t = rand_tensor({1, 4, 4}, rng);
  auto p = ag::maxpool2d(constant(t), 2);
  for (int oh = 0; oh < 2; ++oh)
    for (int ow = 0; ow < 2; ++ow) {
      double best = -1e300;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) best = std::max(best, t.at3(0, oh * 2 + i, ow * 2 + j));
      CHECK(p->value.at3(0, oh, ow) == best);
    }
  // truncated edges
  CHECK(ag::maxpool2d(constant(rand_tensor({1, 5, 7}, rng)), 2)->value.shape() == std::vector<int>{1, 3, 4});
}

TEST_CASE("backward: linear case gives exact data gradient") {
  Rng rng(13);
  Tensor xv = rand_tensor({3, 4}, rng);
  auto w = make_param(rand_tensor({3, 4}, rng));
  auto loss = ag::sum(ag::mul(w, constant(xv)));
  backward(loss);
  for (std::int64_t i = 0; i < xv.size(); ++i) CHECK(w->grad[i] == xv[i]);
}

TEST_CASE("backward: unreachable parameter keeps zero gradient; unrecorded rejected") {
  Rng rng(14);
  auto used = make_param(rand_tensor({3}, rng));
  auto unused = make_param(rand_tensor({3}, rng));
  auto loss = ag::sum(ag::mul(used, used));
  backward(loss);
  CHECK(unused->grad.size() == 0);  // never touched = zero

  auto plain = constant(Tensor::scalar(1.0));
  CHECK_THROWS_AS(backward(plain), std::invalid_argument);
  CHECK_THROWS_AS(backward(ag::sum(constant(rand_tensor({3}, rng)))), std::invalid_argument);
}

TEST_CASE("backward: repeated calls accumulate leaf grads; reset clears") {
  Rng rng(15);
  auto w = make_param(rand_tensor({4}, rng));
  auto make_loss = [&] { return ag::sum(ag::mul(w, w)); };
  backward(make_loss());
  Tensor g1 = w->grad;
  backward(make_loss());
  for (std::int64_t i = 0; i < g1.size(); ++i) CHECK(w->grad[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-12));
  w->zero_grad();
  for (std::int64_t i = 0; i < g1.size(); ++i) CHECK(w->grad[i] == 0.0);
}

TEST_CASE("gradients of every operator match central finite differences") {
  Rng rng(16);
  // Weight every op output with a fixed random cotangent so all elements
  // contribute to the scalar loss.
  auto weighted = [&](const NodeRef& y, Rng& r) {
    Tensor w = rand_tensor(y->value.shape(), r, 0.5, 1.5);
    return ag::sum(ag::mul(y, constant(w)));
  };

  SUBCASE("conv2d") {
    auto x = make_param(rand_tensor({2, 6, 6}, rng));
    auto k = make_param(rand_tensor({3, 2, 3, 3}, rng));
    auto b = make_param(rand_tensor({3}, rng));
    for (int stride : {1, 2}) {
      Rng wr(100 + stride);
      auto build = [&] { return weighted(ag::conv2d(x, k, b, stride, 1), wr); };
      auto rebuild = [&] {
        Rng w2(100 + stride);
        return weighted(ag::conv2d(x, k, b, stride, 1), w2);
      };
      (void)build;
      CHECK(max_rel_grad_err(rebuild, {x, k, b}) < 1e-4);
    }
  }
  SUBCASE("conv2d_transpose") {
    auto x = make_param(rand_tensor({2, 4, 4}, rng));
    auto k = make_param(rand_tensor({2, 3, 3, 3}, rng));
    auto b = make_param(rand_tensor({3}, rng));
    for (int stride : {1, 2}) {
      auto rebuild = [&] {
        Rng w2(200 + stride);
        return weighted(ag::conv2d_transpose(x, k, b, stride, 1), w2);
      };
      CHECK(max_rel_grad_err(rebuild, {x, k, b}) < 1e-4);
    }
  }
  SUBCASE("masked_conv3d all variants") {
    auto x = make_param(rand_tensor({3, 4, 4}, rng));
    auto k = make_param(rand_tensor({3, 3, 3}, rng));
    auto b = make_param(rand_tensor({1}, rng));
    for (auto v : {MaskVariant::kFullCausal, MaskVariant::kNoLeft, MaskVariant::kChannelOnly}) {
      auto rebuild = [&] {
        Rng w2(300 + static_cast<int>(v));
        return weighted(ag::masked_conv3d(x, k, b, v), w2);
      };
      CHECK(max_rel_grad_err(rebuild, {x, k, b}) < 1e-4);
    }
  }
  SUBCASE("matmul and linear") {
    auto a = make_param(rand_tensor({3, 4}, rng));
    auto bm = make_param(rand_tensor({4, 5}, rng));
    auto bias = make_param(rand_tensor({3}, rng));
    auto rebuild1 = [&] {
      Rng w2(400);
      return weighted(ag::matmul(a, bm), w2);
    };
    CHECK(max_rel_grad_err(rebuild1, {a, bm}) < 1e-4);
    auto xs = make_param(rand_tensor({4, 5}, rng));
    auto rebuild2 = [&] {
      Rng w2(401);
      return weighted(ag::linear(a, xs, bias), w2);
    };
    CHECK(max_rel_grad_err(rebuild2, {a, xs, bias}) < 1e-4);
  }
  SUBCASE("softmax both axes") {
    auto x = make_param(rand_tensor({4, 5}, rng));
    for (int axis : {0, 1}) {
      auto rebuild = [&] {
        Rng w2(500 + axis);
        return weighted(ag::softmax(x, axis), w2);
      };
      CHECK(max_rel_grad_err(rebuild, {x}) < 1e-4);
    }
  }
  SUBCASE("pooling and blur") {
    auto x = make_param(rand_tensor({2, 6, 6}, rng));
    auto rebuild1 = [&] {
      Rng w2(600);
      return weighted(ag::maxpool2d(x, 2), w2);
    };
    CHECK(max_rel_grad_err(rebuild1, {x}) < 1e-4);
    auto rebuild2 = [&] {
      Rng w2(601);
      return weighted(ag::avgpool2d_2(x), w2);
    };
    CHECK(max_rel_grad_err(rebuild2, {x}) < 1e-4);
    Tensor win = rand_tensor({3, 3}, rng, 0.0, 0.3);
    auto rebuild3 = [&] {
      Rng w2(602);
      return weighted(ag::blur2d_valid(x, win), w2);
    };
    CHECK(max_rel_grad_err(rebuild3, {x}) < 1e-4);
  }
  SUBCASE("elementwise and reductions") {
    auto x = make_param(rand_tensor({3, 4}, rng, 0.2, 2.0));
    auto y = make_param(rand_tensor({3, 4}, rng, 0.3, 1.7));
    auto rebuild = [&] {
      Rng w2(700);
      auto t = ag::add(ag::mul(x, y), ag::divide(x, y));
      t = ag::sub(t, ag::mul_scalar(y, 0.3));
      t = ag::add(t, ag::exp_(ag::neg(x)));
      t = ag::add(t, ag::log_(y));
      t = ag::add(t, ag::softplus(x));
      t = ag::add(t, ag::tanh_(y));
      t = ag::add(t, ag::sigmoid(x));
      t = ag::add(t, ag::normal_cdf(ag::sub(x, y)));
      t = ag::add(t, ag::pow_const(y, 0.37));
      t = ag::add(t, ag::clamp(x, 0.4, 1.5));
      return weighted(ag::add(t, ag::add_scalar(x, 0.1)), w2);
    };
    CHECK(max_rel_grad_err(rebuild, {x, y}) < 1e-4);
    auto rebuild2 = [&] { return ag::add(ag::mean(ag::mul(x, x)), ag::sum(ag::mul(y, y))); };
    CHECK(max_rel_grad_err(rebuild2, {x, y}) < 1e-4);
  }
  SUBCASE("shape ops") {
    auto x = make_param(rand_tensor({4, 6}, rng));
    auto y = make_param(rand_tensor({2, 6}, rng));
    auto v = make_param(rand_tensor({5}, rng));
    auto rebuild = [&] {
      Rng w2(800);
      auto t = ag::concat0({ag::transpose2d(ag::reshape(x, {6, 4})), ag::transpose2d(ag::reshape(y, {6, 2}))});
      return ag::add(weighted(ag::slice0(t, 1, 5), w2), weighted(ag::broadcast_chw(v, 3, 2), w2));
    };
    CHECK(max_rel_grad_err(rebuild, {x, y, v}) < 1e-4);
  }
}

TEST_CASE("determinism: identical graphs give bit-identical values and grads") {
  auto run = [] {
    Rng rng(42);
    auto x = make_param(rand_tensor({2, 8, 8}, rng));
    auto k = make_param(rand_tensor({2, 2, 3, 3}, rng));
    auto b = make_param(rand_tensor({2}, rng));
    auto y = ag::softmax(ag::reshape(ag::conv2d(x, k, b, 1, 1), {2, 64}), 1);
    auto loss = ag::sum(ag::mul(y, y));
    backward(loss);
    return std::make_tuple(loss->value[0], k->grad, x->grad);
  };
  auto [l1, g1, gx1] = run();
  auto [l2, g2, gx2] = run();
  CHECK(l1 == l2);
  CHECK(max_abs_diff(g1, g2) == 0.0);
  CHECK(max_abs_diff(gx1, gx2) == 0.0);
}
