#include "nlaic/nn.h"

#include <cmath>
#include <stdexcept>

namespace nlaic {

NodeRef ParamStore::create(const std::string& name, Tensor init) {
  if (contains(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
  NodeRef p = make_param(std::move(init));
  entries_.emplace_back(name, p);
  return p;
}

NodeRef ParamStore::find(const std::string& name) const {
  for (const auto& [n, p] : entries_)
    if (n == name) return p;
  throw std::invalid_argument("ParamStore: no parameter named " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& [n, p] : entries_)
    if (n == name) return true;
  return false;
}

void ParamStore::zero_grads() {
  for (auto& [n, p] : entries_) p->zero_grad();
}

std::int64_t ParamStore::total_count() const {
  std::int64_t c = 0;
  for (const auto& [n, p] : entries_) c += p->value.size();
  return c;
}

namespace {

Tensor he_normal(Rng& rng, std::vector<int> shape, int fan_in) {
  Tensor t(std::move(shape));
  double std = std::sqrt(2.0 / fan_in);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = std * rng.normal();
  return t;
}

}  // namespace

Conv2dLayer make_conv(ParamStore& ps, const std::string& prefix, int cout, int cin, int k, int stride, int pad,
                      Rng& rng) {
  Conv2dLayer l;
  l.w = ps.create(prefix + ".w", he_normal(rng, {cout, cin, k, k}, cin * k * k));
  l.b = ps.create(prefix + ".b", Tensor::zeros({cout}));
  l.stride = stride;
  l.pad = pad;
  return l;
}

TConv2dLayer make_tconv(ParamStore& ps, const std::string& prefix, int cin, int cout, int k, int stride, Rng& rng) {
  TConv2dLayer l;
  l.w = ps.create(prefix + ".w", he_normal(rng, {cin, cout, k, k}, cin * k * k));
  l.b = ps.create(prefix + ".b", Tensor::zeros({cout}));
  l.stride = stride;
  l.pad = (k - 1) / 2;
  return l;
}

ResBlockParams make_resblock(ParamStore& ps, const std::string& prefix, int channels, Rng& rng) {
  ResBlockParams r;
  r.c1 = make_conv(ps, prefix + ".c1", channels, channels, 3, 1, 1, rng);
  r.c2 = make_conv(ps, prefix + ".c2", channels, channels, 3, 1, 1, rng);
  return r;
}

NLNParams make_nln(ParamStore& ps, const std::string& prefix, int channels, int sparse_s, Rng& rng) {
  NLNParams n;
  auto mat = [&](const char* name) {
    Tensor t({channels, channels});
    double std = 1.0 / std::sqrt(static_cast<double>(channels));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = std * rng.normal();
    return ps.create(prefix + "." + name, std::move(t));
  };
  n.w_theta = mat("theta");
  n.w_phi = mat("phi");
  n.w_g = mat("g");
  // Zero-initialized output transform: the block starts as the identity.
  n.w_z = ps.create(prefix + ".z", Tensor::zeros({channels, channels}));
  n.sparse_s = sparse_s;
  return n;
}

NLAMParams make_nlam(ParamStore& ps, const std::string& prefix, int channels, int sparse_s, Rng& rng) {
  NLAMParams m;
  m.main1 = make_resblock(ps, prefix + ".main1", channels, rng);
  m.main2 = make_resblock(ps, prefix + ".main2", channels, rng);
  m.main3 = make_resblock(ps, prefix + ".main3", channels, rng);
  m.nln = make_nln(ps, prefix + ".mask.nln", channels, sparse_s, rng);
  m.mask1 = make_resblock(ps, prefix + ".mask.rb1", channels, rng);
  m.mask2 = make_resblock(ps, prefix + ".mask.rb2", channels, rng);
  m.mask3 = make_resblock(ps, prefix + ".mask.rb3", channels, rng);
  m.mask_out = make_conv(ps, prefix + ".mask.out", channels, channels, 1, 1, 0, rng);
  return m;
}

NodeRef ResBlockParams::forward(const NodeRef& x) const { return ag::add(x, c2(ag::relu(c1(x)))); }

NodeRef NLNParams::forward(const NodeRef& x) const {
  const int C = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2);
  const int N = H * W;
  auto xf = ag::reshape(x, {C, N});
  auto pooled = ag::maxpool2d(x, sparse_s);
  const int Np = pooled->value.dim(1) * pooled->value.dim(2);
  auto xpf = ag::reshape(pooled, {C, Np});
  auto theta = ag::matmul(w_theta, xf);                               // [C,N]
  auto phi = ag::matmul(w_phi, xpf);                                  // [C,Np]
  auto gx = ag::matmul(w_g, xpf);                                     // [C,Np]
  auto scores = ag::matmul(ag::transpose2d(theta), phi);              // [N,Np]
  auto att = ag::softmax(scores, 1);                                  // rows sum to 1
  auto y = ag::matmul(gx, ag::transpose2d(att));                      // [C,N]
  return ag::add(ag::reshape(ag::matmul(w_z, y), {C, H, W}), x);
}

NodeRef NLAMParams::attention_mask(const NodeRef& x) const {
  auto t = nln.forward(x);
  t = mask3.forward(mask2.forward(mask1.forward(t)));
  return ag::sigmoid(mask_out(t));
}

NodeRef NLAMParams::forward(const NodeRef& x, NodeRef* mask_capture) const {
  auto feat = main3.forward(main2.forward(main1.forward(x)));
  auto mask = attention_mask(x);
  if (mask_capture) *mask_capture = mask;
  return ag::add(x, ag::mul(mask, feat));
}

}  // namespace nlaic
