#include "nlaic/autograd.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "nlaic/detmath.h"

namespace nlaic {

Tensor& Node::ensure_grad() {
  if (grad.size() == 0) grad = Tensor::zeros(value.shape());
  return grad;
}

void Node::zero_grad() {
  if (grad.size() != 0) std::fill(grad.vec().begin(), grad.vec().end(), 0.0);
}

NodeRef constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

NodeRef make_param(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  return n;
}

namespace {

int divceil(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }
int divfloor(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

NodeRef make_node(Tensor v, std::vector<NodeRef> parents, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  n->parents = std::move(parents);
  if (n->requires_grad) n->backward_fn = std::move(fn);
  return n;
}

void check_same_shape(const NodeRef& a, const NodeRef& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a->value.shape_str() + " vs " +
                                b->value.shape_str());
}

void add_into(Tensor& dst, const Tensor& src, double scale = 1.0) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::int64_t i = 0; i < dst.size(); ++i) d[i] += scale * s[i];
}

}  // namespace

void backward(const NodeRef& loss) {
  if (!loss) throw std::invalid_argument("backward: null node");
  if (!loss->is_scalar()) throw std::invalid_argument("backward: loss must be scalar, got " + loss->value.shape_str());
  if (!loss->requires_grad)
    throw std::invalid_argument("backward: value was not recorded on the tape (no grad path)");
  if (!std::isfinite(loss->value[0])) throw std::runtime_error("backward: loss is not finite");

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  struct Frame {
    Node* n;
    size_t next;
  };
  std::vector<Frame> stack{{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node* p = f.n->parents[f.next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }
  // Interior gradients are per-call scratch; leaf gradients accumulate.
  for (Node* n : order)
    if (n->backward_fn) n->zero_grad();
  loss->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

// ---------------------------------------------------------------------------
// Masked 3D convolution taps
// ---------------------------------------------------------------------------

MaskTaps masked_taps(MaskVariant variant, int kc, int kh, int kw) {
  if (kc % 2 == 0 || kh % 2 == 0 || kw % 2 == 0)
    throw std::invalid_argument("masked_conv3d: kernel dims must be odd, got " +
                                Tensor::shape_str({kc, kh, kw}));
  MaskTaps m;
  m.kc = kc;
  m.kh = kh;
  m.kw = kw;
  const int cc = kc / 2, ch = kh / 2, cw = kw / 2;
  for (int dc = 0; dc < kc; ++dc)
    for (int di = 0; di < kh; ++di)
      for (int dj = 0; dj < kw; ++dj) {
        int oc = dc - cc, oi = di - ch, oj = dj - cw;
        bool causal = oc < 0 || (oc == 0 && oi < 0) || (oc == 0 && oi == 0 && oj < 0);
        if (!causal) continue;
        bool keep = true;
        switch (variant) {
          case MaskVariant::kFullCausal:
            break;
          case MaskVariant::kNoLeft:
            keep = !(oc == 0 && oi == 0);
            break;
          case MaskVariant::kChannelOnly:
            keep = oc < 0;
            break;
        }
        if (keep) m.taps.push_back({oc, oi, oj, (dc * kh + di) * kw + dj});
      }
  return m;
}

double masked_conv3d_at(const Tensor& x, const Tensor& k, double bias, const MaskTaps& taps, int c, int i, int j) {
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  double acc = bias;
  const double* kd = k.data();
  for (const auto& t : taps.taps) {
    int cc = c + t.dc, ii = i + t.di, jj = j + t.dj;
    if (cc < 0 || ii < 0 || jj < 0 || cc >= C || ii >= H || jj >= W) continue;
    acc += kd[t.widx] * x.at3(cc, ii, jj);
  }
  return acc;
}

namespace ag {

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

namespace {

NodeRef binary_ew(const NodeRef& a, const NodeRef& b, const char* name, double (*f)(double, double),
                  std::function<void(Node&)> bw) {
  check_same_shape(a, b, name);
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = f(a->value[i], b->value[i]);
  return make_node(std::move(out), {a, b}, std::move(bw));
}

}  // namespace

NodeRef add(const NodeRef& a, const NodeRef& b) {
  return binary_ew(a, b, "add", [](double x, double y) { return x + y; }, [](Node& n) {
    if (n.parents[0]->requires_grad) add_into(n.parents[0]->ensure_grad(), n.grad);
    if (n.parents[1]->requires_grad) add_into(n.parents[1]->ensure_grad(), n.grad);
  });
}

NodeRef sub(const NodeRef& a, const NodeRef& b) {
  return binary_ew(a, b, "sub", [](double x, double y) { return x - y; }, [](Node& n) {
    if (n.parents[0]->requires_grad) add_into(n.parents[0]->ensure_grad(), n.grad);
    if (n.parents[1]->requires_grad) add_into(n.parents[1]->ensure_grad(), n.grad, -1.0);
  });
}

NodeRef mul(const NodeRef& a, const NodeRef& b) {
  return binary_ew(a, b, "mul", [](double x, double y) { return x * y; }, [](Node& n) {
    if (n.parents[0]->requires_grad) {
      Tensor& g = n.parents[0]->ensure_grad();
      const Tensor& bv = n.parents[1]->value;
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * bv[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor& g = n.parents[1]->ensure_grad();
      const Tensor& av = n.parents[0]->value;
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * av[i];
    }
  });
}

NodeRef divide(const NodeRef& a, const NodeRef& b) {
  return binary_ew(a, b, "divide", [](double x, double y) { return x / y; }, [](Node& n) {
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      Tensor& g = n.parents[0]->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] / bv[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor& g = n.parents[1]->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i] * av[i] / (bv[i] * bv[i]);
    }
  });
}

namespace {

NodeRef unary_ew(const NodeRef& a, double (*f)(double), std::function<void(Node&)> bw) {
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = f(a->value[i]);
  return make_node(std::move(out), {a}, std::move(bw));
}

}  // namespace

NodeRef neg(const NodeRef& a) {
  return unary_ew(a, [](double x) { return -x; },
                  [](Node& n) { add_into(n.parents[0]->ensure_grad(), n.grad, -1.0); });
}

NodeRef add_scalar(const NodeRef& a, double s) {
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + s;
  return make_node(std::move(out), {a}, [](Node& n) { add_into(n.parents[0]->ensure_grad(), n.grad); });
}

NodeRef mul_scalar(const NodeRef& a, double s) {
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * s;
  return make_node(std::move(out), {a}, [s](Node& n) { add_into(n.parents[0]->ensure_grad(), n.grad, s); });
}

NodeRef relu(const NodeRef& a) {
  return unary_ew(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& xv = n.parents[0]->value;
    for (std::int64_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) g[i] += n.grad[i];
  });
}

NodeRef sigmoid(const NodeRef& a) {
  return unary_ew(a, det_sigmoid, [](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) {
      double y = n.value[i];
      g[i] += n.grad[i] * y * (1.0 - y);
    }
  });
}

NodeRef tanh_(const NodeRef& a) {
  return unary_ew(a, det_tanh, [](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) {
      double y = n.value[i];
      g[i] += n.grad[i] * (1.0 - y * y);
    }
  });
}

NodeRef exp_(const NodeRef& a) {
  return unary_ew(a, det_exp, [](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * n.value[i];
  });
}

NodeRef log_(const NodeRef& a) {
  return unary_ew(a, det_log, [](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& xv = n.parents[0]->value;
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] / xv[i];
  });
}

NodeRef softplus(const NodeRef& a) {
  return unary_ew(a, det_softplus, [](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& xv = n.parents[0]->value;
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * det_sigmoid(xv[i]);
  });
}

NodeRef normal_cdf(const NodeRef& a) {
  return unary_ew(a, det_normal_cdf, [](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& xv = n.parents[0]->value;
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * det_normal_pdf(xv[i]);
  });
}

NodeRef clamp(const NodeRef& a, double lo, double hi) {
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, a->value[i]));
  return make_node(std::move(out), {a}, [lo, hi](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& xv = n.parents[0]->value;
    for (std::int64_t i = 0; i < g.size(); ++i)
      if (xv[i] >= lo && xv[i] <= hi) g[i] += n.grad[i];
  });
}

NodeRef clamp_min_passthrough(const NodeRef& a, double bound) {
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::max(bound, a->value[i]);
  return make_node(std::move(out), {a}, [bound](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& xv = n.parents[0]->value;
    for (std::int64_t i = 0; i < g.size(); ++i)
      if (xv[i] >= bound || n.grad[i] < 0.0) g[i] += n.grad[i];
  });
}

NodeRef pow_const(const NodeRef& a, double p) {
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) {
    double x = a->value[i];
    if (x <= 0.0) throw std::invalid_argument("pow_const: base must be positive");
    out[i] = det_exp(p * det_log(x));
  }
  return make_node(std::move(out), {a}, [p](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    const Tensor& xv = n.parents[0]->value;
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * p * n.value[i] / xv[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions / shape
// ---------------------------------------------------------------------------

NodeRef sum(const NodeRef& a) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a->value.size(); ++i) s += a->value[i];
  return make_node(Tensor::scalar(s), {a}, [](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    double gy = n.grad[0];
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += gy;
  });
}

NodeRef mean(const NodeRef& a) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a->value.size(); ++i) s += a->value[i];
  double inv = 1.0 / static_cast<double>(a->value.size());
  return make_node(Tensor::scalar(s * inv), {a}, [inv](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    double gy = n.grad[0] * inv;
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += gy;
  });
}

NodeRef reshape(const NodeRef& a, std::vector<int> shape) {
  if (Tensor::count(shape) != a->value.size())
    throw std::invalid_argument("reshape: element count mismatch " + a->value.shape_str() + " -> " +
                                Tensor::shape_str(shape));
  Tensor out(std::move(shape), a->value.vec());
  return make_node(std::move(out), {a}, [](Node& n) { add_into(n.parents[0]->ensure_grad(), n.grad); });
}

NodeRef transpose2d(const NodeRef& a) {
  if (a->value.rank() != 2) throw std::invalid_argument("transpose2d: rank-2 tensor required");
  int M = a->value.dim(0), N = a->value.dim(1);
  Tensor out({N, M});
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) out[static_cast<std::int64_t>(j) * M + i] = a->value[static_cast<std::int64_t>(i) * N + j];
  return make_node(std::move(out), {a}, [M, N](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < N; ++j) g[static_cast<std::int64_t>(i) * N + j] += n.grad[static_cast<std::int64_t>(j) * M + i];
  });
}

NodeRef concat0(const std::vector<NodeRef>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat0: empty input");
  std::vector<int> shape = parts[0]->value.shape();
  std::int64_t d0 = 0;
  for (const auto& p : parts) {
    auto s = p->value.shape();
    if (s.size() != shape.size() || !std::equal(s.begin() + 1, s.end(), shape.begin() + 1))
      throw std::invalid_argument("concat0: trailing dims differ: " + Tensor::shape_str(shape) + " vs " +
                                  p->value.shape_str());
    d0 += s[0];
  }
  shape[0] = static_cast<int>(d0);
  Tensor out(shape);
  std::int64_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.vec().begin(), p->value.vec().end(), out.vec().begin() + off);
    off += p->value.size();
  }
  return make_node(std::move(out), parts, [](Node& n) {
    std::int64_t off = 0;
    for (auto& p : n.parents) {
      if (p->requires_grad) {
        Tensor& g = p->ensure_grad();
        for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[off + i];
      }
      off += p->value.size();
    }
  });
}

NodeRef slice0(const NodeRef& a, int from, int to) {
  const auto& s = a->value.shape();
  if (from < 0 || to > s[0] || from >= to) throw std::invalid_argument("slice0: bad range");
  std::int64_t inner = a->value.size() / s[0];
  std::vector<int> shape = s;
  shape[0] = to - from;
  Tensor out(shape);
  std::copy(a->value.vec().begin() + from * inner, a->value.vec().begin() + to * inner, out.vec().begin());
  return make_node(std::move(out), {a}, [from, inner](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.size(); ++i) g[from * inner + i] += n.grad[i];
  });
}

NodeRef broadcast_chw(const NodeRef& v, int h, int w) {
  if (v->value.rank() != 1) throw std::invalid_argument("broadcast_chw: rank-1 tensor required");
  int C = v->value.dim(0);
  Tensor out({C, h, w});
  for (int c = 0; c < C; ++c) {
    double x = v->value[c];
    double* d = out.data() + static_cast<std::int64_t>(c) * h * w;
    for (int i = 0; i < h * w; ++i) d[i] = x;
  }
  return make_node(std::move(out), {v}, [C, h, w](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (int c = 0; c < C; ++c) {
      double acc = 0.0;
      const double* gd = n.grad.data() + static_cast<std::int64_t>(c) * h * w;
      for (int i = 0; i < h * w; ++i) acc += gd[i];
      g[c] += acc;
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

namespace {

void matmul_acc(const double* a, const double* b, double* out, int M, int K, int N) {
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k) {
      double w = a[static_cast<std::int64_t>(m) * K + k];
      const double* br = b + static_cast<std::int64_t>(k) * N;
      double* orow = out + static_cast<std::int64_t>(m) * N;
      for (int n = 0; n < N; ++n) orow[n] += w * br[n];
    }
}

void matmul_backward(Node& n, int M, int K, int N) {
  const Tensor& av = n.parents[0]->value;
  const Tensor& bv = n.parents[1]->value;
  if (n.parents[0]->requires_grad) {
    Tensor& ga = n.parents[0]->ensure_grad();
    for (int m = 0; m < M; ++m)
      for (int k = 0; k < K; ++k) {
        double acc = 0.0;
        const double* gr = n.grad.data() + static_cast<std::int64_t>(m) * N;
        const double* br = bv.data() + static_cast<std::int64_t>(k) * N;
        for (int c = 0; c < N; ++c) acc += gr[c] * br[c];
        ga[static_cast<std::int64_t>(m) * K + k] += acc;
      }
  }
  if (n.parents[1]->requires_grad) {
    Tensor& gb = n.parents[1]->ensure_grad();
    for (int m = 0; m < M; ++m)
      for (int k = 0; k < K; ++k) {
        double w = av[static_cast<std::int64_t>(m) * K + k];
        const double* gr = n.grad.data() + static_cast<std::int64_t>(m) * N;
        double* gbr = gb.data() + static_cast<std::int64_t>(k) * N;
        for (int c = 0; c < N; ++c) gbr[c] += w * gr[c];
      }
  }
}

}  // namespace

NodeRef matmul(const NodeRef& a, const NodeRef& b) {
  if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.dim(1) != b->value.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " + a->value.shape_str() + " x " + b->value.shape_str());
  int M = a->value.dim(0), K = a->value.dim(1), N = b->value.dim(1);
  Tensor out({M, N});
  matmul_acc(a->value.data(), b->value.data(), out.data(), M, K, N);
  return make_node(std::move(out), {a, b}, [M, K, N](Node& n) { matmul_backward(n, M, K, N); });
}

NodeRef linear(const NodeRef& w, const NodeRef& x, const NodeRef& b) {
  if (w->value.rank() != 2 || x->value.rank() != 2 || w->value.dim(1) != x->value.dim(0))
    throw std::invalid_argument("linear: incompatible shapes " + w->value.shape_str() + " x " + x->value.shape_str());
  int M = w->value.dim(0), K = w->value.dim(1), N = x->value.dim(1);
  if (b->value.rank() != 1 || b->value.dim(0) != M)
    throw std::invalid_argument("linear: bias shape " + b->value.shape_str() + " does not match rows " +
                                std::to_string(M));
  Tensor out({M, N});
  for (int m = 0; m < M; ++m) {
    double bias = b->value[m];
    double* orow = out.data() + static_cast<std::int64_t>(m) * N;
    for (int n = 0; n < N; ++n) orow[n] = bias;
  }
  matmul_acc(w->value.data(), x->value.data(), out.data(), M, K, N);
  return make_node(std::move(out), {w, x, b}, [M, K, N](Node& n) {
    matmul_backward(n, M, K, N);
    if (n.parents[2]->requires_grad) {
      Tensor& gb = n.parents[2]->ensure_grad();
      for (int m = 0; m < M; ++m) {
        double acc = 0.0;
        const double* gr = n.grad.data() + static_cast<std::int64_t>(m) * N;
        for (int c = 0; c < N; ++c) acc += gr[c];
        gb[m] += acc;
      }
    }
  });
}

NodeRef softmax(const NodeRef& a, int axis) {
  const auto& s = a->value.shape();
  if (axis < 0 || axis >= a->value.rank()) throw std::invalid_argument("softmax: bad axis");
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < a->value.rank(); ++i) inner *= s[i];
  const int n = s[axis];
  Tensor out(s);
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t in = 0; in < inner; ++in) {
      const std::int64_t base = o * n * inner + in;
      double mx = a->value[base];
      for (int t = 1; t < n; ++t) mx = std::max(mx, a->value[base + t * inner]);
      double z = 0.0;
      for (int t = 0; t < n; ++t) {
        double e = det_exp(a->value[base + t * inner] - mx);
        out[base + t * inner] = e;
        z += e;
      }
      double invz = 1.0 / z;
      for (int t = 0; t < n; ++t) out[base + t * inner] *= invz;
    }
  return make_node(std::move(out), {a}, [outer, inner, n](Node& nd) {
    Tensor& g = nd.parents[0]->ensure_grad();
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t in = 0; in < inner; ++in) {
        const std::int64_t base = o * n * inner + in;
        double dot = 0.0;
        for (int t = 0; t < n; ++t) dot += nd.grad[base + t * inner] * nd.value[base + t * inner];
        for (int t = 0; t < n; ++t)
          g[base + t * inner] += nd.value[base + t * inner] * (nd.grad[base + t * inner] - dot);
      }
  });
}

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

NodeRef conv2d(const NodeRef& x, const NodeRef& k, const NodeRef& b, int stride, int pad) {
  const Tensor& xv = x->value;
  const Tensor& kv = k->value;
  if (xv.rank() != 3 || kv.rank() != 4)
    throw std::invalid_argument("conv2d: expected x[C,H,W], k[Cout,Cin,kh,kw], got " + xv.shape_str() + " and " +
                                kv.shape_str());
  if (kv.dim(1) != xv.dim(0))
    throw std::invalid_argument("conv2d: input channels " + xv.shape_str() + " do not match kernel " + kv.shape_str());
  const int kh = kv.dim(2), kw = kv.dim(3);
  if (kh % 2 == 0 || kw % 2 == 0) throw std::invalid_argument("conv2d: kernel dims must be odd");
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: stride must be >=1 and pad >=0");
  const int Cin = xv.dim(0), H = xv.dim(1), W = xv.dim(2), Cout = kv.dim(0);
  if (b->value.rank() != 1 || b->value.dim(0) != Cout)
    throw std::invalid_argument("conv2d: bias shape " + b->value.shape_str() + " does not match Cout " +
                                std::to_string(Cout));
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  if (Ho < 1 || Wo < 1) throw std::invalid_argument("conv2d: kernel larger than padded input");

  Tensor out({Cout, Ho, Wo});
  for (int co = 0; co < Cout; ++co) {
    double bias = b->value[co];
    double* oc = out.data() + static_cast<std::int64_t>(co) * Ho * Wo;
    for (int i = 0; i < Ho * Wo; ++i) oc[i] = bias;
  }
  for (int co = 0; co < Cout; ++co)
    for (int ci = 0; ci < Cin; ++ci)
      for (int dh = 0; dh < kh; ++dh)
        for (int dw = 0; dw < kw; ++dw) {
          const double w = kv[((static_cast<std::int64_t>(co) * Cin + ci) * kh + dh) * kw + dw];
          const int oh_lo = std::max(0, divceil(pad - dh, stride));
          const int oh_hi = std::min(Ho - 1, divfloor(H - 1 + pad - dh, stride));
          const int ow_lo = std::max(0, divceil(pad - dw, stride));
          const int ow_hi = std::min(Wo - 1, divfloor(W - 1 + pad - dw, stride));
          for (int oh = oh_lo; oh <= oh_hi; ++oh) {
            const int ih = oh * stride - pad + dh;
            const double* xr = xv.data() + (static_cast<std::int64_t>(ci) * H + ih) * W;
            double* orow = out.data() + (static_cast<std::int64_t>(co) * Ho + oh) * Wo;
            int iw = ow_lo * stride - pad + dw;
            for (int ow = ow_lo; ow <= ow_hi; ++ow, iw += stride) orow[ow] += w * xr[iw];
          }
        }

  return make_node(std::move(out), {x, k, b}, [stride, pad, Cin, H, W, Cout, Ho, Wo, kh, kw](Node& n) {
    const Tensor& xv = n.parents[0]->value;
    const Tensor& kv = n.parents[1]->value;
    const bool need_dx = n.parents[0]->requires_grad;
    const bool need_dk = n.parents[1]->requires_grad;
    if (n.parents[2]->requires_grad) {
      Tensor& gb = n.parents[2]->ensure_grad();
      for (int co = 0; co < Cout; ++co) {
        double acc = 0.0;
        const double* gr = n.grad.data() + static_cast<std::int64_t>(co) * Ho * Wo;
        for (int i = 0; i < Ho * Wo; ++i) acc += gr[i];
        gb[co] += acc;
      }
    }
    if (!need_dx && !need_dk) return;
    Tensor* gx = need_dx ? &n.parents[0]->ensure_grad() : nullptr;
    Tensor* gk = need_dk ? &n.parents[1]->ensure_grad() : nullptr;
    for (int co = 0; co < Cout; ++co)
      for (int ci = 0; ci < Cin; ++ci)
        for (int dh = 0; dh < kh; ++dh)
          for (int dw = 0; dw < kw; ++dw) {
            const std::int64_t kidx = ((static_cast<std::int64_t>(co) * Cin + ci) * kh + dh) * kw + dw;
            const double w = kv[kidx];
            const int oh_lo = std::max(0, divceil(pad - dh, stride));
            const int oh_hi = std::min(Ho - 1, divfloor(H - 1 + pad - dh, stride));
            const int ow_lo = std::max(0, divceil(pad - dw, stride));
            const int ow_hi = std::min(Wo - 1, divfloor(W - 1 + pad - dw, stride));
            double kacc = 0.0;
            for (int oh = oh_lo; oh <= oh_hi; ++oh) {
              const int ih = oh * stride - pad + dh;
              const double* xr = xv.data() + (static_cast<std::int64_t>(ci) * H + ih) * W;
              double* gxr = need_dx ? gx->data() + (static_cast<std::int64_t>(ci) * H + ih) * W : nullptr;
              const double* gr = n.grad.data() + (static_cast<std::int64_t>(co) * Ho + oh) * Wo;
              int iw = ow_lo * stride - pad + dw;
              for (int ow = ow_lo; ow <= ow_hi; ++ow, iw += stride) {
                if (need_dk) kacc += gr[ow] * xr[iw];
                if (need_dx) gxr[iw] += w * gr[ow];
              }
            }
            if (need_dk) (*gk)[kidx] += kacc;
          }
  });
}

NodeRef conv2d_transpose(const NodeRef& x, const NodeRef& k, const NodeRef& b, int stride, int pad) {
  const Tensor& xv = x->value;
  const Tensor& kv = k->value;
  if (xv.rank() != 3 || kv.rank() != 4)
    throw std::invalid_argument("conv2d_transpose: expected x[C,H,W], k[Cin,Cout,kh,kw], got " + xv.shape_str() +
                                " and " + kv.shape_str());
  if (kv.dim(0) != xv.dim(0))
    throw std::invalid_argument("conv2d_transpose: input channels " + xv.shape_str() + " do not match kernel " +
                                kv.shape_str());
  const int kh = kv.dim(2), kw = kv.dim(3);
  if (kh % 2 == 0 || kw % 2 == 0) throw std::invalid_argument("conv2d_transpose: kernel dims must be odd");
  if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d_transpose: stride must be 1 or 2");
  if (pad != (kh - 1) / 2 || pad != (kw - 1) / 2)
    throw std::invalid_argument("conv2d_transpose: fixed padding rule requires pad = (k-1)/2");
  const int Ca = xv.dim(0), H = xv.dim(1), W = xv.dim(2), Cb = kv.dim(1);
  if (b->value.rank() != 1 || b->value.dim(0) != Cb)
    throw std::invalid_argument("conv2d_transpose: bias shape " + b->value.shape_str() + " does not match Cout " +
                                std::to_string(Cb));
  const int Ho = stride * H, Wo = stride * W;

  Tensor out({Cb, Ho, Wo});
  for (int cb = 0; cb < Cb; ++cb) {
    double bias = b->value[cb];
    double* oc = out.data() + static_cast<std::int64_t>(cb) * Ho * Wo;
    for (int i = 0; i < Ho * Wo; ++i) oc[i] = bias;
  }
  for (int ca = 0; ca < Ca; ++ca)
    for (int cb = 0; cb < Cb; ++cb)
      for (int dh = 0; dh < kh; ++dh)
        for (int dw = 0; dw < kw; ++dw) {
          const double w = kv[((static_cast<std::int64_t>(ca) * Cb + cb) * kh + dh) * kw + dw];
          const int ih_lo = std::max(0, divceil(pad - dh, stride));
          const int ih_hi = std::min(H - 1, divfloor(Ho - 1 + pad - dh, stride));
          const int iw_lo = std::max(0, divceil(pad - dw, stride));
          const int iw_hi = std::min(W - 1, divfloor(Wo - 1 + pad - dw, stride));
          for (int ih = ih_lo; ih <= ih_hi; ++ih) {
            const int oh = ih * stride - pad + dh;
            const double* xr = xv.data() + (static_cast<std::int64_t>(ca) * H + ih) * W;
            double* orow = out.data() + (static_cast<std::int64_t>(cb) * Ho + oh) * Wo;
            int ow = iw_lo * stride - pad + dw;
            for (int iw = iw_lo; iw <= iw_hi; ++iw, ow += stride) orow[ow] += w * xr[iw];
          }
        }

  return make_node(std::move(out), {x, k, b}, [stride, pad, Ca, H, W, Cb, Ho, Wo, kh, kw](Node& n) {
    const Tensor& xv = n.parents[0]->value;
    const Tensor& kv = n.parents[1]->value;
    const bool need_dx = n.parents[0]->requires_grad;
    const bool need_dk = n.parents[1]->requires_grad;
    if (n.parents[2]->requires_grad) {
      Tensor& gb = n.parents[2]->ensure_grad();
      for (int cb = 0; cb < Cb; ++cb) {
        double acc = 0.0;
        const double* gr = n.grad.data() + static_cast<std::int64_t>(cb) * Ho * Wo;
        for (int i = 0; i < Ho * Wo; ++i) acc += gr[i];
        gb[cb] += acc;
      }
    }
    if (!need_dx && !need_dk) return;
    Tensor* gx = need_dx ? &n.parents[0]->ensure_grad() : nullptr;
    Tensor* gk = need_dk ? &n.parents[1]->ensure_grad() : nullptr;
    for (int ca = 0; ca < Ca; ++ca)
      for (int cb = 0; cb < Cb; ++cb)
        for (int dh = 0; dh < kh; ++dh)
          for (int dw = 0; dw < kw; ++dw) {
            const std::int64_t kidx = ((static_cast<std::int64_t>(ca) * Cb + cb) * kh + dh) * kw + dw;
            const double w = kv[kidx];
            const int ih_lo = std::max(0, divceil(pad - dh, stride));
            const int ih_hi = std::min(H - 1, divfloor(Ho - 1 + pad - dh, stride));
            const int iw_lo = std::max(0, divceil(pad - dw, stride));
            const int iw_hi = std::min(W - 1, divfloor(Wo - 1 + pad - dw, stride));
            double kacc = 0.0;
            for (int ih = ih_lo; ih <= ih_hi; ++ih) {
              const int oh = ih * stride - pad + dh;
              const double* xr = xv.data() + (static_cast<std::int64_t>(ca) * H + ih) * W;
              double* gxr = need_dx ? gx->data() + (static_cast<std::int64_t>(ca) * H + ih) * W : nullptr;
              const double* gr = n.grad.data() + (static_cast<std::int64_t>(cb) * Ho + oh) * Wo;
              int ow = iw_lo * stride - pad + dw;
              for (int iw = iw_lo; iw <= iw_hi; ++iw, ow += stride) {
                if (need_dk) kacc += gr[ow] * xr[iw];
                if (need_dx) gxr[iw] += w * gr[ow];
              }
            }
            if (need_dk) (*gk)[kidx] += kacc;
          }
  });
}

NodeRef masked_conv3d(const NodeRef& x, const NodeRef& k, const NodeRef& b, MaskVariant variant) {
  const Tensor& xv = x->value;
  const Tensor& kv = k->value;
  if (xv.rank() != 3 || kv.rank() != 3)
    throw std::invalid_argument("masked_conv3d: expected x[C,H,W] and k[kc,kh,kw], got " + xv.shape_str() + " and " +
                                kv.shape_str());
  if (b->value.size() != 1) throw std::invalid_argument("masked_conv3d: bias must be scalar");
  MaskTaps taps = masked_taps(variant, kv.dim(0), kv.dim(1), kv.dim(2));
  const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const double bias = b->value[0];
  Tensor out({C, H, W});
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) out.at3(c, i, j) = masked_conv3d_at(xv, kv, bias, taps, c, i, j);
  return make_node(std::move(out), {x, k, b}, [taps, C, H, W](Node& n) {
    const Tensor& xv = n.parents[0]->value;
    const Tensor& kv = n.parents[1]->value;
    const bool need_dx = n.parents[0]->requires_grad;
    const bool need_dk = n.parents[1]->requires_grad;
    const bool need_db = n.parents[2]->requires_grad;
    Tensor* gx = need_dx ? &n.parents[0]->ensure_grad() : nullptr;
    Tensor* gk = need_dk ? &n.parents[1]->ensure_grad() : nullptr;
    double bacc = 0.0;
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          const double g = n.grad.at3(c, i, j);
          bacc += g;
          for (const auto& t : taps.taps) {
            int cc = c + t.dc, ii = i + t.di, jj = j + t.dj;
            if (cc < 0 || ii < 0 || jj < 0 || cc >= C || ii >= H || jj >= W) continue;
            if (need_dk) (*gk)[t.widx] += g * xv.at3(cc, ii, jj);
            if (need_dx) gx->at3(cc, ii, jj) += g * kv[t.widx];
          }
        }
    if (need_db) n.parents[2]->ensure_grad()[0] += bacc;
  });
}

// ---------------------------------------------------------------------------
// Pooling / fixed-window filtering
// ---------------------------------------------------------------------------

NodeRef maxpool2d(const NodeRef& x, int s) {
  const Tensor& xv = x->value;
  if (xv.rank() != 3) throw std::invalid_argument("maxpool2d: x[C,H,W] required");
  if (s < 1) throw std::invalid_argument("maxpool2d: s must be >= 1");
  const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const int Ho = (H + s - 1) / s, Wo = (W + s - 1) / s;
  Tensor out({C, Ho, Wo});
  std::vector<std::int64_t> argmax(static_cast<size_t>(out.size()));
  std::int64_t oi = 0;
  for (int c = 0; c < C; ++c)
    for (int oh = 0; oh < Ho; ++oh)
      for (int ow = 0; ow < Wo; ++ow, ++oi) {
        const int h1 = std::min(H, oh * s + s), w1 = std::min(W, ow * s + s);
        double best = -1e308;
        std::int64_t bi = -1;
        for (int ih = oh * s; ih < h1; ++ih)
          for (int iw = ow * s; iw < w1; ++iw) {
            std::int64_t idx = (static_cast<std::int64_t>(c) * H + ih) * W + iw;
            if (xv[idx] > best) {
              best = xv[idx];
              bi = idx;
            }
          }
        out[oi] = best;
        argmax[static_cast<size_t>(oi)] = bi;
      }
  return make_node(std::move(out), {x}, [argmax = std::move(argmax)](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.size(); ++i) g[argmax[static_cast<size_t>(i)]] += n.grad[i];
  });
}

NodeRef avgpool2d_2(const NodeRef& x) {
  const Tensor& xv = x->value;
  if (xv.rank() != 3) throw std::invalid_argument("avgpool2d_2: x[C,H,W] required");
  const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const int Ho = (H + 1) / 2, Wo = (W + 1) / 2;
  Tensor out({C, Ho, Wo});
  for (int c = 0; c < C; ++c)
    for (int oh = 0; oh < Ho; ++oh)
      for (int ow = 0; ow < Wo; ++ow) {
        const int h1 = std::min(H, oh * 2 + 2), w1 = std::min(W, ow * 2 + 2);
        double acc = 0.0;
        int cnt = 0;
        for (int ih = oh * 2; ih < h1; ++ih)
          for (int iw = ow * 2; iw < w1; ++iw) {
            acc += xv.at3(c, ih, iw);
            ++cnt;
          }
        out.at3(c, oh, ow) = acc / cnt;
      }
  return make_node(std::move(out), {x}, [C, H, W, Ho, Wo](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          const int h1 = std::min(H, oh * 2 + 2), w1 = std::min(W, ow * 2 + 2);
          const int cnt = (h1 - oh * 2) * (w1 - ow * 2);
          const double gy = n.grad.at3(c, oh, ow) / cnt;
          for (int ih = oh * 2; ih < h1; ++ih)
            for (int iw = ow * 2; iw < w1; ++iw) g.at3(c, ih, iw) += gy;
        }
  });
}

NodeRef blur2d_valid(const NodeRef& x, const Tensor& window) {
  const Tensor& xv = x->value;
  if (xv.rank() != 3 || window.rank() != 2) throw std::invalid_argument("blur2d_valid: x[C,H,W], window[kh,kw]");
  const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const int kh = window.dim(0), kw = window.dim(1);
  if (H < kh || W < kw) throw std::invalid_argument("blur2d_valid: input smaller than window");
  const int Ho = H - kh + 1, Wo = W - kw + 1;
  Tensor out({C, Ho, Wo});
  for (int c = 0; c < C; ++c)
    for (int oh = 0; oh < Ho; ++oh)
      for (int ow = 0; ow < Wo; ++ow) {
        double acc = 0.0;
        for (int dh = 0; dh < kh; ++dh) {
          const double* xr = xv.data() + (static_cast<std::int64_t>(c) * H + oh + dh) * W + ow;
          const double* wr = window.data() + static_cast<std::int64_t>(dh) * kw;
          for (int dw = 0; dw < kw; ++dw) acc += wr[dw] * xr[dw];
        }
        out.at3(c, oh, ow) = acc;
      }
  return make_node(std::move(out), {x}, [window, C, H, W, Ho, Wo, kh, kw](Node& n) {
    Tensor& g = n.parents[0]->ensure_grad();
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          const double gy = n.grad.at3(c, oh, ow);
          for (int dh = 0; dh < kh; ++dh)
            for (int dw = 0; dw < kw; ++dw)
              g[(static_cast<std::int64_t>(c) * H + oh + dh) * W + ow + dw] +=
                  gy * window[static_cast<std::int64_t>(dh) * kw + dw];
        }
  });
}

}  // namespace ag
}  // namespace nlaic
