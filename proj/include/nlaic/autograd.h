#ifndef NLAIC_AUTOGRAD_H_
#define NLAIC_AUTOGRAD_H_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nlaic/tensor.h"

namespace nlaic {

// Reverse-mode tape node. Operations build a DAG of these; backward() walks
// it once and accumulates gradients into the leaves that requested them.
class Node {
 public:
  Tensor value;
  Tensor grad;  // empty until first touched
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, adds to parents

  Tensor& ensure_grad();
  void zero_grad();
  bool is_scalar() const { return value.size() == 1; }
};

using NodeRef = std::shared_ptr<Node>;

NodeRef constant(Tensor v);
NodeRef make_param(Tensor v);  // leaf with requires_grad = true

// Accumulates d(loss)/d(leaf) into every reachable grad-requesting leaf.
// Interior gradients are cleared per call; leaf gradients accumulate until
// explicitly reset. Rejects values that were not produced on the tape.
void backward(const NodeRef& loss);

// Raster-causal tap patterns for the 3D masked convolution. Raster order is
// channel-major, then row, then column.
enum class MaskVariant { kFullCausal, kNoLeft, kChannelOnly };

struct MaskTaps {
  int kc = 0, kh = 0, kw = 0;
  // Offsets relative to the window center, in fixed (dc,di,dj) scan order.
  struct Tap {
    int dc, di, dj;
    int widx;  // flat index into the kernel tensor
  };
  std::vector<Tap> taps;
};

MaskTaps masked_taps(MaskVariant variant, int kc, int kh, int kw);

// Shared per-position kernel: identical arithmetic on the batch path and the
// symbol-by-symbol decode path (required for bit-exact round trips).
double masked_conv3d_at(const Tensor& x, const Tensor& k, double bias, const MaskTaps& taps, int c, int i, int j);

namespace ag {

// Elementwise (same shape unless noted).
NodeRef add(const NodeRef& a, const NodeRef& b);
NodeRef sub(const NodeRef& a, const NodeRef& b);
NodeRef mul(const NodeRef& a, const NodeRef& b);
NodeRef divide(const NodeRef& a, const NodeRef& b);
NodeRef neg(const NodeRef& a);
NodeRef add_scalar(const NodeRef& a, double s);
NodeRef mul_scalar(const NodeRef& a, double s);
NodeRef relu(const NodeRef& a);
NodeRef sigmoid(const NodeRef& a);
NodeRef tanh_(const NodeRef& a);
NodeRef exp_(const NodeRef& a);
NodeRef log_(const NodeRef& a);
NodeRef softplus(const NodeRef& a);
NodeRef normal_cdf(const NodeRef& a);
NodeRef clamp(const NodeRef& a, double lo, double hi);
// max(a, bound) with the gradient passed through whenever it would push the
// clamped value back above the bound (keeps rate terms trainable).
NodeRef clamp_min_passthrough(const NodeRef& a, double bound);
NodeRef pow_const(const NodeRef& a, double p);  // a > 0

// Reductions / shape.
NodeRef sum(const NodeRef& a);
NodeRef mean(const NodeRef& a);
NodeRef reshape(const NodeRef& a, std::vector<int> shape);
NodeRef transpose2d(const NodeRef& a);
NodeRef concat0(const std::vector<NodeRef>& parts);
NodeRef slice0(const NodeRef& a, int from, int to);
NodeRef broadcast_chw(const NodeRef& v, int h, int w);  // [C] -> [C,h,w]

// Linear algebra.
NodeRef matmul(const NodeRef& a, const NodeRef& b);
NodeRef linear(const NodeRef& w, const NodeRef& x, const NodeRef& b);  // w[M,K]x[K,N]+b[M]
NodeRef softmax(const NodeRef& a, int axis);

// Convolutions. Cross-correlation semantics (no kernel flip), zero padding.
// conv2d: x[Cin,H,W], k[Cout,Cin,kh,kw], b[Cout]; H' = (H+2p-kh)/s + 1.
NodeRef conv2d(const NodeRef& x, const NodeRef& k, const NodeRef& b, int stride, int pad);
// Adjoint map of conv2d under the same (stride,pad); kernel is [Cin,Cout,
// kh,kw] relative to its own output. Output dims are exactly stride * input
// dims under the fixed rule pad=(k-1)/2, output_padding=stride-1.
NodeRef conv2d_transpose(const NodeRef& x, const NodeRef& k, const NodeRef& b, int stride, int pad);
// One shared [kc,kh,kw] kernel + scalar bias applied at every (c,i,j);
// zero padding in all three dims.
NodeRef masked_conv3d(const NodeRef& x, const NodeRef& k, const NodeRef& b, MaskVariant variant);

// Pooling. Edge windows are truncated.
NodeRef maxpool2d(const NodeRef& x, int s);
NodeRef avgpool2d_2(const NodeRef& x);
// Valid-region correlation with a fixed (non-trainable) 2D window, applied
// per channel. Gradient flows to x only.
NodeRef blur2d_valid(const NodeRef& x, const Tensor& window);

}  // namespace ag
}  // namespace nlaic

#endif  // NLAIC_AUTOGRAD_H_
