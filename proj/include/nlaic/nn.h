#ifndef NLAIC_NN_H_
#define NLAIC_NN_H_

#include <string>
#include <utility>
#include <vector>

#include "nlaic/autograd.h"
#include "nlaic/rng.h"

namespace nlaic {

// Named parameter registry. Creation order is fixed by construction and is
// the checkpoint order; names are unique.
class ParamStore {
 public:
  NodeRef create(const std::string& name, Tensor init);
  NodeRef find(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::pair<std::string, NodeRef>>& entries() const { return entries_; }
  void zero_grads();
  std::int64_t total_count() const;

 private:
  std::vector<std::pair<std::string, NodeRef>> entries_;
};

struct Conv2dLayer {
  NodeRef w, b;
  int stride = 1;
  int pad = 0;
  NodeRef operator()(const NodeRef& x) const { return ag::conv2d(x, w, b, stride, pad); }
};

struct TConv2dLayer {
  NodeRef w, b;
  int stride = 1;
  int pad = 0;
  NodeRef operator()(const NodeRef& x) const { return ag::conv2d_transpose(x, w, b, stride, pad); }
};

// y = x + conv(relu(conv(x))); 3x3 kernels, no normalization layers.
struct ResBlockParams {
  Conv2dLayer c1, c2;
  NodeRef forward(const NodeRef& x) const;
};

// Non-local network block. Queries stay at full resolution; keys/values are
// maxpooled by sparse_s (sparse_s = 1 is the dense form).
struct NLNParams {
  NodeRef w_theta, w_phi, w_g, w_z;  // [C,C] cross-channel transforms
  int sparse_s = 1;
  NodeRef forward(const NodeRef& x) const;
};

// Non-local attention module: three-ResBlock main branch modulated by a
// sigmoid mask from an NLN + three ResBlocks + 1x1 conv branch, then an
// outer residual connection.
struct NLAMParams {
  ResBlockParams main1, main2, main3;
  NLNParams nln;
  ResBlockParams mask1, mask2, mask3;
  Conv2dLayer mask_out;  // 1x1
  NodeRef attention_mask(const NodeRef& x) const;
  NodeRef forward(const NodeRef& x, NodeRef* mask_capture = nullptr) const;
};

// Builders registering parameters under `prefix` with seeded He-normal
// weights (zero biases).
Conv2dLayer make_conv(ParamStore& ps, const std::string& prefix, int cout, int cin, int k, int stride, int pad,
                      Rng& rng);
TConv2dLayer make_tconv(ParamStore& ps, const std::string& prefix, int cin, int cout, int k, int stride, Rng& rng);
ResBlockParams make_resblock(ParamStore& ps, const std::string& prefix, int channels, Rng& rng);
NLNParams make_nln(ParamStore& ps, const std::string& prefix, int channels, int sparse_s, Rng& rng);
NLAMParams make_nlam(ParamStore& ps, const std::string& prefix, int channels, int sparse_s, Rng& rng);

}  // namespace nlaic

#endif  // NLAIC_NN_H_
