#ifndef NLAIC_MODEL_H_
#define NLAIC_MODEL_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nlaic/entropy.h"
#include "nlaic/nn.h"
#include "nlaic/quant.h"

namespace nlaic {

struct ArchConfig {
  int n_channels = 32;      // feature width (192 at full scale)
  int latent_channels = 32;  // C
  int context_kernel = 5;    // 3 allowed for tests
  int nln_sparse_s = 1;      // key/value downsampling factor
  int fusion_hidden = 0;     // 0 -> 3 * latent_channels
  ContextVariant variant = ContextVariant::kFullCausal;

  static constexpr int kMainStages = 4;
  static constexpr int kHyperStages = 2;
  static constexpr int kDownsampleFactor = 64;  // 2^(main+hyper stages)

  int fusion_width() const { return fusion_hidden > 0 ? fusion_hidden : 3 * latent_channels; }
  void validate() const;
  bool operator==(const ArchConfig&) const = default;
};

// The full parameter set: main/hyper encoder-decoder pairs with their NLAM
// placements, factorized densities, context model and quality scaling
// tables. Quality 0 is always the identity scaling and is not stored.
class CodecModel {
 public:
  ArchConfig arch;
  ParamStore params;

  Conv2dLayer enc_s1, enc_s2, enc_s3, enc_s4;
  NLAMParams enc_nlam1, enc_nlam2;
  NLAMParams dec_nlam1, dec_nlam2;
  TConv2dLayer dec_s1, dec_s2, dec_s3, dec_s4;
  Conv2dLayer henc_s1, henc_s2;
  NLAMParams henc_nlam;
  TConv2dLayer hdec_s1, hdec_s2;
  NLAMParams hdec_nlam;
  FactorizedDensity density;
  ContextModel ctx;

  static CodecModel create(const ArchConfig& arch, std::uint64_t seed, int extra_quality_tables = 0);

  NodeRef main_encode_node(const NodeRef& img, NodeRef* bottleneck_mask = nullptr) const;
  NodeRef main_decode_node(const NodeRef& latent) const;  // raw, unclamped
  NodeRef hyper_encode_node(const NodeRef& latent) const;
  NodeRef hyper_decode_node(const NodeRef& z_hat) const;

  Tensor main_encode(const Tensor& img) const;
  Tensor main_decode(const Tensor& latent) const;  // clamped to [0,1]
  Tensor hyper_encode(const Tensor& latent) const;
  Tensor hyper_decode(const Tensor& z_hat) const;

  // Bottleneck attention mask for an image (mask of the latent-level NLAM).
  Tensor encoder_masks(const Tensor& img) const;

  int num_quality() const { return 1 + n_extra_quality_; }
  QualityScalingSet scaling_for(int q) const;
  NodeRef scaling_a_node(int q) const;  // q >= 1
  NodeRef scaling_b_node(int q) const;
  // Appends a fitted table; returns its quality index.
  int add_scaling_table(const Tensor& a, const Tensor& b);
  void set_scaling_table(int q, const Tensor& a, const Tensor& b);

  void save(const std::string& path) const;
  static CodecModel load(const std::string& path);

  // Name/shape inventory derived from the config alone (independent of the
  // construction code path): guards silent mis-wiring.
  static std::vector<std::pair<std::string, std::vector<int>>> expected_inventory(const ArchConfig& arch,
                                                                                  int extra_quality_tables);

 private:
  int n_extra_quality_ = 0;
};

}  // namespace nlaic

#endif  // NLAIC_MODEL_H_
