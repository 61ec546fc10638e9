#include "nlaic/model.h"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace nlaic {

void ArchConfig::validate() const {
  if (n_channels < 1 || latent_channels < 1) throw std::invalid_argument("arch: channel counts must be >= 1");
  if (n_channels > 0xFFFF || latent_channels > 0xFFFF) throw std::invalid_argument("arch: channel counts too large");
  if (context_kernel != 3 && context_kernel != 5) throw std::invalid_argument("arch: context kernel must be 3 or 5");
  if (nln_sparse_s < 1) throw std::invalid_argument("arch: sparse factor must be >= 1");
  if (fusion_hidden < 0) throw std::invalid_argument("arch: fusion width must be >= 0");
}

CodecModel CodecModel::create(const ArchConfig& arch, std::uint64_t seed, int extra_quality_tables) {
  arch.validate();
  if (extra_quality_tables < 0 || extra_quality_tables > 254)
    throw std::invalid_argument("quality table count out of range");
  CodecModel m;
  m.arch = arch;
  m.n_extra_quality_ = extra_quality_tables;
  Rng rng(seed);
  const int n = arch.n_channels, C = arch.latent_channels, s = arch.nln_sparse_s;
  ParamStore& ps = m.params;

  m.enc_s1 = make_conv(ps, "enc.s1", n, 3, 5, 2, 2, rng);
  m.enc_s2 = make_conv(ps, "enc.s2", n, n, 5, 2, 2, rng);
  m.enc_nlam1 = make_nlam(ps, "enc.nlam1", n, s, rng);
  m.enc_s3 = make_conv(ps, "enc.s3", n, n, 5, 2, 2, rng);
  m.enc_s4 = make_conv(ps, "enc.s4", C, n, 5, 2, 2, rng);
  m.enc_nlam2 = make_nlam(ps, "enc.nlam2", C, s, rng);

  m.dec_nlam1 = make_nlam(ps, "dec.nlam1", C, s, rng);
  m.dec_s1 = make_tconv(ps, "dec.s1", C, n, 5, 2, rng);
  m.dec_s2 = make_tconv(ps, "dec.s2", n, n, 5, 2, rng);
  m.dec_nlam2 = make_nlam(ps, "dec.nlam2", n, s, rng);
  m.dec_s3 = make_tconv(ps, "dec.s3", n, n, 5, 2, rng);
  m.dec_s4 = make_tconv(ps, "dec.s4", n, 3, 5, 2, rng);

  m.henc_s1 = make_conv(ps, "henc.s1", n, C, 5, 2, 2, rng);
  m.henc_nlam = make_nlam(ps, "henc.nlam", n, s, rng);
  m.henc_s2 = make_conv(ps, "henc.s2", C, n, 5, 2, 2, rng);

  m.hdec_s1 = make_tconv(ps, "hdec.s1", C, n, 5, 2, rng);
  m.hdec_nlam = make_nlam(ps, "hdec.nlam", n, s, rng);
  m.hdec_s2 = make_tconv(ps, "hdec.s2", n, 2 * C, 5, 2, rng);

  m.density = FactorizedDensity::make(ps, "density", C, rng);
  m.ctx = ContextModel::make(ps, "ctx", arch.context_kernel, arch.fusion_width(), rng);

  for (int q = 1; q <= extra_quality_tables; ++q) {
    ps.create("sf.q" + std::to_string(q) + ".a", Tensor::full({C}, 1.0));
    ps.create("sf.q" + std::to_string(q) + ".b", Tensor::zeros({C}));
  }
  return m;
}

NodeRef CodecModel::main_encode_node(const NodeRef& img, NodeRef* bottleneck_mask) const {
  const Tensor& v = img->value;
  if (v.rank() != 3 || v.dim(0) != 3)
    throw std::invalid_argument("main_encode: expected [3,H,W] image, got " + v.shape_str());
  const int H = v.dim(1), W = v.dim(2), f = ArchConfig::kDownsampleFactor;
  if (H % f != 0 || W % f != 0)
    throw std::invalid_argument("main_encode: dims " + v.shape_str() + " not divisible by " + std::to_string(f) +
                                "; pad to [3," + std::to_string((H + f - 1) / f * f) + "," +
                                std::to_string((W + f - 1) / f * f) + "]");
  auto t = ag::relu(enc_s1(img));
  t = ag::relu(enc_s2(t));
  t = enc_nlam1.forward(t);
  t = ag::relu(enc_s3(t));
  t = enc_s4(t);
  return enc_nlam2.forward(t, bottleneck_mask);
}

NodeRef CodecModel::main_decode_node(const NodeRef& latent) const {
  auto t = dec_nlam1.forward(latent);
  t = ag::relu(dec_s1(t));
  t = ag::relu(dec_s2(t));
  t = dec_nlam2.forward(t);
  t = ag::relu(dec_s3(t));
  return dec_s4(t);
}

NodeRef CodecModel::hyper_encode_node(const NodeRef& latent) const {
  const Tensor& v = latent->value;
  if (v.rank() != 3 || v.dim(0) != arch.latent_channels)
    throw std::invalid_argument("hyper_encode: expected [" + std::to_string(arch.latent_channels) +
                                ",h,w] latent, got " + v.shape_str());
  if (v.dim(1) % 4 != 0 || v.dim(2) % 4 != 0)
    throw std::invalid_argument("hyper_encode: latent dims " + v.shape_str() + " not divisible by 4");
  auto t = ag::relu(henc_s1(latent));
  t = henc_nlam.forward(t);
  return henc_s2(t);
}

NodeRef CodecModel::hyper_decode_node(const NodeRef& z_hat) const {
  auto t = ag::relu(hdec_s1(z_hat));
  t = hdec_nlam.forward(t);
  return hdec_s2(t);
}

Tensor CodecModel::main_encode(const Tensor& img) const { return main_encode_node(constant(img))->value; }

Tensor CodecModel::main_decode(const Tensor& latent) const {
  Tensor out = main_decode_node(constant(latent))->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::min(1.0, std::max(0.0, out[i]));
  return out;
}

Tensor CodecModel::hyper_encode(const Tensor& latent) const { return hyper_encode_node(constant(latent))->value; }

Tensor CodecModel::hyper_decode(const Tensor& z_hat) const { return hyper_decode_node(constant(z_hat))->value; }

Tensor CodecModel::encoder_masks(const Tensor& img) const {
  NodeRef mask;
  main_encode_node(constant(img), &mask);
  return mask->value;
}

QualityScalingSet CodecModel::scaling_for(int q) const {
  if (q < 0 || q >= num_quality())
    throw std::invalid_argument("quality index " + std::to_string(q) + " out of range (model has " +
                                std::to_string(num_quality()) + " tables)");
  if (q == 0) return QualityScalingSet::identity(arch.latent_channels, 0);
  QualityScalingSet s;
  s.a = scaling_a_node(q)->value;
  s.b = scaling_b_node(q)->value;
  s.quality = q;
  s.validate();
  return s;
}

NodeRef CodecModel::scaling_a_node(int q) const { return params.find("sf.q" + std::to_string(q) + ".a"); }
NodeRef CodecModel::scaling_b_node(int q) const { return params.find("sf.q" + std::to_string(q) + ".b"); }

int CodecModel::add_scaling_table(const Tensor& a, const Tensor& b) {
  const int q = num_quality();
  params.create("sf.q" + std::to_string(q) + ".a", a);
  params.create("sf.q" + std::to_string(q) + ".b", b);
  n_extra_quality_ += 1;
  return q;
}

void CodecModel::set_scaling_table(int q, const Tensor& a, const Tensor& b) {
  scaling_a_node(q)->value = a;
  scaling_b_node(q)->value = b;
  scaling_for(q);  // revalidate
}

// ---------------------------------------------------------------------------
// Checkpoint IO: magic "NLCK" | version u8 | arch fields | param entries.
// Doubles are stored as raw IEEE-754 bit patterns, little-endian.
// ---------------------------------------------------------------------------

namespace {

void w_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }
void w_u16(std::ostream& os, std::uint16_t v) {
  os.put(static_cast<char>(v & 0xFF));
  os.put(static_cast<char>(v >> 8));
}
void w_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void w_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint8_t r_u8(std::istream& is) {
  int c = is.get();
  if (c < 0) throw std::runtime_error("checkpoint: unexpected end of file");
  return static_cast<std::uint8_t>(c);
}
std::uint16_t r_u16(std::istream& is) {
  std::uint16_t v = r_u8(is);
  v |= static_cast<std::uint16_t>(r_u8(is)) << 8;
  return v;
}
std::uint32_t r_u32(std::istream& is) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(r_u8(is)) << (8 * i);
  return v;
}
std::uint64_t r_u64(std::istream& is) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(r_u8(is)) << (8 * i);
  return v;
}

}  // namespace

void CodecModel::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write("NLCK", 4);
  w_u8(os, 1);
  w_u16(os, static_cast<std::uint16_t>(arch.n_channels));
  w_u16(os, static_cast<std::uint16_t>(arch.latent_channels));
  w_u8(os, static_cast<std::uint8_t>(arch.context_kernel));
  w_u16(os, static_cast<std::uint16_t>(arch.nln_sparse_s));
  w_u16(os, static_cast<std::uint16_t>(arch.fusion_hidden));
  w_u8(os, static_cast<std::uint8_t>(arch.variant));
  w_u8(os, static_cast<std::uint8_t>(n_extra_quality_));
  w_u32(os, static_cast<std::uint32_t>(params.entries().size()));
  for (const auto& [name, p] : params.entries()) {
    w_u16(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    w_u8(os, static_cast<std::uint8_t>(p->value.rank()));
    for (int d = 0; d < p->value.rank(); ++d) w_u32(os, static_cast<std::uint32_t>(p->value.dim(d)));
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      std::uint64_t bits;
      double v = p->value[i];
      std::memcpy(&bits, &v, 8);
      w_u64(os, bits);
    }
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

CodecModel CodecModel::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open model file " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, "NLCK", 4) != 0)
    throw std::runtime_error(path + ": not a model checkpoint (bad magic)");
  if (r_u8(is) != 1) throw std::runtime_error(path + ": unsupported checkpoint version");
  ArchConfig arch;
  arch.n_channels = r_u16(is);
  arch.latent_channels = r_u16(is);
  arch.context_kernel = r_u8(is);
  arch.nln_sparse_s = r_u16(is);
  arch.fusion_hidden = r_u16(is);
  arch.variant = context_variant_from_u8(r_u8(is));
  const int n_extra = r_u8(is);
  CodecModel m = create(arch, 0, n_extra);
  const std::uint32_t count = r_u32(is);
  if (count != m.params.entries().size())
    throw std::runtime_error(path + ": parameter count " + std::to_string(count) + " does not match architecture (" +
                             std::to_string(m.params.entries().size()) + " expected)");
  for (const auto& [name, p] : m.params.entries()) {
    const std::uint16_t len = r_u16(is);
    std::string got(len, '\0');
    is.read(got.data(), len);
    if (got != name) throw std::runtime_error(path + ": expected parameter " + name + ", found " + got);
    const int rank = r_u8(is);
    std::vector<int> dims(static_cast<size_t>(rank));
    for (int d = 0; d < rank; ++d) dims[static_cast<size_t>(d)] = static_cast<int>(r_u32(is));
    if (dims != p->value.shape())
      throw std::runtime_error(path + ": parameter " + name + " has shape " + Tensor::shape_str(dims) +
                               ", expected " + p->value.shape_str());
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      std::uint64_t bits = r_u64(is);
      double v;
      std::memcpy(&v, &bits, 8);
      p->value[i] = v;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Inventory
// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, std::vector<int>>> CodecModel::expected_inventory(const ArchConfig& arch,
                                                                                     int extra_quality_tables) {
  arch.validate();
  const int n = arch.n_channels, C = arch.latent_channels;
  std::vector<std::pair<std::string, std::vector<int>>> inv;
  auto conv = [&](const std::string& p, int cout, int cin, int k) {
    inv.push_back({p + ".w", {cout, cin, k, k}});
    inv.push_back({p + ".b", {cout}});
  };
  auto tconv = [&](const std::string& p, int cin, int cout, int k) {
    inv.push_back({p + ".w", {cin, cout, k, k}});
    inv.push_back({p + ".b", {cout}});
  };
  auto resblock = [&](const std::string& p, int ch) {
    conv(p + ".c1", ch, ch, 3);
    conv(p + ".c2", ch, ch, 3);
  };
  auto nlam = [&](const std::string& p, int ch) {
    resblock(p + ".main1", ch);
    resblock(p + ".main2", ch);
    resblock(p + ".main3", ch);
    for (const char* t : {"theta", "phi", "g", "z"}) inv.push_back({p + ".mask.nln." + std::string(t), {ch, ch}});
    resblock(p + ".mask.rb1", ch);
    resblock(p + ".mask.rb2", ch);
    resblock(p + ".mask.rb3", ch);
    conv(p + ".mask.out", ch, ch, 1);
  };

  conv("enc.s1", n, 3, 5);
  conv("enc.s2", n, n, 5);
  nlam("enc.nlam1", n);
  conv("enc.s3", n, n, 5);
  conv("enc.s4", C, n, 5);
  nlam("enc.nlam2", C);
  nlam("dec.nlam1", C);
  tconv("dec.s1", C, n, 5);
  tconv("dec.s2", n, n, 5);
  nlam("dec.nlam2", n);
  tconv("dec.s3", n, n, 5);
  tconv("dec.s4", n, 3, 5);
  conv("henc.s1", n, C, 5);
  nlam("henc.nlam", n);
  conv("henc.s2", C, n, 5);
  tconv("hdec.s1", C, n, 5);
  nlam("hdec.nlam", n);
  tconv("hdec.s2", n, 2 * C, 5);

  const int widths[5] = {1, 3, 3, 3, 1};
  for (int k = 0; k < 4; ++k) {
    inv.push_back({"density.m" + std::to_string(k), {C, widths[k + 1], widths[k]}});
    inv.push_back({"density.b" + std::to_string(k), {C, widths[k + 1]}});
    if (k < 3) inv.push_back({"density.a" + std::to_string(k), {C, widths[k + 1]}});
  }
  const int kk = arch.context_kernel, F = arch.fusion_width();
  inv.push_back({"ctx.kernel", {kk, kk, kk}});
  inv.push_back({"ctx.bias", {1}});
  inv.push_back({"ctx.f1.w", {F, 3}});
  inv.push_back({"ctx.f1.b", {F}});
  inv.push_back({"ctx.f2.w", {2, F}});
  inv.push_back({"ctx.f2.b", {2}});
  for (int q = 1; q <= extra_quality_tables; ++q) {
    inv.push_back({"sf.q" + std::to_string(q) + ".a", {C}});
    inv.push_back({"sf.q" + std::to_string(q) + ".b", {C}});
  }
  return inv;
}

}  // namespace nlaic
