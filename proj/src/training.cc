#include "nlaic/training.h"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "nlaic/data.h"
#include "nlaic/metrics.h"

namespace nlaic {

void TrainingConfig::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("training: lambda must be positive");
  if (batch < 1 || epochs < 1 || patch < 1) throw std::invalid_argument("training: bad batch/epochs/patch");
  if (!(lr >= 0.0)) throw std::invalid_argument("training: bad learning rate");
}

NodeRef distortion_node(const NodeRef& orig, const NodeRef& recon_raw, const TrainingConfig& cfg) {
  if (cfg.metric == TrainingConfig::Metric::kMse) {
    auto e = ag::sub(recon_raw, orig);
    return ag::mean(ag::mul(e, e));
  }
  return ag::add_scalar(ag::neg(ms_ssim_node(orig, recon_raw, cfg.msssim_levels)), 1.0);
}

double rd_loss(const Tensor& orig, const Tensor& recon, double rate_x_bits, double rate_z_bits,
               const TrainingConfig& cfg) {
  if (!orig.same_shape(recon))
    throw std::invalid_argument("rd_loss: shape mismatch " + orig.shape_str() + " vs " + recon.shape_str());
  const double d = distortion_node(constant(orig), constant(recon), cfg)->value[0];
  return cfg.lambda * d + rate_x_bits + rate_z_bits;
}

Trainer::Trainer(CodecModel& model, TrainingConfig cfg) : model_(model), cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
  set_scope(TrainScope::kAll);
}

Trainer::~Trainer() {
  // Leave every parameter trainable for the next owner.
  for (const auto& [name, p] : model_.params.entries()) p->requires_grad = true;
}

void Trainer::set_scope(TrainScope scope, int scaling_quality) {
  scope_ = scope;
  scaling_q_ = scaling_quality;
  const std::string qa = "sf.q" + std::to_string(scaling_quality) + ".a";
  const std::string qb = "sf.q" + std::to_string(scaling_quality) + ".b";
  for (const auto& [name, p] : model_.params.entries()) {
    bool on = true;
    if (scope == TrainScope::kContextOnly) on = name.rfind("ctx.", 0) == 0;
    if (scope == TrainScope::kScalingOnly) on = name == qa || name == qb;
    p->requires_grad = on;
    p->zero_grad();
  }
}

double Trainer::lr_for(const std::string& name) const {
  double lr = cfg_.lr;
  if (name.rfind("ctx.", 0) == 0 && epoch_ >= cfg_.context_clip_epoch) lr *= cfg_.context_clip_factor;
  return lr;
}

Trainer::LossBuild Trainer::build_loss(const Tensor& batch, Rng& noise) {
  if (batch.rank() != 4 || batch.dim(1) != 3)
    throw std::invalid_argument("train: batch must be [N,3,H,W], got " + batch.shape_str());
  const int N = batch.dim(0), H = batch.dim(2), W = batch.dim(3);
  const int C = model_.arch.latent_channels;

  NodeRef a_vec, b_vec;
  if (scope_ == TrainScope::kScalingOnly && scaling_q_ > 0) {
    a_vec = model_.scaling_a_node(scaling_q_);
    b_vec = model_.scaling_b_node(scaling_q_);
  } else {
    a_vec = constant(Tensor::full({C}, 1.0));
    b_vec = constant(Tensor::zeros({C}));
  }

  NodeRef loss_sum, d_sum, rx_sum, rz_sum;
  auto acc = [](NodeRef& dst, const NodeRef& v) { dst = dst ? ag::add(dst, v) : v; };

  for (int n = 0; n < N; ++n) {
    auto img = constant(batch_item(batch, n));
    auto x0 = model_.main_encode_node(img);
    auto z0 = model_.hyper_encode_node(x0);

    Tensor zn(z0->value.shape());
    for (std::int64_t i = 0; i < zn.size(); ++i) zn[i] = noise.u01() - 0.5;
    auto z_noisy = ag::add(z0, constant(zn));
    auto rate_z = factorized_rate_bits_node(model_.density, z_noisy);
    auto hyper_feats = model_.hyper_decode_node(z_noisy);

    const int lh = x0->value.dim(1), lw = x0->value.dim(2);
    auto a_chw = ag::broadcast_chw(a_vec, lh, lw);
    auto b_chw = ag::broadcast_chw(b_vec, lh, lw);
    auto scaled = ag::add(ag::mul(x0, a_chw), b_chw);
    Tensor xn(scaled->value.shape());
    for (std::int64_t i = 0; i < xn.size(); ++i) xn[i] = noise.u01() - 0.5;
    auto scaled_noisy = ag::add(scaled, constant(xn));
    auto x_noisy = ag::divide(ag::sub(scaled_noisy, b_chw), a_chw);  // unscaled domain

    auto ep = context_predict_node(model_.ctx, model_.arch.variant, x_noisy, hyper_feats);
    auto half_w = ag::broadcast_chw(ag::divide(constant(Tensor::full({C}, 0.5)), a_vec), lh, lw);
    auto rate_x = gaussian_rate_bits_node(x_noisy, ep, half_w);

    auto recon = model_.main_decode_node(x_noisy);
    auto d = distortion_node(img, recon, cfg_);

    acc(d_sum, d);
    acc(rx_sum, rate_x);
    acc(rz_sum, rate_z);
  }
  const double inv = 1.0 / static_cast<double>(N);
  auto d_mean = ag::mul_scalar(d_sum, inv);
  auto rx_mean = ag::mul_scalar(rx_sum, inv);
  auto rz_mean = ag::mul_scalar(rz_sum, inv);
  auto loss = ag::add(ag::mul_scalar(d_mean, cfg_.lambda), ag::add(rx_mean, rz_mean));

  LossBuild out;
  out.loss = loss;
  out.stats.loss = loss->value[0];
  out.stats.d = d_mean->value[0];
  out.stats.bpp_x = rx_mean->value[0] / (static_cast<double>(H) * W);
  out.stats.bpp_z = rz_mean->value[0] / (static_cast<double>(H) * W);
  if (!std::isfinite(out.stats.loss))
    throw std::runtime_error("training aborted: non-finite loss (d=" + std::to_string(out.stats.d) +
                             ", bpp_x=" + std::to_string(out.stats.bpp_x) +
                             ", bpp_z=" + std::to_string(out.stats.bpp_z) + "); last saved checkpoint is intact");
  return out;
}

void Trainer::adam_update() {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  adam_t_ += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_t_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_t_));
  for (const auto& [name, p] : model_.params.entries()) {
    if (!p->requires_grad || p->grad.size() == 0) continue;
    AdamState& st = adam_[p.get()];
    if (st.m.size() == 0) {
      st.m = Tensor::zeros(p->value.shape());
      st.v = Tensor::zeros(p->value.shape());
    }
    const double lr = lr_for(name);
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      st.m[i] = kBeta1 * st.m[i] + (1.0 - kBeta1) * g;
      st.v[i] = kBeta2 * st.v[i] + (1.0 - kBeta2) * g * g;
      p->value[i] -= lr * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + kEps);
    }
  }
}

StepStats Trainer::train_step(const Tensor& batch) {
  model_.params.zero_grads();
  LossBuild lb = build_loss(batch, rng_);
  backward(lb.loss);
  adam_update();
  if (scope_ == TrainScope::kScalingOnly && scaling_q_ > 0) {
    // Keep the invariant a > 0 regardless of step size.
    NodeRef a = model_.scaling_a_node(scaling_q_);
    for (std::int64_t i = 0; i < a->value.size(); ++i) a->value[i] = std::max(1e-3, a->value[i]);
  }
  return lb.stats;
}

StepStats Trainer::eval_batch(const Tensor& batch, std::uint64_t noise_seed) {
  Rng noise(noise_seed);
  return build_loss(batch, noise).stats;
}

std::vector<StepStats> run_training(CodecModel& model, const Tensor& patches, const TrainingConfig& cfg,
                                    TrainScope scope, int scaling_quality, int total_steps,
                                    const std::string& stats_path) {
  Trainer trainer(model, cfg);
  trainer.set_scope(scope, scaling_quality);
  std::ofstream stats_os;
  if (!stats_path.empty()) {
    stats_os.open(stats_path);
    if (!stats_os) throw std::runtime_error("cannot open stats log " + stats_path);
  }
  const int count = patches.dim(0);
  const int per_epoch = std::max(1, (count + cfg.batch - 1) / cfg.batch);
  Rng shuffle_rng(cfg.seed ^ 0x5bd1e995u);
  std::vector<int> order(static_cast<size_t>(count));
  std::iota(order.begin(), order.end(), 0);

  std::vector<StepStats> all;
  all.reserve(static_cast<size_t>(total_steps));
  for (int step = 0; step < total_steps; ++step) {
    const int epoch = step / per_epoch;
    trainer.set_epoch(epoch);
    if (step % per_epoch == 0) {
      for (int i = count - 1; i > 0; --i) {
        const int j = static_cast<int>(shuffle_rng.below(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
      }
    }
    const int b0 = (step % per_epoch) * cfg.batch;
    std::vector<Tensor> items;
    for (int k = 0; k < cfg.batch; ++k) items.push_back(batch_item(patches, order[static_cast<size_t>((b0 + k) % count)]));
    StepStats st = trainer.train_step(stack_images(items));
    st.step = step;
    all.push_back(st);
    if (stats_os)
      stats_os << "{\"step\":" << st.step << ",\"loss\":" << st.loss << ",\"bpp_x\":" << st.bpp_x
               << ",\"bpp_z\":" << st.bpp_z << ",\"d\":" << st.d << "}\n";
  }
  return all;
}

std::vector<FitResult> fit_scaling_factors(CodecModel& model, const Tensor& calib,
                                           const std::vector<double>& target_lambdas, const TrainingConfig& base_cfg,
                                           int steps_per_target) {
  if (calib.rank() != 4) throw std::invalid_argument("fit_scaling_factors: calibration batch must be [N,3,H,W]");
  std::vector<FitResult> results;
  const int C = model.arch.latent_channels;
  for (double target : target_lambdas) {
    const int q = model.add_scaling_table(Tensor::full({C}, 1.0), Tensor::zeros({C}));
    TrainingConfig cfg = base_cfg;
    cfg.lambda = target;
    Trainer trainer(model, cfg);
    trainer.set_scope(TrainScope::kScalingOnly, q);

    const int count = calib.dim(0);
    Rng pick(base_cfg.seed ^ static_cast<std::uint64_t>(q) * 0x9e3779b9u);
    auto sample_batch = [&]() {
      std::vector<Tensor> items;
      for (int k = 0; k < cfg.batch; ++k) items.push_back(batch_item(calib, static_cast<int>(pick.below(static_cast<std::uint64_t>(count)))));
      return stack_images(items);
    };
    Tensor probe = sample_batch();
    FitResult r;
    r.quality = q;
    r.target_lambda = target;
    r.first_loss = trainer.eval_batch(probe, 777).loss;
    for (int s = 0; s < steps_per_target; ++s) trainer.train_step(sample_batch());
    r.final_loss = trainer.eval_batch(probe, 777).loss;
    r.converged = r.final_loss < r.first_loss;
    const Tensor& a = model.scaling_a_node(q)->value;
    const Tensor& b = model.scaling_b_node(q)->value;
    for (std::int64_t i = 0; i < a.size(); ++i) {
      r.mean_a += a[i] / static_cast<double>(a.size());
      r.mean_b += b[i] / static_cast<double>(b.size());
    }
    results.push_back(r);
  }
  return results;
}

}  // namespace nlaic
