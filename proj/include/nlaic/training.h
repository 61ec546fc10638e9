#ifndef NLAIC_TRAINING_H_
#define NLAIC_TRAINING_H_

#include <string>
#include <unordered_map>
#include <vector>

#include "nlaic/model.h"

namespace nlaic {

struct TrainingConfig {
  double lambda = 2e5;  // weighs distortion against rate in bits
  enum class Metric { kMse, kMsssim };
  Metric metric = Metric::kMse;
  double lr = 1e-4;
  int epochs = 1;
  int batch = 8;
  int patch = 64;
  std::uint64_t seed = 1;
  // The context model's learning rate is scaled by this factor from the
  // given epoch on.
  int context_clip_epoch = 30;
  double context_clip_factor = 1.0 / 3.0;
  int msssim_levels = 3;

  void validate() const;
};

struct StepStats {
  int step = 0;
  double loss = 0.0;
  double bpp_x = 0.0;
  double bpp_z = 0.0;
  double d = 0.0;
};

// lambda * d + R_x + R_z, rates in bits. The plain overload computes d from
// the image pair under cfg.metric.
double rd_loss(const Tensor& orig, const Tensor& recon, double rate_x_bits, double rate_z_bits,
               const TrainingConfig& cfg);
NodeRef distortion_node(const NodeRef& orig, const NodeRef& recon_raw, const TrainingConfig& cfg);

enum class TrainScope { kAll, kContextOnly, kScalingOnly };

// Single-writer optimization loop over one model. Forward passes use the
// uniform-noise quantization proxy; inference paths never do.
class Trainer {
 public:
  Trainer(CodecModel& model, TrainingConfig cfg);
  ~Trainer();

  void set_scope(TrainScope scope, int scaling_quality = 0);
  void set_epoch(int epoch) { epoch_ = epoch; }
  void set_lambda(double l) { cfg_.lambda = l; }
  const TrainingConfig& config() const { return cfg_; }

  // One adaptive-moment step on the current scope. Throws on non-finite
  // loss (parameters are left at their pre-step values).
  StepStats train_step(const Tensor& batch4d);
  // Deterministic loss evaluation (fixed noise stream, no update).
  StepStats eval_batch(const Tensor& batch4d, std::uint64_t noise_seed);

 private:
  struct LossBuild {
    NodeRef loss;
    StepStats stats;
  };
  LossBuild build_loss(const Tensor& batch4d, Rng& noise);
  void adam_update();
  double lr_for(const std::string& name) const;

  CodecModel& model_;
  TrainingConfig cfg_;
  TrainScope scope_ = TrainScope::kAll;
  int scaling_q_ = 0;
  int epoch_ = 0;
  Rng rng_;
  struct AdamState {
    Tensor m, v;
  };
  std::unordered_map<Node*, AdamState> adam_;
  std::int64_t adam_t_ = 0;
};

// Shuffled-epoch driver; writes one JSON record per step when stats_path is
// non-empty and returns the full trajectory.
std::vector<StepStats> run_training(CodecModel& model, const Tensor& patches4d, const TrainingConfig& cfg,
                                    TrainScope scope, int scaling_quality, int total_steps,
                                    const std::string& stats_path = "");

struct FitResult {
  int quality = 0;
  double target_lambda = 0.0;
  bool converged = false;
  double first_loss = 0.0;
  double final_loss = 0.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
};

// Fits one (a,b) table per target lambda with everything else frozen
// (the hyper stack and transforms are untouched). Tables are appended in
// target order; pass targets sorted ascending so larger quality indices mean
// larger rates.
std::vector<FitResult> fit_scaling_factors(CodecModel& model, const Tensor& calib_patches4d,
                                           const std::vector<double>& target_lambdas, const TrainingConfig& base_cfg,
                                           int steps_per_target);

}  // namespace nlaic

#endif  // NLAIC_TRAINING_H_
