#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pursuit/ndgrad.hpp"
#include "pursuit/terrain_world.hpp"

namespace pursuit::filter {

inline constexpr int kInputDim = 13;
inline constexpr int kNumComponents = 8;
inline constexpr double kSigmaMin = 1e-3;

// Normalized feature vector: evader start (2), t/T_max (1), then two
// detection slots of (position 2, velocity 2, staleness 1), most recent
// first. Missing slots are padded with (start, zero velocity, t/T_max).
struct FilterInput {
  std::array<double, kInputDim> v{};

  Vec2 start() const { return {v[0], v[1]}; }
  double t_norm() const { return v[2]; }
  Vec2 slot_pos(int s) const { return {v[3 + 5 * s], v[4 + 5 * s]}; }
  Vec2 slot_vel(int s) const { return {v[5 + 5 * s], v[6 + 5 * s]}; }
  double slot_staleness(int s) const { return v[7 + 5 * s]; }
};

FilterInput build_filter_input(const std::vector<world::Detection>& log, int t,
                               Vec2 start, int t_max);

struct MotionState {
  Vec2 pos;       // last detected position
  Vec2 vel;       // last detected velocity, units/step
  int timestep;   // detection timestep
};

// Constant-velocity extrapolation, clamped to the map.
Vec2 motion_extrapolate(const MotionState& m, int k);

// Extrapolated current position implied by an input's slot-0 detection.
Vec2 extrapolate_input(const FilterInput& in, int t_max);

// N_g weighted diagonal 2-D Gaussians.
struct MixturePrediction {
  std::array<double, kNumComponents> lambda{};
  std::array<Vec2, kNumComponents> mu{};
  std::array<Vec2, kNumComponents> sigma{};
};

enum class ModelKind { Pmc, Fc };

// Head tensors of a forward pass, still on the tape for training.
struct MixtureHead {
  grad::Value lambda_logits;  // B x 8
  grad::Value mu;             // B x 16
  grad::Value sigma;          // B x 16, already >= sigma_min
};

struct FilterHyper {
  int prior_hidden = 64;
  int embed = 32;
  int branch_hidden = 32;
  int decoder_hidden = 64;
  double lr = 1e-3;
  int batch = 128;
  int max_epochs = 200;
  int patience = 10;  // early stop on validation NLL plateau
};

class FilterModel {
 public:
  virtual ~FilterModel() = default;
  virtual ModelKind kind() const = 0;
  // inputs: batch x 13 row-major
  virtual MixtureHead forward(grad::Tape& t, const double* inputs,
                              int batch) = 0;
  // Training-time forward; models may apply stochastic regularization here.
  // Defaults to the deterministic forward.
  virtual MixtureHead forward_train(grad::Tape& t, const double* inputs,
                                    int batch, std::mt19937_64& /*rng*/) {
    return forward(t, inputs, batch);
  }
  // Fraction of the training budget consumed (0 at the first epoch, -> 1);
  // lets models anneal training-time regularization.
  virtual void set_train_progress(double /*progress*/) {}
  virtual grad::ParamStore& params() = 0;
  const grad::ParamStore& params() const {
    return const_cast<FilterModel*>(this)->params();
  }

  MixturePrediction predict(const FilterInput& in);
  void predict_batch(const std::vector<FilterInput>& in,
                     std::vector<MixturePrediction>& out);
};

// Prior encoder on (start, t), motion branch on the extrapolated detection,
// sigmoid confidence gate alpha blending the two embeddings, mixture decoder.
class PmcModel : public FilterModel {
 public:
  PmcModel(const FilterHyper& h, std::uint64_t seed, int t_max);
  ModelKind kind() const override { return ModelKind::Pmc; }
  MixtureHead forward(grad::Tape& t, const double* inputs, int batch) override;
  MixtureHead forward_train(grad::Tape& t, const double* inputs, int batch,
                            std::mt19937_64& rng) override;
  void set_train_progress(double progress) override {
    branch_dropout_ = 0.25 * std::max(0.0, 1.0 - 2.0 * progress);
  }
  grad::ParamStore& params() override { return params_; }
  int t_max() const { return t_max_; }

 private:
  MixtureHead forward_impl(grad::Tape& t, const double* inputs, int batch,
                           const double* keep, const double* force);
  grad::ParamStore params_;
  grad::Linear enc1_, enc2_, enc3_;
  grad::Linear mot1_, mot2_;
  grad::Linear conf1_, conf2_;
  grad::Linear dec1_, dec2_;
  int t_max_;
  double branch_dropout_ = 0.25;
};

// Single-trunk baseline on the same 13 inputs.
class FcModel : public FilterModel {
 public:
  FcModel(const FilterHyper& h, std::uint64_t seed);
  ModelKind kind() const override { return ModelKind::Fc; }
  MixtureHead forward(grad::Tape& t, const double* inputs, int batch) override;
  grad::ParamStore& params() override { return params_; }

 private:
  grad::ParamStore params_;
  grad::Linear l1_, l2_, dec1_, dec2_;
};

std::unique_ptr<FilterModel> make_model(ModelKind kind, const FilterHyper& h,
                                        std::uint64_t seed, int t_max);

// Mean over the batch of -log sum_i lambda_i N(y; mu_i, diag sigma_i^2),
// in log space via log-sum-exp. targets: batch x 2.
grad::Value nll_loss(grad::Tape& t, const MixtureHead& head,
                     const double* targets, int batch);
double nll_value(const MixturePrediction& pred, Vec2 y);

struct TrainResult {
  std::vector<double> train_nll;  // per epoch
  std::vector<double> val_nll;
  int best_epoch = 0;
};

using Sample = std::pair<FilterInput, Vec2>;

TrainResult train_filter(FilterModel& model, const std::vector<Sample>& train,
                         const std::vector<Sample>& val,
                         const FilterHyper& hyper, std::uint64_t seed);

// Filter metrics (higher LL better, lower ADE better).
double metric_ll(const std::vector<MixturePrediction>& preds,
                 const std::vector<Vec2>& targets);
double metric_ade(const std::vector<MixturePrediction>& preds,
                  const std::vector<Vec2>& targets);
// Mixture mass within distance delta of center, 64x64 tensor-product
// quadrature masked to the disk; absolute tolerance ~1e-3.
double disk_probability(const MixturePrediction& pred, Vec2 center,
                        double delta);
double metric_ctp(const std::vector<MixturePrediction>& preds,
                  const std::vector<Vec2>& targets, double delta = 0.05,
                  double p_thresh = 0.5);
// Empirical 1-sigma coverage under the max-responsibility component minus
// the ideal 2-D Gaussian value 1 - e^{-1/2}.
double metric_desv(const std::vector<MixturePrediction>& preds,
                   const std::vector<Vec2>& targets);

// Median seconds per forward pass over >= 20 timed batches.
double bench_runtime(FilterModel& model, int batch = 128, int reps = 21);

}  // namespace pursuit::filter
