#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "warfarin/env.hpp"
#include "warfarin/net.hpp"

namespace warfarin {

// Fixed affine scaling of the observation tuple onto roughly [0, 1]. The
// scales are frozen into checkpoints so a policy is always fed the same
// encoding it was trained with.
struct ObsNormalization {
  double inr_scale = 3.0;
  double dose_scale = 15.0;
  double duration_scale = 7.0;

  Eigen::Vector4d normalize(const Observation& obs) const {
    return {obs.inr_current / inr_scale, obs.inr_previous / inr_scale,
            obs.dose_previous_mg / dose_scale,
            static_cast<double>(obs.duration_previous_days) / duration_scale};
  }
};

// Action Forging: shaping that pushes the trained policy toward a small,
// clinician-friendly action repertoire. Two cooperating mechanisms:
//  - a group-lasso penalty over output neurons (weights-plus-bias rows), which
//    drives entire actions' logit rows toward exactly zero;
//  - an "action focus" logit offset, a hat-shaped bonus psi() centered on the
//    no-change action, phased in over training passes by a logistic schedule
//    h(delta) so early exploration is unaffected.
struct ForgingConfig {
  double group_lasso_coef = 0.0;
  bool focus_enabled = false;
  double focus_peak = 0.2;        // psi at exactly zero change
  double focus_dip = -0.1;        // psi just off zero, rising to 0 at the radius
  double focus_radius = 1.0;
  double schedule_rate = 1e-3;    // logistic steepness in passes
  double schedule_midpoint = 50;  // pass index at half strength
};

// psi(x): focus_peak at x == 0, otherwise (-dip/radius)*|x| + dip.
double wavelet_psi(double percent_change, const ForgingConfig& f);
// h(delta) = 1 / (1 + exp(-rate * (delta - midpoint))).
double forging_schedule(double delta, const ForgingConfig& f);
// Per-action logit offsets h(delta) * psi(x_j); zero when focus is disabled.
Eigen::VectorXd forging_offsets(const ActionSpace& actions, const ForgingConfig& f, double delta);
// Actor output plus forging offsets; the logits actually sampled/argmaxed.
Eigen::MatrixXd policy_logits(const DenseNet& actor, const Eigen::MatrixXd& obs,
                              const ActionSpace& actions, const ForgingConfig& f, double delta);

// Sum over output neurons of ||(weights row, bias)||_2.
double group_lasso_penalty(const DenseNet& actor);
// Adds coef * d(penalty)/d(params) to `grad`. The subgradient of a row at
// exactly zero norm is zero, so a fully eliminated action is never pulled
// back by the penalty.
void add_group_lasso_gradient(const DenseNet& actor, double coef, Gradients& grad);

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);
Eigen::VectorXd log_softmax_pick(const Eigen::MatrixXd& logits, const std::vector<int>& actions);

// Generalized advantage estimation for one episode. `values` has one entry
// per step; the value after the terminal step is taken as 0.
void compute_gae(std::span<const double> rewards, std::span<const double> values, double discount,
                 double lambda, std::span<double> advantages, std::span<double> returns);

struct PpoConfig {
  double clip_ratio = 0.2;
  double discount = 0.5;
  double gae_lambda = 0.97;
  double target_kl = 0.02;
  double entropy_coef = 0.0;
  int actor_iterations = 20;
  int critic_iterations = 80;
  int patients_per_pass = 500;
  long warmup_patients = 20000;
  int patience_passes = 10;
  int max_passes = 200;
  double action_elimination_epsilon = 1e-3;
};

struct RolloutBuffer {
  Eigen::MatrixXd obs;  // one row per decision, normalized
  std::vector<int> actions;
  Eigen::VectorXd logp_old;
  Eigen::VectorXd rewards;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
  int episodes = 0;
  int steps_per_episode = 0;

  int size() const { return static_cast<int>(actions.size()); }
};

struct ActorUpdateStats {
  int iterations = 0;
  double kl = 0.0;
  double surrogate_loss = 0.0;
  double penalty = 0.0;
  bool early_stopped = false;
};

// Clipped-surrogate PPO update with full-batch iterations. Advantages are
// normalized (zero mean, unit sd) once per call. After each optimizer step
// the KL estimate mean(logp_old - logp_new) is evaluated on the whole
// buffer; the update stops after the iteration that crosses target_kl.
ActorUpdateStats actor_update(DenseNet& actor, AdamOptimizer& opt, const LrSchedule& lr,
                              RolloutBuffer& buffer, const PpoConfig& cfg,
                              const ActionSpace& actions, const ForgingConfig& forging,
                              double delta);

// Full-batch MSE regression of the critic on the GAE returns; returns the
// final loss.
double critic_update(DenseNet& critic, AdamOptimizer& opt, const LrSchedule& lr,
                     const RolloutBuffer& buffer, int iterations);

struct ActionUsage {
  int available = 0;  // output rows with norm >= epsilon
  int used = 0;       // distinct argmax actions over the observations
  double no_change_fraction = 0.0;
};

ActionUsage action_usage(const DenseNet& actor, const ForgingConfig& forging, double delta,
                         const Eigen::MatrixXd& obs, const ActionSpace& actions, double epsilon);

// Stop rule: never before warmup_patients have been consumed; afterwards,
// stop once patience_passes have elapsed without a strict improvement of the
// pass PTTR over the running best.
class EarlyStopTracker {
 public:
  EarlyStopTracker(long warmup_patients, int patience_passes)
      : warmup_patients_(warmup_patients), patience_passes_(patience_passes) {}
  bool update(long total_patients_seen, double pass_pttr);
  double best_pttr() const { return best_pttr_; }
  int passes_since_improvement() const { return since_improvement_; }
  bool improved_on_last_update() const { return improved_last_; }

 private:
  long warmup_patients_;
  int patience_passes_;
  double best_pttr_ = -1.0;
  int since_improvement_ = 0;
  bool improved_last_ = false;
};

struct PolicyCheckpoint {
  DenseNet actor;
  DenseNet critic;
  ActionSpace actions;
  ObsNormalization normalization;
  ForgingConfig forging;
  double forging_delta = 0.0;
  std::int64_t actor_steps = 0;
  std::int64_t critic_steps = 0;
  long patients_seen = 0;
  int pass_index = 0;
  std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& path, const PolicyCheckpoint& ckpt);
PolicyCheckpoint load_checkpoint(const std::filesystem::path& path);

// Deterministic (argmax over forged logits) dosing policy around a trained
// checkpoint; ties break toward the lower action index.
class NeuralDosingPolicy : public DosingPolicy {
 public:
  explicit NeuralDosingPolicy(std::shared_ptr<const PolicyCheckpoint> ckpt,
                              std::string name = "rl-policy");
  DoseDecision decide(const Observation& obs, const Patient& p, int day) override;
  std::string name() const override { return name_; }
  std::unique_ptr<DosingPolicy> clone() const override;
  const PolicyCheckpoint& checkpoint() const { return *ckpt_; }
  int select_action(const Observation& obs) const;

 private:
  std::shared_ptr<const PolicyCheckpoint> ckpt_;
  std::string name_;
};

struct TrainLogRow {
  int pass = 0;
  long patients_seen = 0;
  double mean_reward = 0.0;
  double pttr = 0.0;
  double kl = 0.0;
  int actor_iterations = 0;
  double lr_actor = 0.0;
  double lr_critic = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double group_lasso = 0.0;
  int available_actions = 0;
  int used_actions = 0;
  double no_change_fraction = 0.0;
  double best_pttr = 0.0;
  bool is_best = false;
};

struct TrainSetup {
  PpoConfig ppo;
  ForgingConfig forging;
  RewardConfig reward;
  TrialConfig trial;
  ActionSpace actions = ActionSpace::uniform_grid();
  ObsNormalization normalization;
  PkPdParams pkpd;
  IwpcCoefficients iwpc = IwpcCoefficients::defaults();
  CohortConfig sampling;  // rebalance settings for the per-pass patient draws
  std::vector<int> actor_hidden = {256, 256, 128, 64};
  std::vector<int> critic_hidden = {256, 256, 128, 64};
  LrSchedule actor_lr{1e-4, 0.8, 1000};
  LrSchedule critic_lr{1e-5, 0.8, 1000};
  std::uint64_t seed = 0;
  std::string config_hash;
  // When set, weights and optimizer step counters continue from here.
  const PolicyCheckpoint* resume_from = nullptr;
};

struct TrainResult {
  PolicyCheckpoint best;
  PolicyCheckpoint final_state;
  std::vector<TrainLogRow> log;
  int best_pass = 0;
  bool stopped_early = false;
};

TrainResult train(const TrainSetup& setup,
                  const std::function<void(const TrainLogRow&)>& on_pass = {});

void write_train_log_csv(const std::filesystem::path& path, const std::vector<TrainLogRow>& log);

}  // namespace warfarin
