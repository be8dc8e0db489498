#pragma once

#include <vector>

#include "warfarin/pkpd.hpp"
#include "warfarin/protocols.hpp"

namespace warfarin {

// Discounted quadratic penalty on the distance of each day's INR from the
// middle of the therapeutic range. eta slightly above 1 weights late days in
// the interval more, punishing trajectories that drift as the visit nears.
struct RewardConfig {
  double target_inr = 2.5;
  double scale = 4.0;
  double eta = 1.1;
  double clip_min = -30.0;
};

// r = -scale * sum_{t=1..T} eta^t (inr_t - target)^2, clipped below.
double interval_reward(const std::vector<double>& true_inr, const RewardConfig& cfg);

// The discrete action grid: proportional dose changes applied to the
// previous maintenance dose, held for duration_days.
struct ActionSpace {
  std::vector<double> percent_changes;
  int duration_days = 7;

  static ActionSpace uniform_grid(double min_percent = -1.0, double max_percent = 1.0,
                                  double step = 0.1, int duration_days = 7);
  int size() const { return static_cast<int>(percent_changes.size()); }
  int zero_change_index() const;
};

struct TrialConfig {
  int horizon_days = 90;
  int initiation_days = 4;     // pharmacogenetic initiation dose, days 1..4
  int decision_interval = 7;   // maintenance decisions every 7 days from day 5
  double pttr_low = 2.0;
  double pttr_high = 3.0;
};

struct DecisionRecord {
  int day = 0;  // calendar day the decision was made (first maintenance day it covers)
  Observation obs;
  int action_index = -1;  // -1 when the dose came from a protocol, not the grid
  double percent_change = 0.0;
  double dose_mg = 0.0;
  int duration_days = 0;
  OneTimeAction one_time = OneTimeAction::kNone;
  double reward = 0.0;
};

struct Trajectory {
  int patient_id = 0;
  std::vector<DecisionRecord> decisions;
  std::vector<double> daily_true_inr;      // index day-1, days 1..horizon
  std::vector<double> daily_measured_inr;  // same indexing
  std::vector<double> daily_dose;          // administered dose, same indexing
  double baseline_measured_inr = 0.0;
  double pttr = 0.0;
};

// Fraction of days 1..horizon with true INR inside [low, high].
double time_in_range(const std::vector<double>& daily_true_inr, double low, double high);

// One patient's 90-day dosing episode. reset() runs the initiation phase
// (pharmacogenetic dose, days 1..initiation_days) and returns the first
// maintenance observation; step() applies one maintenance decision and
// advances to the next visit (or the horizon).
class DosingEnv {
 public:
  DosingEnv(const Patient& patient, const PkPdParams& params, const RewardConfig& reward,
            const ActionSpace& actions, const TrialConfig& trial, RandomStream measurement,
            const IwpcCoefficients& iwpc = IwpcCoefficients::defaults());

  struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
  };

  const Observation& reset();
  // Apply a grid action: dose = clip(prev * (1 + percent[action])).
  StepResult step(int action_index);
  // Apply an explicit prescription (protocol arms).
  StepResult step_decision(const DoseDecision& decision);

  bool done() const { return done_; }
  int current_day() const { return day_; }
  const Observation& observation() const { return obs_; }
  const Trajectory& trajectory() const { return trajectory_; }
  const Patient& patient() const { return patient_; }
  const ActionSpace& actions() const { return actions_; }
  // Decisions remaining if every interval runs the full decision_interval
  // (the final interval is truncated by the horizon).
  int max_decisions() const;

 private:
  StepResult apply(double dose_mg, int requested_duration, OneTimeAction one_time,
                   int action_index, double percent_change);

  Patient patient_;
  const PkPdParams* params_;
  RewardConfig reward_;
  ActionSpace actions_;
  TrialConfig trial_;
  RandomStream measurement_;
  IwpcCoefficients iwpc_;
  PkPdState state_;
  Observation obs_;
  Trajectory trajectory_;
  int day_ = 1;
  bool done_ = true;
  bool reset_done_ = false;
};

// Roll one episode under a closed-loop policy. The policy is reset first.
Trajectory run_episode(DosingEnv& env, DosingPolicy& policy);

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& t);

}  // namespace warfarin
