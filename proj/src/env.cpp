#include "warfarin/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace warfarin {

double interval_reward(const std::vector<double>& true_inr, const RewardConfig& cfg) {
  if (true_inr.empty()) throw DomainError("interval_reward: empty INR series");
  double penalty = 0.0;
  double eta_pow = 1.0;
  for (double inr : true_inr) {
    eta_pow *= cfg.eta;
    double err = inr - cfg.target_inr;
    penalty += eta_pow * err * err;
  }
  double r = -cfg.scale * penalty;
  return std::max(r, cfg.clip_min);
}

ActionSpace ActionSpace::uniform_grid(double min_percent, double max_percent, double step,
                                      int duration_days) {
  if (!(step > 0)) throw ConfigError("action grid: step must be positive");
  if (!(max_percent >= min_percent)) throw ConfigError("action grid: empty range");
  ActionSpace a;
  a.duration_days = duration_days;
  int n = static_cast<int>(std::round((max_percent - min_percent) / step));
  // Build on an integer lattice so the zero-change action is exactly 0.0.
  for (int i = 0; i <= n; ++i) {
    double v = min_percent + i * step;
    if (std::abs(v) < 1e-12) v = 0.0;
    a.percent_changes.push_back(v);
  }
  return a;
}

int ActionSpace::zero_change_index() const {
  for (int i = 0; i < size(); ++i)
    if (percent_changes[i] == 0.0) return i;
  return -1;
}

double time_in_range(const std::vector<double>& daily_true_inr, double low, double high) {
  if (daily_true_inr.empty()) return 0.0;
  int in = 0;
  for (double v : daily_true_inr)
    if (v >= low && v <= high) ++in;
  return static_cast<double>(in) / static_cast<double>(daily_true_inr.size());
}

DosingEnv::DosingEnv(const Patient& patient, const PkPdParams& params, const RewardConfig& reward,
                     const ActionSpace& actions, const TrialConfig& trial,
                     RandomStream measurement, const IwpcCoefficients& iwpc)
    : patient_(patient),
      params_(&params),
      reward_(reward),
      actions_(actions),
      trial_(trial),
      measurement_(measurement),
      iwpc_(iwpc) {
  if (trial_.horizon_days <= trial_.initiation_days)
    throw ConfigError("trial: horizon must exceed the initiation phase");
  if (trial_.decision_interval < 1) throw ConfigError("trial: decision interval must be >= 1");
}

int DosingEnv::max_decisions() const {
  int n = 0;
  for (int d = trial_.initiation_days + 1; d <= trial_.horizon_days; d += trial_.decision_interval)
    ++n;
  return n;
}

const Observation& DosingEnv::reset() {
  state_ = init_state(patient_, *params_);
  trajectory_ = Trajectory{};
  trajectory_.patient_id = patient_.id;
  trajectory_.daily_true_inr.reserve(trial_.horizon_days);
  trajectory_.daily_measured_inr.reserve(trial_.horizon_days);
  trajectory_.daily_dose.reserve(trial_.horizon_days);
  day_ = 1;
  done_ = false;
  reset_done_ = true;

  double baseline_true = inr_now(state_, patient_, *params_);
  double baseline_measured = baseline_true;
  if (params_->measurement_noise_sd > 0)
    baseline_measured = baseline_true * measurement_.lognormal(0.0, params_->measurement_noise_sd);
  trajectory_.baseline_measured_inr = baseline_measured;

  DoseDecision initial = iwpc_initial_decision(patient_, iwpc_, trial_.initiation_days);
  InrSeries series = advance(state_, patient_, *params_, initial.dose_mg,
                             trial_.initiation_days, measurement_);
  for (int t = 0; t < trial_.initiation_days; ++t) {
    trajectory_.daily_dose.push_back(initial.dose_mg);
    trajectory_.daily_true_inr.push_back(series.true_inr[t]);
    trajectory_.daily_measured_inr.push_back(series.measured_inr[t]);
  }
  day_ = trial_.initiation_days + 1;
  obs_ = Observation{series.measured_inr.back(), baseline_measured, initial.dose_mg,
                     trial_.initiation_days};
  return obs_;
}

DosingEnv::StepResult DosingEnv::step(int action_index) {
  if (action_index < 0 || action_index >= actions_.size())
    throw DomainError("step: action index out of range");
  double percent = actions_.percent_changes[action_index];
  double dose = next_dose(obs_.dose_previous_mg, percent);
  return apply(dose, actions_.duration_days, OneTimeAction::kNone, action_index, percent);
}

DosingEnv::StepResult DosingEnv::step_decision(const DoseDecision& decision) {
  if (!std::isfinite(decision.dose_mg) || decision.dose_mg < 0)
    throw DomainError("step_decision: dose must be finite and non-negative");
  if (decision.duration_days < 1) throw DomainError("step_decision: duration must be >= 1");
  double dose = std::min(decision.dose_mg, kMaxDailyDoseMg);
  double percent = decision.percent_change;
  if (std::isnan(percent))
    percent =
        obs_.dose_previous_mg > 0 ? dose / obs_.dose_previous_mg - 1.0 : (dose > 0 ? 1.0 : 0.0);
  return apply(dose, decision.duration_days, decision.one_time, decision.action_index, percent);
}

DosingEnv::StepResult DosingEnv::apply(double dose_mg, int requested_duration,
                                       OneTimeAction one_time, int action_index,
                                       double percent_change) {
  if (!reset_done_) throw DomainError("env: reset() must be called before step()");
  if (done_) throw DomainError("env: episode already finished");
  int duration = std::min(requested_duration, trial_.horizon_days - day_ + 1);
  std::vector<double> day_doses(duration, dose_mg);
  if (one_time == OneTimeAction::kSkipDose) day_doses[0] = 0.0;
  if (one_time == OneTimeAction::kExtraDose)
    day_doses[0] = std::min(2.0 * dose_mg, kMaxDailyDoseMg);

  InrSeries series =
      advance(state_, patient_, *params_, dose_mg, duration, measurement_, &day_doses);
  for (int t = 0; t < duration; ++t) {
    trajectory_.daily_dose.push_back(day_doses[t]);
    trajectory_.daily_true_inr.push_back(series.true_inr[t]);
    trajectory_.daily_measured_inr.push_back(series.measured_inr[t]);
  }
  double r = interval_reward(series.true_inr, reward_);

  DecisionRecord rec;
  rec.day = day_;
  rec.obs = obs_;
  rec.action_index = action_index;
  rec.percent_change = percent_change;
  rec.dose_mg = dose_mg;
  rec.duration_days = duration;
  rec.one_time = one_time;
  rec.reward = r;
  trajectory_.decisions.push_back(rec);

  obs_ = Observation{series.measured_inr.back(), obs_.inr_current, dose_mg, duration};
  day_ += duration;
  done_ = day_ > trial_.horizon_days;
  if (done_)
    trajectory_.pttr = time_in_range(trajectory_.daily_true_inr, trial_.pttr_low, trial_.pttr_high);
  return StepResult{obs_, r, done_};
}

Trajectory run_episode(DosingEnv& env, DosingPolicy& policy) {
  policy.reset();
  Observation obs = env.reset();
  while (!env.done()) {
    policy.observe_history(env.trajectory().daily_dose);
    DoseDecision decision = policy.decide(obs, env.patient(), env.current_day());
    auto result = env.step_decision(decision);
    obs = result.obs;
  }
  return env.trajectory();
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& t) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write trajectory csv: " + path.string());
  char buf[64];
  auto d = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  out << "# patient_id = " << t.patient_id << "\n";
  out << "# baseline_measured_inr = " << d(t.baseline_measured_inr) << "\n";
  out << "# pttr = " << d(t.pttr) << "\n";
  out << "day,dose_mg,true_inr,measured_inr,decision,action_index,percent_change,duration_days,"
         "one_time,reward\n";
  std::size_t next_decision = 0;
  for (std::size_t i = 0; i < t.daily_true_inr.size(); ++i) {
    int day = static_cast<int>(i) + 1;
    out << day << ',' << d(t.daily_dose[i]) << ',' << d(t.daily_true_inr[i]) << ','
        << d(t.daily_measured_inr[i]);
    if (next_decision < t.decisions.size() && t.decisions[next_decision].day == day) {
      const DecisionRecord& rec = t.decisions[next_decision];
      out << ",1," << rec.action_index << ',' << d(rec.percent_change) << ',' << rec.duration_days
          << ',' << to_string(rec.one_time) << ',' << d(rec.reward);
      ++next_decision;
    } else {
      out << ",0,,,,,";
    }
    out << '\n';
  }
}

}  // namespace warfarin
