#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "warfarin/env.hpp"
#include "warfarin/patient.hpp"

namespace warfarin {

struct ClassSummary {
  int count = 0;
  double mean_pttr = 0.0;
  double sd_pttr = 0.0;
};

struct PatientOutcome {
  int patient_id = 0;
  SensitivityClass sensitivity = SensitivityClass::kNormal;
  double pttr = 0.0;
  double mean_daily_dose = 0.0;
  double final_dose = 0.0;
};

struct EvaluationReport {
  std::string policy_name;
  std::string config_hash;
  std::uint64_t eval_seed = 0;
  std::uint64_t cohort_seed = 0;
  int cohort_size = 0;
  ClassSummary overall;
  std::array<ClassSummary, 3> by_class;  // indexed by SensitivityClass
  int possible_actions = 0;
  int used_actions = 0;
  double no_change_fraction = 0.0;
  std::vector<PatientOutcome> per_patient;

  nlohmann::json to_json(bool include_per_patient = true) const;
  static EvaluationReport from_json(const nlohmann::json& j);
};

// Roll `policy` over every patient and aggregate time-in-range by
// sensitivity class. `possible_actions` is policy-dependent (protocol rows,
// or non-eliminated network outputs) and supplied by the caller.
//
// `threads` sizes the worker pool (0 = all hardware threads). Each patient's
// episode draws from a stream derived only from (eval_seed, patient id), and
// results merge in cohort order, so the report is byte-identical for every
// pool size. Workers run on clones of `policy`.
EvaluationReport evaluate_policy(DosingPolicy& policy, const std::vector<Patient>& cohort,
                                 const PkPdParams& params, const RewardConfig& reward,
                                 const TrialConfig& trial, std::uint64_t eval_seed,
                                 const SensitivityMap& classes, int possible_actions,
                                 int threads = 1);

// Long-format daily trajectory CSV (dose, true/measured INR, decision and
// in-range flags) for the first `max_patients` cohort members, re-simulated
// with the same per-patient streams evaluate_policy uses, so plotted
// trajectories are exactly the evaluated ones.
void write_plot_data_csv(const std::filesystem::path& path, DosingPolicy& policy,
                         const std::vector<Patient>& cohort, const PkPdParams& params,
                         const RewardConfig& reward, const TrialConfig& trial,
                         std::uint64_t eval_seed, int max_patients,
                         const std::string& config_hash);

void write_report_json(const std::filesystem::path& path, const EvaluationReport& report,
                       bool include_per_patient = true);
EvaluationReport read_report_json(const std::filesystem::path& path);
void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report);

// Side-by-side PTTR table (rows: sensitivity classes + overall + action
// counts, columns: policies).
std::string comparison_markdown(const std::vector<EvaluationReport>& reports);
std::string comparison_csv(const std::vector<EvaluationReport>& reports);

}  // namespace warfarin
