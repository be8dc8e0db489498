#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "warfarin/config.hpp"
#include "warfarin/distill.hpp"
#include "warfarin/evaluate.hpp"
#include "warfarin/ppo.hpp"

namespace warfarin::experiment {

// Typed views over the configuration file. Missing keys fall back to the
// documented defaults; malformed values raise ConfigError.
PkPdParams pkpd_params(const Config& cfg);
ActionSpace action_space(const Config& cfg);
RewardConfig reward_config(const Config& cfg);
TrialConfig trial_config(const Config& cfg);
PpoConfig ppo_config(const Config& cfg);
ForgingConfig forging_config(const Config& cfg);
ObsNormalization normalization(const Config& cfg);
SensitivityMap sensitivity_map(const Config& cfg);
IwpcCoefficients iwpc_coefficients(const Config& cfg);
LenziniCoefficients lenzini_coefficients(const Config& cfg);
CohortConfig eval_cohort_config(const Config& cfg);
TrainSetup train_setup(const Config& cfg);

std::vector<Patient> make_eval_cohort(const Config& cfg);

// Policy specs accepted on the command line and in comparisons:
//   aurora | intermountain | fixed | checkpoint:<path> | table:<path>
// Protocol arms take the first-revisit dose revision; plain tables and the
// learned policy do not.
struct PolicyHandle {
  std::unique_ptr<DosingPolicy> policy;
  int possible_actions = 0;
  std::string label;
};
PolicyHandle make_policy(const Config& cfg, const std::string& spec);

struct GenerateOutcome {
  std::filesystem::path cohort_csv;
  int size = 0;
};
GenerateOutcome run_generate(const Config& cfg, const std::filesystem::path& out_csv);

struct TrainOutcome {
  std::filesystem::path best_checkpoint;
  std::filesystem::path final_checkpoint;
  std::filesystem::path log_csv;
  TrainResult result;
};
TrainOutcome run_train(const Config& cfg, const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume = {},
                       const std::function<void(const TrainLogRow&)>& on_pass = {});

struct EvaluateOptions {
  std::optional<std::filesystem::path> plot_data;  // daily-trajectory csv
  int plot_patients = 20;
  int threads = 1;  // worker pool; 0 = all hardware threads
};
EvaluationReport run_evaluate(const Config& cfg, const std::string& policy_spec,
                              const EvaluateOptions& opts = {});

struct DistillOutcome {
  std::filesystem::path table_path;
  std::filesystem::path card_path;
  ProtocolTable table;
  DistillReport report;
};
DistillOutcome run_distill(const Config& cfg, const std::filesystem::path& checkpoint_path,
                           const std::filesystem::path& out_dir);

struct CompareOutcome {
  std::vector<EvaluationReport> reports;
  std::string markdown;
  std::string csv;
};
// Columns come from previously written report files (in order) followed by
// freshly evaluated policy specs. All arms must describe the same evaluation
// cohort (seed and size); mismatches raise DomainError unless `force`.
CompareOutcome run_compare(const Config& cfg, const std::vector<std::string>& policy_specs,
                           const std::vector<std::filesystem::path>& report_files = {},
                           bool force = false, int threads = 1);

}  // namespace warfarin::experiment
