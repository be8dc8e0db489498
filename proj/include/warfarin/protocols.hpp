#pragma once

#include <filesystem>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "warfarin/patient.hpp"

namespace warfarin {

inline constexpr double kMaxDailyDoseMg = 15.0;

// What a dosing policy sees at a decision point: the measured INR that
// triggered the visit, the previous measured INR, and the dose/duration of
// the interval just completed.
struct Observation {
  double inr_current = 0.0;
  double inr_previous = 0.0;
  double dose_previous_mg = 0.0;
  int duration_previous_days = 0;
};

enum class OneTimeAction { kNone = 0, kSkipDose = 1, kExtraDose = 2 };

const char* to_string(OneTimeAction v);
OneTimeAction one_time_action_from_string(const std::string& s);

// A prescription: a maintenance dose held for `duration_days`, optionally
// preceded by a one-day override (skip or double the first day's dose).
// Policies that choose from a discrete grid also record the grid index and
// the proportional change, so downstream statistics see the chosen action
// rather than re-deriving it from dose ratios.
struct DoseDecision {
  double dose_mg = 0.0;
  int duration_days = 0;
  OneTimeAction one_time = OneTimeAction::kNone;
  int action_index = -1;
  double percent_change = std::numeric_limits<double>::quiet_NaN();
};

// Clip a proportional dose change to the feasible dose range.
double next_dose(double previous_dose_mg, double percent_change);

// One row of a maintenance protocol table: for measured INR in
// (inr_low, inr_high], scale the dose by (1 + percent_change) and optionally
// apply a one-time action on the first day.
struct ProtocolRow {
  double inr_low = 0.0;
  double inr_high = 0.0;
  double percent_change = 0.0;
  OneTimeAction one_time = OneTimeAction::kNone;
};

// An INR-indexed maintenance dosing table. Rows must partition (0, inf):
// the first row starts at 0, each row starts where the previous ended, and
// the last row is open-ended.
class ProtocolTable {
 public:
  static ProtocolTable from_rows(std::vector<ProtocolRow> rows, std::string name);
  static ProtocolTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const ProtocolRow& row_for(double inr) const;
  const std::vector<ProtocolRow>& rows() const { return rows_; }
  const std::string& name() const { return name_; }

 private:
  std::vector<ProtocolRow> rows_;
  std::string name_;
};

// Maintenance decision from a protocol table: look up the row for the
// current INR, scale the previous dose, hold for `duration_days`.
DoseDecision table_decide(const ProtocolTable& table, const Observation& obs, int duration_days);

// Pharmacogenetic initiation dose model (square-root scale, weekly dose);
// covers demographics, CYP2C9/VKORC1 genotype and amiodarone status.
struct IwpcCoefficients {
  double intercept = 5.6044;
  double age_decade = -0.2614;
  double height_cm = 0.0087;
  double weight_kg = 0.0128;
  double vkorc1_ga = -0.8677;
  double vkorc1_aa = -1.6974;
  double cyp2c9_12 = -0.5211;
  double cyp2c9_13 = -0.9357;
  double cyp2c9_22 = -1.0616;
  double cyp2c9_23 = -1.9206;
  double cyp2c9_33 = -2.3312;
  double asian = -0.1092;
  double black = -0.2760;
  double missing_or_mixed_race = -0.1032;
  double enzyme_inducer = 1.1816;
  double amiodarone = -0.5503;

  static IwpcCoefficients defaults() { return {}; }
  static IwpcCoefficients load(const std::filesystem::path& path);
};

// Daily initiation dose in mg (weekly model output / 7, clipped to the
// feasible range).
double iwpc_daily_dose(const Patient& p, const IwpcCoefficients& coef);
DoseDecision iwpc_initial_decision(const Patient& p, const IwpcCoefficients& coef,
                                   int duration_days);

// First-revisit dose revision model (log scale, weekly dose) driven by the
// measured INR after initiation plus genotype, BSA and recent doses.
struct LenziniCoefficients {
  double intercept = 3.10894;
  double age_year = -0.00767;
  double ln_inr = -0.51611;
  double vkorc1_a_allele = -0.23032;
  double cyp2c9_star2_allele = -0.14745;
  double cyp2c9_star3_allele = -0.30770;
  double bsa_m2 = 0.24597;
  double target_inr = 0.26729;
  double black = -0.09644;
  double fluvastatin = -0.10350;
  double amiodarone = -0.19275;
  double dose_minus_2 = 0.01690;
  double dose_minus_3 = 0.02018;
  double dose_minus_4 = 0.01065;

  static LenziniCoefficients defaults() { return {}; }
  static LenziniCoefficients load(const std::filesystem::path& path);
};

// `recent_doses` are the administered daily doses on days visit-2, visit-3,
// visit-4 (most recent first).
double lenzini_daily_dose(const Patient& p, double measured_inr, double target_inr,
                          const std::vector<double>& recent_doses,
                          const LenziniCoefficients& coef);

// Closed-loop dosing policy interface shared by the baseline protocols, the
// learned policy and the distilled table. Policies may be stateful within an
// episode; the runner calls reset() at episode start and observe_history()
// (administered daily doses so far, index day-1) before each decide().
class DosingPolicy {
 public:
  virtual ~DosingPolicy() = default;
  virtual void reset() {}
  virtual void observe_history(const std::vector<double>& daily_doses) { (void)daily_doses; }
  virtual DoseDecision decide(const Observation& obs, const Patient& p, int day) = 0;
  virtual std::string name() const = 0;
  virtual std::unique_ptr<DosingPolicy> clone() const = 0;
};

// Baseline maintenance arm: a protocol-table policy, optionally revising the
// dose with the first-revisit model at the first maintenance decision.
class TableMaintenancePolicy : public DosingPolicy {
 public:
  TableMaintenancePolicy(ProtocolTable table, int duration_days, bool lenzini_first_revision,
                         LenziniCoefficients lenzini = LenziniCoefficients::defaults(),
                         double target_inr = 2.5);
  void reset() override;
  void observe_history(const std::vector<double>& daily_doses) override;
  DoseDecision decide(const Observation& obs, const Patient& p, int day) override;
  std::string name() const override;
  std::unique_ptr<DosingPolicy> clone() const override;

 private:
  ProtocolTable table_;
  int duration_days_;
  bool lenzini_first_revision_;
  bool first_decision_done_ = false;
  LenziniCoefficients lenzini_;
  double target_inr_;
  std::vector<double> daily_doses_;
};

// Holds the previous dose unchanged at every decision.
class FixedMaintenancePolicy : public DosingPolicy {
 public:
  explicit FixedMaintenancePolicy(int duration_days) : duration_days_(duration_days) {}
  DoseDecision decide(const Observation& obs, const Patient& p, int day) override;
  std::string name() const override { return "fixed"; }
  std::unique_ptr<DosingPolicy> clone() const override {
    return std::make_unique<FixedMaintenancePolicy>(*this);
  }

 private:
  int duration_days_;
};

}  // namespace warfarin
