#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "warfarin/random.hpp"

namespace warfarin {

enum class Sex { kFemale = 0, kMale = 1 };
enum class Race { kWhite = 0, kBlack = 1, kAsian = 2, kAmericanIndianAlaskan = 3, kPacificIslander = 4 };
enum class Cyp2c9 { k1_1 = 0, k1_2 = 1, k1_3 = 2, k2_2 = 3, k2_3 = 4, k3_3 = 5 };
enum class Vkorc1 { kGG = 0, kGA = 1, kAA = 2 };
enum class SensitivityClass { kNormal = 0, kSensitive = 1, kHighlySensitive = 2 };

inline constexpr int kCyp2c9Count = 6;
inline constexpr int kVkorc1Count = 3;
inline constexpr int kRaceCount = 5;

const char* to_string(Sex v);
const char* to_string(Race v);
const char* to_string(Cyp2c9 v);
const char* to_string(Vkorc1 v);
const char* to_string(SensitivityClass v);
Sex sex_from_string(const std::string& s);
Race race_from_string(const std::string& s);
Cyp2c9 cyp2c9_from_string(const std::string& s);
Vkorc1 vkorc1_from_string(const std::string& s);
SensitivityClass sensitivity_from_string(const std::string& s);

// Latent physiology sampled once per patient. Multipliers scale the
// population PK/PD parameters; the dose response priors live with the
// simulator parameters but the draw happens at patient creation so a stored
// cohort fully determines its trajectories.
struct PhysiologyEffects {
  double clearance_multiplier = 1.0;
  double volume_multiplier = 1.0;
  double ec50_multiplier = 1.0;
  double baseline_inr = 1.0;
};

// Lognormal sigmas for the inter-individual multipliers plus the baseline
// INR distribution.
struct PhysiologyPriors {
  double clearance_sd = 0.45;
  double volume_sd = 0.20;
  double ec50_sd = 0.45;
  double baseline_inr_mean = 1.0;
  double baseline_inr_sd = 0.03;
  double baseline_inr_min = 0.9;
  double baseline_inr_max = 1.1;
};

struct Patient {
  int id = 0;
  double age_years = 0.0;
  double weight_lb = 0.0;
  double height_in = 0.0;
  Sex sex = Sex::kFemale;
  Race race = Race::kWhite;
  bool tobacco = false;
  bool amiodarone = false;
  bool fluvastatin = false;
  Cyp2c9 cyp2c9 = Cyp2c9::k1_1;
  Vkorc1 vkorc1 = Vkorc1::kGG;
  PhysiologyEffects physiology;

  double weight_kg() const { return weight_lb * 0.45359237; }
  double height_cm() const { return height_in * 2.54; }
  // Du Bois body surface area in m^2.
  double bsa_m2() const;
  int vkorc1_a_alleles() const;
  int cyp2c9_star2_alleles() const;
  int cyp2c9_star3_alleles() const;
};

struct CohortConfig {
  int size = 2000;
  std::uint64_t seed = 0;
  // When set, every CYP2C9 variant genotype is sampled with probability at
  // least min_variant_prob and *1/*1 absorbs the deficit. Used for training
  // cohorts so rare poor metabolizers appear often enough to learn from.
  bool rebalance_cyp2c9 = false;
  double min_variant_prob = 0.1;
};

// Natural (registry) CYP2C9 genotype frequencies, or the rebalanced version.
std::array<double, kCyp2c9Count> cyp2c9_distribution(bool rebalanced, double min_variant_prob = 0.1);
std::array<double, kVkorc1Count> vkorc1_distribution();
std::array<double, kRaceCount> race_distribution();

Patient sample_patient(RandomStream& covariates, RandomStream& physiology, int id,
                       const CohortConfig& cfg, const PhysiologyPriors& priors);
std::vector<Patient> generate_cohort(const CohortConfig& cfg, const PhysiologyPriors& priors);

// Genotype -> sensitivity class mapping, loadable from a csv so the grouping
// used in reports can be swapped without a rebuild.
class SensitivityMap {
 public:
  static SensitivityMap defaults();
  static SensitivityMap load(const std::filesystem::path& csv_path);
  SensitivityClass classify(Cyp2c9 cyp, Vkorc1 vk) const;
  void save(const std::filesystem::path& csv_path) const;

 private:
  std::array<SensitivityClass, kCyp2c9Count * kVkorc1Count> table_{};
};

SensitivityClass classify_sensitivity(const Patient& p);

void write_cohort_csv(const std::filesystem::path& path, const std::vector<Patient>& cohort,
                      const CohortConfig& cfg, const std::string& config_hash);
std::vector<Patient> read_cohort_csv(const std::filesystem::path& path);

}  // namespace warfarin
