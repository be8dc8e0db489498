#include "warfarin/patient.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace warfarin {

namespace {

// Cohort covariate model: AF registry demographics. Means/sds for the
// continuous covariates, marginal frequencies for the categorical ones.
constexpr double kAgeMean = 67.3, kAgeSd = 14.43, kAgeMin = 18.0, kAgeMax = 100.0;
constexpr double kWeightMean = 199.24, kWeightSd = 54.71, kWeightMin = 70.0, kWeightMax = 500.0;
constexpr double kHeightMean = 66.78, kHeightSd = 4.31, kHeightMin = 45.0, kHeightMax = 85.0;
constexpr double kFemaleProb = 0.5314;
constexpr double kTobaccoProb = 0.0966;
constexpr double kAmiodaroneProb = 0.1154;
constexpr double kFluvastatinProb = 0.0003;
constexpr std::array<double, kRaceCount> kRaceRaw = {0.9518, 0.0425, 0.0039, 0.0018, 0.000001};
constexpr std::array<double, kVkorc1Count> kVkorc1Probs = {0.3837, 0.4418, 0.1745};
constexpr std::array<double, kCyp2c9Count> kCyp2c9Natural = {0.6739, 0.1486, 0.0925,
                                                             0.0651, 0.0197, 0.0002};

double clipped_normal(RandomStream& rng, double mean, double sd, double lo, double hi) {
  return std::clamp(rng.normal(mean, sd), lo, hi);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

const char* to_string(Sex v) { return v == Sex::kFemale ? "female" : "male"; }

const char* to_string(Race v) {
  switch (v) {
    case Race::kWhite: return "white";
    case Race::kBlack: return "black";
    case Race::kAsian: return "asian";
    case Race::kAmericanIndianAlaskan: return "american_indian_alaskan";
    case Race::kPacificIslander: return "pacific_islander";
  }
  return "white";
}

const char* to_string(Cyp2c9 v) {
  switch (v) {
    case Cyp2c9::k1_1: return "*1/*1";
    case Cyp2c9::k1_2: return "*1/*2";
    case Cyp2c9::k1_3: return "*1/*3";
    case Cyp2c9::k2_2: return "*2/*2";
    case Cyp2c9::k2_3: return "*2/*3";
    case Cyp2c9::k3_3: return "*3/*3";
  }
  return "*1/*1";
}

const char* to_string(Vkorc1 v) {
  switch (v) {
    case Vkorc1::kGG: return "G/G";
    case Vkorc1::kGA: return "G/A";
    case Vkorc1::kAA: return "A/A";
  }
  return "G/G";
}

const char* to_string(SensitivityClass v) {
  switch (v) {
    case SensitivityClass::kNormal: return "normal";
    case SensitivityClass::kSensitive: return "sensitive";
    case SensitivityClass::kHighlySensitive: return "highly_sensitive";
  }
  return "normal";
}

Sex sex_from_string(const std::string& s) {
  if (s == "female") return Sex::kFemale;
  if (s == "male") return Sex::kMale;
  throw DomainError("unknown sex: " + s);
}

Race race_from_string(const std::string& s) {
  for (int i = 0; i < kRaceCount; ++i)
    if (s == to_string(static_cast<Race>(i))) return static_cast<Race>(i);
  throw DomainError("unknown race: " + s);
}

Cyp2c9 cyp2c9_from_string(const std::string& s) {
  for (int i = 0; i < kCyp2c9Count; ++i)
    if (s == to_string(static_cast<Cyp2c9>(i))) return static_cast<Cyp2c9>(i);
  throw DomainError("unknown CYP2C9 genotype: " + s);
}

Vkorc1 vkorc1_from_string(const std::string& s) {
  for (int i = 0; i < kVkorc1Count; ++i)
    if (s == to_string(static_cast<Vkorc1>(i))) return static_cast<Vkorc1>(i);
  throw DomainError("unknown VKORC1 genotype: " + s);
}

SensitivityClass sensitivity_from_string(const std::string& s) {
  for (int i = 0; i < 3; ++i)
    if (s == to_string(static_cast<SensitivityClass>(i))) return static_cast<SensitivityClass>(i);
  throw DomainError("unknown sensitivity class: " + s);
}

double Patient::bsa_m2() const {
  return 0.007184 * std::pow(weight_kg(), 0.425) * std::pow(height_cm(), 0.725);
}

int Patient::vkorc1_a_alleles() const { return static_cast<int>(vkorc1); }

int Patient::cyp2c9_star2_alleles() const {
  switch (cyp2c9) {
    case Cyp2c9::k1_2: return 1;
    case Cyp2c9::k2_2: return 2;
    case Cyp2c9::k2_3: return 1;
    default: return 0;
  }
}

int Patient::cyp2c9_star3_alleles() const {
  switch (cyp2c9) {
    case Cyp2c9::k1_3: return 1;
    case Cyp2c9::k2_3: return 1;
    case Cyp2c9::k3_3: return 2;
    default: return 0;
  }
}

std::array<double, kCyp2c9Count> cyp2c9_distribution(bool rebalanced, double min_variant_prob) {
  if (!rebalanced) return kCyp2c9Natural;
  std::array<double, kCyp2c9Count> p = kCyp2c9Natural;
  double variant_sum = 0.0;
  for (int i = 1; i < kCyp2c9Count; ++i) {
    p[i] = std::max(p[i], min_variant_prob);
    variant_sum += p[i];
  }
  if (variant_sum >= 1.0)
    throw DomainError("cyp2c9_distribution: rebalanced variant mass exceeds 1");
  p[0] = 1.0 - variant_sum;
  return p;
}

std::array<double, kVkorc1Count> vkorc1_distribution() { return kVkorc1Probs; }

std::array<double, kRaceCount> race_distribution() {
  std::array<double, kRaceCount> p = kRaceRaw;
  double s = 0.0;
  for (double v : p) s += v;
  for (double& v : p) v /= s;
  return p;
}

Patient sample_patient(RandomStream& covariates, RandomStream& physiology, int id,
                       const CohortConfig& cfg, const PhysiologyPriors& priors) {
  Patient p;
  p.id = id;
  p.age_years = clipped_normal(covariates, kAgeMean, kAgeSd, kAgeMin, kAgeMax);
  p.weight_lb = clipped_normal(covariates, kWeightMean, kWeightSd, kWeightMin, kWeightMax);
  p.height_in = clipped_normal(covariates, kHeightMean, kHeightSd, kHeightMin, kHeightMax);
  p.sex = covariates.bernoulli(kFemaleProb) ? Sex::kFemale : Sex::kMale;
  auto race_p = race_distribution();
  p.race = static_cast<Race>(covariates.categorical(race_p));
  p.tobacco = covariates.bernoulli(kTobaccoProb);
  p.amiodarone = covariates.bernoulli(kAmiodaroneProb);
  p.fluvastatin = covariates.bernoulli(kFluvastatinProb);
  auto cyp_p = cyp2c9_distribution(cfg.rebalance_cyp2c9, cfg.min_variant_prob);
  p.cyp2c9 = static_cast<Cyp2c9>(covariates.categorical(cyp_p));
  p.vkorc1 = static_cast<Vkorc1>(covariates.categorical(kVkorc1Probs));

  // exp(N(0, sigma)) multipliers: median 1, right-skewed like the underlying
  // PK parameters.
  p.physiology.clearance_multiplier = physiology.lognormal(0.0, priors.clearance_sd);
  p.physiology.volume_multiplier = physiology.lognormal(0.0, priors.volume_sd);
  p.physiology.ec50_multiplier = physiology.lognormal(0.0, priors.ec50_sd);
  p.physiology.baseline_inr =
      std::clamp(physiology.normal(priors.baseline_inr_mean, priors.baseline_inr_sd),
                 priors.baseline_inr_min, priors.baseline_inr_max);
  return p;
}

std::vector<Patient> generate_cohort(const CohortConfig& cfg, const PhysiologyPriors& priors) {
  if (cfg.size <= 0) throw DomainError("generate_cohort: cohort size must be positive");
  RandomStream master(cfg.seed);
  std::vector<Patient> cohort;
  cohort.reserve(cfg.size);
  for (int i = 0; i < cfg.size; ++i) {
    RandomStream cov = master.child("cohort", static_cast<std::uint64_t>(i));
    RandomStream phys = master.child("physiology", static_cast<std::uint64_t>(i));
    cohort.push_back(sample_patient(cov, phys, i, cfg, priors));
  }
  return cohort;
}

SensitivityMap SensitivityMap::defaults() {
  SensitivityMap m;
  auto set = [&m](Cyp2c9 c, Vkorc1 v, SensitivityClass s) {
    m.table_[static_cast<int>(c) * kVkorc1Count + static_cast<int>(v)] = s;
  };
  for (int ci = 0; ci < kCyp2c9Count; ++ci)
    for (int vi = 0; vi < kVkorc1Count; ++vi)
      set(static_cast<Cyp2c9>(ci), static_cast<Vkorc1>(vi), SensitivityClass::kSensitive);
  // Normal responders: fully functional or near-functional CYP2C9 with the
  // low-sensitivity VKORC1 G/G promoter.
  set(Cyp2c9::k1_1, Vkorc1::kGG, SensitivityClass::kNormal);
  set(Cyp2c9::k1_2, Vkorc1::kGG, SensitivityClass::kNormal);
  // Highly sensitive: homozygous *3, or VKORC1 A/A combined with a
  // poor-metabolizer CYP2C9 genotype.
  for (int vi = 0; vi < kVkorc1Count; ++vi)
    set(Cyp2c9::k3_3, static_cast<Vkorc1>(vi), SensitivityClass::kHighlySensitive);
  set(Cyp2c9::k1_3, Vkorc1::kAA, SensitivityClass::kHighlySensitive);
  set(Cyp2c9::k2_2, Vkorc1::kAA, SensitivityClass::kHighlySensitive);
  set(Cyp2c9::k2_3, Vkorc1::kAA, SensitivityClass::kHighlySensitive);
  return m;
}

SensitivityClass SensitivityMap::classify(Cyp2c9 cyp, Vkorc1 vk) const {
  return table_[static_cast<int>(cyp) * kVkorc1Count + static_cast<int>(vk)];
}

SensitivityMap SensitivityMap::load(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot open sensitivity map: " + csv_path.string());
  SensitivityMap m;
  std::array<bool, kCyp2c9Count * kVkorc1Count> seen{};
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cyp_s, vk_s, cls_s;
    if (!std::getline(ss, cyp_s, ',') || !std::getline(ss, vk_s, ',') || !std::getline(ss, cls_s))
      throw ConfigError("malformed sensitivity map row: " + line);
    if (trim(cyp_s) == "cyp2c9") continue;  // header
    Cyp2c9 c = cyp2c9_from_string(trim(cyp_s));
    Vkorc1 v = vkorc1_from_string(trim(vk_s));
    int idx = static_cast<int>(c) * kVkorc1Count + static_cast<int>(v);
    m.table_[idx] = sensitivity_from_string(trim(cls_s));
    seen[idx] = true;
  }
  for (bool s : seen)
    if (!s) throw ConfigError("sensitivity map does not cover all 18 genotype pairs");
  return m;
}

void SensitivityMap::save(const std::filesystem::path& csv_path) const {
  std::ofstream out(csv_path);
  if (!out) throw DomainError("cannot write sensitivity map: " + csv_path.string());
  out << "cyp2c9,vkorc1,class\n";
  for (int ci = 0; ci < kCyp2c9Count; ++ci)
    for (int vi = 0; vi < kVkorc1Count; ++vi)
      out << to_string(static_cast<Cyp2c9>(ci)) << ',' << to_string(static_cast<Vkorc1>(vi)) << ','
          << to_string(table_[ci * kVkorc1Count + vi]) << '\n';
}

SensitivityClass classify_sensitivity(const Patient& p) {
  static const SensitivityMap kDefault = SensitivityMap::defaults();
  return kDefault.classify(p.cyp2c9, p.vkorc1);
}

void write_cohort_csv(const std::filesystem::path& path, const std::vector<Patient>& cohort,
                      const CohortConfig& cfg, const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write cohort csv: " + path.string());
  char buf[64];
  out << "# virtual patient cohort\n";
  out << "# seed = " << cfg.seed << "\n";
  out << "# size = " << cohort.size() << "\n";
  out << "# rebalance_cyp2c9 = " << (cfg.rebalance_cyp2c9 ? 1 : 0) << "\n";
  out << "# config_hash = " << config_hash << "\n";
  out << "id,age_years,weight_lb,height_in,sex,race,tobacco,amiodarone,fluvastatin,"
         "cyp2c9,vkorc1,clearance_multiplier,volume_multiplier,ec50_multiplier,baseline_inr\n";
  auto d = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const Patient& p : cohort) {
    out << p.id << ',' << d(p.age_years) << ',' << d(p.weight_lb) << ',' << d(p.height_in) << ','
        << to_string(p.sex) << ',' << to_string(p.race) << ',' << (p.tobacco ? 1 : 0) << ','
        << (p.amiodarone ? 1 : 0) << ',' << (p.fluvastatin ? 1 : 0) << ',' << to_string(p.cyp2c9)
        << ',' << to_string(p.vkorc1) << ',' << d(p.physiology.clearance_multiplier) << ','
        << d(p.physiology.volume_multiplier) << ',' << d(p.physiology.ec50_multiplier) << ','
        << d(p.physiology.baseline_inr) << '\n';
  }
}

std::vector<Patient> read_cohort_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open cohort csv: " + path.string());
  std::vector<Patient> cohort;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("id,", 0) != 0) throw DomainError("cohort csv missing header: " + path.string());
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string f;
    std::vector<std::string> fields;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    if (fields.size() != 15) throw DomainError("malformed cohort row: " + line);
    Patient p;
    p.id = std::stoi(fields[0]);
    p.age_years = std::stod(fields[1]);
    p.weight_lb = std::stod(fields[2]);
    p.height_in = std::stod(fields[3]);
    p.sex = sex_from_string(fields[4]);
    p.race = race_from_string(fields[5]);
    p.tobacco = fields[6] == "1";
    p.amiodarone = fields[7] == "1";
    p.fluvastatin = fields[8] == "1";
    p.cyp2c9 = cyp2c9_from_string(fields[9]);
    p.vkorc1 = vkorc1_from_string(fields[10]);
    p.physiology.clearance_multiplier = std::stod(fields[11]);
    p.physiology.volume_multiplier = std::stod(fields[12]);
    p.physiology.ec50_multiplier = std::stod(fields[13]);
    p.physiology.baseline_inr = std::stod(fields[14]);
    cohort.push_back(p);
  }
  if (cohort.empty()) throw DomainError("empty cohort csv: " + path.string());
  return cohort;
}

}  // namespace warfarin
