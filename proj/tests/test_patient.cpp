#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "warfarin/common.hpp"
#include "warfarin/patient.hpp"

using namespace warfarin;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  fs::path p = fs::temp_directory_path() / "warfarin-test-patient";
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("natural CYP2C9 frequencies match the registry table") {
  auto p = cyp2c9_distribution(false);
  CHECK(p[0] == doctest::Approx(0.6739).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.1486).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(0.0925).epsilon(1e-12));
  CHECK(p[3] == doctest::Approx(0.0651).epsilon(1e-12));
  CHECK(p[4] == doctest::Approx(0.0197).epsilon(1e-12));
  CHECK(p[5] == doctest::Approx(0.0002).epsilon(1e-12));
  double sum = 0.0;
  for (double v : p) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rebalanced CYP2C9 floors each variant and shrinks *1/*1") {
  auto p = cyp2c9_distribution(true, 0.1);
  // Variants below 0.1 are lifted to 0.1; *1/*2 (0.1486) stays; the wild
  // type absorbs the remainder: 1 - (0.1486 + 4 * 0.1) = 0.4514.
  CHECK(p[0] == doctest::Approx(0.4514).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.1486).epsilon(1e-12));
  for (int i = 2; i < kCyp2c9Count; ++i) CHECK(p[i] == doctest::Approx(0.1).epsilon(1e-12));
  // A floor that pushes variant mass to one leaves nothing for *1/*1.
  CHECK_THROWS_AS(cyp2c9_distribution(true, 0.2), DomainError);
}

TEST_CASE("VKORC1 and race distributions") {
  auto v = vkorc1_distribution();
  CHECK(v[0] == doctest::Approx(0.3837).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.4418).epsilon(1e-12));
  CHECK(v[2] == doctest::Approx(0.1745).epsilon(1e-12));

  auto r = race_distribution();
  double sum = 0.0;
  for (double x : r) sum += x;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r[0] > 0.9);  // predominantly white registry population
}

TEST_CASE("cohort demographics track the population parameters") {
  CohortConfig cfg;
  cfg.size = 50000;
  cfg.seed = 17;
  auto cohort = generate_cohort(cfg, PhysiologyPriors{});
  REQUIRE(static_cast<int>(cohort.size()) == cfg.size);

  double age = 0.0, weight = 0.0, female = 0.0, tobacco = 0.0, amio = 0.0;
  double log_cl = 0.0, log_cl_sq = 0.0;
  int wild = 0;
  for (const Patient& p : cohort) {
    REQUIRE(p.age_years >= 18.0);
    REQUIRE(p.age_years <= 100.0);
    REQUIRE(p.weight_lb >= 70.0);
    REQUIRE(p.weight_lb <= 500.0);
    REQUIRE(p.height_in >= 45.0);
    REQUIRE(p.height_in <= 85.0);
    REQUIRE(p.physiology.baseline_inr >= 0.9);
    REQUIRE(p.physiology.baseline_inr <= 1.1);
    REQUIRE(p.physiology.clearance_multiplier > 0.0);
    REQUIRE(p.physiology.volume_multiplier > 0.0);
    REQUIRE(p.physiology.ec50_multiplier > 0.0);
    age += p.age_years;
    weight += p.weight_lb;
    female += p.sex == Sex::kFemale ? 1.0 : 0.0;
    tobacco += p.tobacco ? 1.0 : 0.0;
    amio += p.amiodarone ? 1.0 : 0.0;
    double lc = std::log(p.physiology.clearance_multiplier);
    log_cl += lc;
    log_cl_sq += lc * lc;
    if (p.cyp2c9 == Cyp2c9::k1_1) ++wild;
  }
  const double n = cfg.size;
  CHECK(age / n == doctest::Approx(67.3).epsilon(0.01));
  CHECK(weight / n == doctest::Approx(199.24).epsilon(0.01));
  CHECK(female / n == doctest::Approx(0.5314).epsilon(0.02));
  CHECK(tobacco / n == doctest::Approx(0.0966).epsilon(0.08));
  CHECK(amio / n == doctest::Approx(0.1154).epsilon(0.08));
  // Natural genotype sampling by default.
  CHECK(wild / n == doctest::Approx(0.6739).epsilon(0.02));
  // Inter-individual multipliers are lognormal around zero log-mean.
  const double mean_lc = log_cl / n;
  const double sd_lc = std::sqrt(log_cl_sq / n - mean_lc * mean_lc);
  CHECK(mean_lc == doctest::Approx(0.0).scale(1.0).epsilon(0.02));
  CHECK(sd_lc == doctest::Approx(0.45).epsilon(0.03));
}

TEST_CASE("rebalanced cohorts oversample variant genotypes") {
  CohortConfig cfg;
  cfg.size = 5000;
  cfg.seed = 99;
  cfg.rebalance_cyp2c9 = true;
  auto cohort = generate_cohort(cfg, PhysiologyPriors{});
  int wild = 0, star33 = 0;
  for (const Patient& p : cohort) {
    if (p.cyp2c9 == Cyp2c9::k1_1) ++wild;
    if (p.cyp2c9 == Cyp2c9::k3_3) ++star33;
  }
  CHECK(wild / 5000.0 == doctest::Approx(0.4514).epsilon(0.05));
  CHECK(star33 / 5000.0 == doctest::Approx(0.1).epsilon(0.2));
}

TEST_CASE("cohort generation is deterministic and validates size") {
  CohortConfig cfg;
  cfg.size = 10;
  cfg.seed = 4;
  auto a = generate_cohort(cfg, PhysiologyPriors{});
  auto b = generate_cohort(cfg, PhysiologyPriors{});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].age_years == b[i].age_years);
    CHECK(a[i].physiology.ec50_multiplier == b[i].physiology.ec50_multiplier);
    CHECK(a[i].cyp2c9 == b[i].cyp2c9);
  }
  cfg.size = 0;
  CHECK_THROWS_AS(generate_cohort(cfg, PhysiologyPriors{}), DomainError);
}

TEST_CASE("body surface area follows the Du Bois formula") {
  Patient p;
  p.weight_lb = 80.0 / 0.45359237;  // exactly 80 kg
  p.height_in = 170.0 / 2.54;       // exactly 170 cm
  const double oracle = 0.007184 * std::pow(80.0, 0.425) * std::pow(170.0, 0.725);
  CHECK(p.bsa_m2() == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(p.weight_kg() == doctest::Approx(80.0).epsilon(1e-12));
  CHECK(p.height_cm() == doctest::Approx(170.0).epsilon(1e-12));
}

TEST_CASE("allele counts per genotype") {
  Patient p;
  p.vkorc1 = Vkorc1::kGG;
  CHECK(p.vkorc1_a_alleles() == 0);
  p.vkorc1 = Vkorc1::kGA;
  CHECK(p.vkorc1_a_alleles() == 1);
  p.vkorc1 = Vkorc1::kAA;
  CHECK(p.vkorc1_a_alleles() == 2);

  p.cyp2c9 = Cyp2c9::k1_2;
  CHECK(p.cyp2c9_star2_alleles() == 1);
  CHECK(p.cyp2c9_star3_alleles() == 0);
  p.cyp2c9 = Cyp2c9::k2_2;
  CHECK(p.cyp2c9_star2_alleles() == 2);
  p.cyp2c9 = Cyp2c9::k2_3;
  CHECK(p.cyp2c9_star2_alleles() == 1);
  CHECK(p.cyp2c9_star3_alleles() == 1);
  p.cyp2c9 = Cyp2c9::k3_3;
  CHECK(p.cyp2c9_star2_alleles() == 0);
  CHECK(p.cyp2c9_star3_alleles() == 2);
}

TEST_CASE("enum names round trip") {
  CHECK(cyp2c9_from_string(to_string(Cyp2c9::k2_3)) == Cyp2c9::k2_3);
  CHECK(std::string(to_string(Cyp2c9::k1_1)) == "*1/*1");
  CHECK(vkorc1_from_string(to_string(Vkorc1::kGA)) == Vkorc1::kGA);
  CHECK(std::string(to_string(Vkorc1::kAA)) == "A/A");
  CHECK(sex_from_string(to_string(Sex::kMale)) == Sex::kMale);
  CHECK(race_from_string(to_string(Race::kPacificIslander)) == Race::kPacificIslander);
  CHECK(sensitivity_from_string(to_string(SensitivityClass::kHighlySensitive)) ==
        SensitivityClass::kHighlySensitive);
  CHECK(std::string(to_string(SensitivityClass::kHighlySensitive)) == "highly_sensitive");
  CHECK_THROWS_AS(cyp2c9_from_string("*9/*9"), DomainError);
}

TEST_CASE("default sensitivity classes follow the genotype grid") {
  SensitivityMap m = SensitivityMap::defaults();
  CHECK(m.classify(Cyp2c9::k1_1, Vkorc1::kGG) == SensitivityClass::kNormal);
  CHECK(m.classify(Cyp2c9::k1_2, Vkorc1::kGG) == SensitivityClass::kNormal);
  CHECK(m.classify(Cyp2c9::k1_1, Vkorc1::kGA) == SensitivityClass::kSensitive);
  CHECK(m.classify(Cyp2c9::k1_1, Vkorc1::kAA) == SensitivityClass::kSensitive);
  CHECK(m.classify(Cyp2c9::k3_3, Vkorc1::kGG) == SensitivityClass::kHighlySensitive);
  CHECK(m.classify(Cyp2c9::k3_3, Vkorc1::kAA) == SensitivityClass::kHighlySensitive);
  CHECK(m.classify(Cyp2c9::k1_3, Vkorc1::kAA) == SensitivityClass::kHighlySensitive);
  CHECK(m.classify(Cyp2c9::k2_2, Vkorc1::kAA) == SensitivityClass::kHighlySensitive);
  CHECK(m.classify(Cyp2c9::k2_3, Vkorc1::kAA) == SensitivityClass::kHighlySensitive);

  Patient p;
  p.cyp2c9 = Cyp2c9::k2_3;
  p.vkorc1 = Vkorc1::kAA;
  CHECK(classify_sensitivity(p) == SensitivityClass::kHighlySensitive);
}

TEST_CASE("sensitivity map round trips through csv and rejects gaps") {
  const fs::path path = scratch() / "classes.csv";
  SensitivityMap m = SensitivityMap::defaults();
  m.save(path);
  SensitivityMap loaded = SensitivityMap::load(path);
  for (int c = 0; c < kCyp2c9Count; ++c)
    for (int v = 0; v < kVkorc1Count; ++v)
      CHECK(loaded.classify(static_cast<Cyp2c9>(c), static_cast<Vkorc1>(v)) ==
            m.classify(static_cast<Cyp2c9>(c), static_cast<Vkorc1>(v)));

  // Drop one data row: the loader must notice the missing genotype pair.
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  in.close();
  REQUIRE(lines.size() >= 19);  // header + 18 pairs
  const fs::path partial = scratch() / "classes_partial.csv";
  {
    std::ofstream out(partial);
    for (std::size_t i = 0; i + 1 < lines.size(); ++i) out << lines[i] << "\n";
  }
  CHECK_THROWS_AS(SensitivityMap::load(partial), ConfigError);
}

TEST_CASE("the shipped sensitivity table matches the built-in default") {
  SensitivityMap shipped =
      SensitivityMap::load(fs::path(WARFARIN_DATA_DIR) / "sensitivity_classes.csv");
  SensitivityMap dflt = SensitivityMap::defaults();
  for (int c = 0; c < kCyp2c9Count; ++c)
    for (int v = 0; v < kVkorc1Count; ++v)
      CHECK(shipped.classify(static_cast<Cyp2c9>(c), static_cast<Vkorc1>(v)) ==
            dflt.classify(static_cast<Cyp2c9>(c), static_cast<Vkorc1>(v)));
}

TEST_CASE("cohort csv round trips every field exactly") {
  CohortConfig cfg;
  cfg.size = 25;
  cfg.seed = 20170101;
  auto cohort = generate_cohort(cfg, PhysiologyPriors{});
  const fs::path path = scratch() / "cohort.csv";
  write_cohort_csv(path, cohort, cfg, "feedc0defeedc0de");
  auto loaded = read_cohort_csv(path);
  REQUIRE(loaded.size() == cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const Patient &a = cohort[i], &b = loaded[i];
    CHECK(a.id == b.id);
    CHECK(a.age_years == b.age_years);  // %.17g survives the round trip bit-exactly
    CHECK(a.weight_lb == b.weight_lb);
    CHECK(a.height_in == b.height_in);
    CHECK(a.sex == b.sex);
    CHECK(a.race == b.race);
    CHECK(a.tobacco == b.tobacco);
    CHECK(a.amiodarone == b.amiodarone);
    CHECK(a.fluvastatin == b.fluvastatin);
    CHECK(a.cyp2c9 == b.cyp2c9);
    CHECK(a.vkorc1 == b.vkorc1);
    CHECK(a.physiology.clearance_multiplier == b.physiology.clearance_multiplier);
    CHECK(a.physiology.volume_multiplier == b.physiology.volume_multiplier);
    CHECK(a.physiology.ec50_multiplier == b.physiology.ec50_multiplier);
    CHECK(a.physiology.baseline_inr == b.physiology.baseline_inr);
  }

  // The header block records provenance.
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first.rfind("#", 0) == 0);
}

TEST_CASE("cohort csv reader rejects malformed input") {
  const fs::path empty = scratch() / "empty.csv";
  std::ofstream(empty).close();
  CHECK_THROWS_AS(read_cohort_csv(empty), DomainError);

  const fs::path headerless = scratch() / "headerless.csv";
  {
    std::ofstream out(headerless);
    out << "1,2,3\n";
  }
  CHECK_THROWS_AS(read_cohort_csv(headerless), DomainError);

  const fs::path truncated = scratch() / "badrow.csv";
  {
    std::ofstream out(truncated);
    out << "id,age_years,weight_lb,height_in,sex,race,tobacco,amiodarone,fluvastatin,"
           "cyp2c9,vkorc1,clearance_multiplier,volume_multiplier,ec50_multiplier,baseline_inr\n";
    out << "0,67,199\n";
  }
  CHECK_THROWS_AS(read_cohort_csv(truncated), DomainError);
}
