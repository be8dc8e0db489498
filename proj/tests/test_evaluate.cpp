#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "warfarin/common.hpp"
#include "warfarin/config.hpp"
#include "warfarin/evaluate.hpp"
#include "warfarin/experiment.hpp"
#include "warfarin/patient.hpp"
#include "warfarin/pkpd.hpp"
#include "warfarin/protocols.hpp"
#include "warfarin/random.hpp"

using namespace warfarin;

namespace {

std::filesystem::path scratch() {
  auto dir = std::filesystem::temp_directory_path() / "warfarin_evaluate_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::filesystem::path data_dir() { return std::filesystem::path(WARFARIN_DATA_DIR); }

std::vector<Patient> small_cohort(int n, std::uint64_t seed) {
  CohortConfig cfg;
  cfg.size = n;
  cfg.seed = seed;
  return generate_cohort(cfg, PkPdParams::defaults().physiology);
}

TableMaintenancePolicy aurora_policy() {
  ProtocolTable aurora = ProtocolTable::load(data_dir() / "protocol_aurora.table");
  return TableMaintenancePolicy(aurora, 7, true);
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

TEST_CASE("evaluate_policy aggregates per-patient outcomes by sensitivity class") {
  std::vector<Patient> cohort = small_cohort(20, 5150);
  PkPdParams params = PkPdParams::defaults();
  TableMaintenancePolicy policy = aurora_policy();
  SensitivityMap classes = SensitivityMap::defaults();

  EvaluationReport r = evaluate_policy(policy, cohort, params, RewardConfig{}, TrialConfig{}, 42,
                                       classes, 8, 1);

  CHECK(r.policy_name == "aurora+revision");
  CHECK(r.eval_seed == 42);
  CHECK(r.cohort_size == 20);
  CHECK(r.possible_actions == 8);
  CHECK(r.config_hash.empty());  // set by the orchestration layer, not here
  REQUIRE(r.per_patient.size() == 20);
  CHECK(r.overall.count == 20);
  CHECK(r.by_class[0].count + r.by_class[1].count + r.by_class[2].count == 20);
  CHECK(r.used_actions >= 1);
  CHECK(r.no_change_fraction >= 0.0);
  CHECK(r.no_change_fraction <= 1.0);

  // Outcomes merge in cohort order regardless of scheduling.
  for (int i = 0; i < 20; ++i) {
    CHECK(r.per_patient[i].patient_id == cohort[i].id);
    CHECK(r.per_patient[i].pttr >= 0.0);
    CHECK(r.per_patient[i].pttr <= 1.0);
    CHECK(r.per_patient[i].mean_daily_dose >= 0.0);
    CHECK(r.per_patient[i].final_dose >= 0.0);
    CHECK(r.per_patient[i].sensitivity == classes.classify(cohort[i].cyp2c9, cohort[i].vkorc1));
  }

  // The overall summary is the mean/sample-sd of the per-patient PTTRs, and
  // the class means recombine (count-weighted) to the overall mean.
  double sum = 0.0;
  for (const auto& o : r.per_patient) sum += o.pttr;
  const double mean = sum / 20.0;
  CHECK(r.overall.mean_pttr == doctest::Approx(mean).epsilon(1e-12));
  double sq = 0.0;
  for (const auto& o : r.per_patient) sq += (o.pttr - mean) * (o.pttr - mean);
  CHECK(r.overall.sd_pttr == doctest::Approx(std::sqrt(sq / 19.0)).epsilon(1e-12));
  double weighted = 0.0;
  for (int c = 0; c < 3; ++c) weighted += r.by_class[c].count * r.by_class[c].mean_pttr;
  CHECK(weighted == doctest::Approx(20.0 * r.overall.mean_pttr).epsilon(1e-12));

  SUBCASE("the report is identical for any worker-pool size") {
    TableMaintenancePolicy p3 = aurora_policy();
    EvaluationReport r3 = evaluate_policy(p3, cohort, params, RewardConfig{}, TrialConfig{}, 42,
                                          classes, 8, 3);
    CHECK(r3.to_json(true).dump() == r.to_json(true).dump());

    TableMaintenancePolicy pall = aurora_policy();
    EvaluationReport rall = evaluate_policy(pall, cohort, params, RewardConfig{}, TrialConfig{},
                                            42, classes, 8, 0);
    CHECK(rall.to_json(true).dump() == r.to_json(true).dump());
  }

  SUBCASE("a different evaluation seed moves the measurements") {
    TableMaintenancePolicy p2 = aurora_policy();
    EvaluationReport r2 = evaluate_policy(p2, cohort, params, RewardConfig{}, TrialConfig{}, 43,
                                          classes, 8, 1);
    CHECK(r2.overall.mean_pttr != r.overall.mean_pttr);
  }

  SUBCASE("empty cohorts are rejected") {
    TableMaintenancePolicy p2 = aurora_policy();
    CHECK_THROWS_AS(evaluate_policy(p2, {}, params, RewardConfig{}, TrialConfig{}, 42, classes,
                                    8, 1),
                    DomainError);
  }
}

TEST_CASE("evaluation report json round trips") {
  std::vector<Patient> cohort = small_cohort(8, 2112);
  TableMaintenancePolicy policy = aurora_policy();
  EvaluationReport r = evaluate_policy(policy, cohort, PkPdParams::defaults(), RewardConfig{},
                                       TrialConfig{}, 7, SensitivityMap::defaults(), 8, 1);
  r.config_hash = "0123456789abcdef";
  r.cohort_seed = 2112;

  nlohmann::json j = r.to_json(true);
  EvaluationReport q = EvaluationReport::from_json(j);
  CHECK(q.policy_name == r.policy_name);
  CHECK(q.config_hash == "0123456789abcdef");
  CHECK(q.eval_seed == 7);
  CHECK(q.cohort_seed == 2112);
  CHECK(q.cohort_size == 8);
  CHECK(q.overall.count == r.overall.count);
  CHECK(q.overall.mean_pttr == r.overall.mean_pttr);
  CHECK(q.overall.sd_pttr == r.overall.sd_pttr);
  for (int c = 0; c < 3; ++c) {
    CHECK(q.by_class[c].count == r.by_class[c].count);
    CHECK(q.by_class[c].mean_pttr == r.by_class[c].mean_pttr);
  }
  CHECK(q.possible_actions == 8);
  CHECK(q.used_actions == r.used_actions);
  CHECK(q.no_change_fraction == r.no_change_fraction);
  REQUIRE(q.per_patient.size() == r.per_patient.size());
  CHECK(q.per_patient[3].patient_id == r.per_patient[3].patient_id);
  CHECK(q.per_patient[3].pttr == r.per_patient[3].pttr);
  CHECK(q.per_patient[3].sensitivity == r.per_patient[3].sensitivity);

  nlohmann::json slim = r.to_json(false);
  CHECK_FALSE(slim.contains("per_patient"));
  CHECK(EvaluationReport::from_json(slim).per_patient.empty());

  SUBCASE("file round trip") {
    auto path = scratch() / "report.json";
    write_report_json(path, r, true);
    EvaluationReport loaded = read_report_json(path);
    CHECK(loaded.to_json(true).dump() == r.to_json(true).dump());
    CHECK_THROWS_AS(read_report_json(scratch() / "missing.json"), DomainError);
  }

  SUBCASE("csv report shape") {
    auto path = scratch() / "report.csv";
    write_report_csv(path, r);
    std::vector<std::string> lines = read_lines(path);
    REQUIRE(lines.size() == 4 + 8);
    CHECK(lines[0] == "# policy = aurora+revision");
    CHECK(lines[1] == "# config_hash = 0123456789abcdef");
    CHECK(lines[2] == "# eval_seed = 7");
    CHECK(lines[3] == "patient_id,sensitivity,pttr,mean_daily_dose,final_dose");
    CHECK(split_csv(lines[4]).size() == 5);
  }
}

TEST_CASE("plot data csv lists 90 labelled days per patient") {
  std::vector<Patient> cohort = small_cohort(7, 1984);
  PkPdParams params = PkPdParams::defaults();
  TableMaintenancePolicy policy = aurora_policy();
  TrialConfig trial;

  auto path = scratch() / "plot.csv";
  write_plot_data_csv(path, policy, cohort, params, RewardConfig{}, trial, 42, 5, "abcd");

  std::vector<std::string> lines = read_lines(path);
  REQUIRE(lines.size() == 5 + 5 * 90);
  CHECK(lines[0] == "# policy = aurora+revision");
  CHECK(lines[1] == "# config_hash = abcd");
  CHECK(lines[2] == "# eval_seed = 42");
  CHECK(lines[3] == "# patients = 5");
  CHECK(lines[4] == "patient_id,day,dose_mg,inr_true,inr_measured,decision,in_range");

  int decision_rows = 0;
  for (std::size_t i = 5; i < lines.size(); ++i) {
    std::vector<std::string> f = split_csv(lines[i]);
    REQUIRE(f.size() == 7);
    const int day = std::stoi(f[1]);
    CHECK(day >= 1);
    CHECK(day <= 90);
    const double true_inr = std::stod(f[3]);
    const bool in_range = true_inr >= trial.pttr_low && true_inr <= trial.pttr_high;
    CHECK(f[6] == (in_range ? "1" : "0"));
    if (f[5] == "1") {
      ++decision_rows;
      CHECK((day - 5) % 7 == 0);  // maintenance decisions fall on days 5, 12, ...
    }
  }
  CHECK(decision_rows == 5 * 13);

  // The first five cohort members appear, in order, 90 rows each.
  CHECK(split_csv(lines[5])[0] == std::to_string(cohort[0].id));
  CHECK(split_csv(lines[5 + 90])[0] == std::to_string(cohort[1].id));
  CHECK(split_csv(lines[5])[1] == "1");

  SUBCASE("byte-identical on rewrite") {
    auto again = scratch() / "plot2.csv";
    TableMaintenancePolicy p2 = aurora_policy();
    write_plot_data_csv(again, p2, cohort, params, RewardConfig{}, trial, 42, 5, "abcd");
    CHECK(read_file(again) == read_file(path));
  }

  SUBCASE("max_patients caps at the cohort size") {
    auto capped = scratch() / "plot3.csv";
    TableMaintenancePolicy p2 = aurora_policy();
    write_plot_data_csv(capped, p2, cohort, params, RewardConfig{}, trial, 42, 500, "abcd");
    CHECK(read_lines(capped).size() == 5 + 7 * 90);
  }

  SUBCASE("argument validation") {
    TableMaintenancePolicy p2 = aurora_policy();
    CHECK_THROWS_AS(write_plot_data_csv(scratch() / "x.csv", p2, {}, params, RewardConfig{},
                                        trial, 42, 5, "abcd"),
                    DomainError);
    CHECK_THROWS_AS(write_plot_data_csv(scratch() / "x.csv", p2, cohort, params, RewardConfig{},
                                        trial, 42, 0, "abcd"),
                    DomainError);
    CHECK_THROWS_AS(write_plot_data_csv("/nonexistent-dir/x.csv", p2, cohort, params,
                                        RewardConfig{}, trial, 42, 5, "abcd"),
                    DomainError);
  }
}

TEST_CASE("comparison tables put one policy per column") {
  std::vector<Patient> cohort = small_cohort(12, 777);
  TableMaintenancePolicy policy = aurora_policy();
  EvaluationReport a = evaluate_policy(policy, cohort, PkPdParams::defaults(), RewardConfig{},
                                       TrialConfig{}, 9, SensitivityMap::defaults(), 8, 1);
  EvaluationReport b = a;
  b.policy_name = "other";

  std::string md = comparison_markdown({a, b});
  CHECK(md.find("# Protocol comparison") != std::string::npos);
  CHECK(md.find("| group | aurora+revision | other |") != std::string::npos);
  CHECK(md.find("| normal |") != std::string::npos);
  CHECK(md.find("| sensitive |") != std::string::npos);
  CHECK(md.find("| highly sensitive |") != std::string::npos);
  CHECK(md.find("| all |") != std::string::npos);
  CHECK(md.find("| possible actions | 8 | 8 |") != std::string::npos);
  CHECK(md.find("| used actions |") != std::string::npos);
  CHECK(md.find("| no-change decisions |") != std::string::npos);
  CHECK(md.find("standard deviation of per-patient PTTR") != std::string::npos);

  // An empty class renders as a dash.
  EvaluationReport c = a;
  c.by_class[2] = ClassSummary{};
  std::string md2 = comparison_markdown({c});
  CHECK(md2.find("| highly sensitive | - |") != std::string::npos);

  std::string csv = comparison_csv({a, b});
  CHECK(csv.rfind("group,aurora+revision,other\n", 0) == 0);
  CHECK(csv.find("\nall,") != std::string::npos);
  CHECK(csv.find("\npossible_actions,8,8") != std::string::npos);
  CHECK(csv.find("\nno_change_fraction,") != std::string::npos);

  CHECK_THROWS_AS(comparison_markdown({}), DomainError);
  CHECK_THROWS_AS(comparison_csv({}), DomainError);
}

TEST_CASE("run_compare insists on a common evaluation cohort") {
  // Handcrafted report files: same-size cohorts with different seeds.
  std::vector<Patient> cohort = small_cohort(6, 31);
  TableMaintenancePolicy policy = aurora_policy();
  EvaluationReport a = evaluate_policy(policy, cohort, PkPdParams::defaults(), RewardConfig{},
                                       TrialConfig{}, 9, SensitivityMap::defaults(), 8, 1);
  a.config_hash = "aaaa";
  a.cohort_seed = 31;
  EvaluationReport b = a;
  b.policy_name = "other";
  b.cohort_seed = 32;

  auto fa = scratch() / "cmp_a.json";
  auto fb = scratch() / "cmp_b.json";
  write_report_json(fa, a, false);
  write_report_json(fb, b, false);

  Config cfg = Config::from_string("[cohort]\nsize = 6\nseed = 31\n", "compare-test.cfg");

  try {
    experiment::run_compare(cfg, {}, {fa, fb});
    FAIL("expected DomainError for mismatched cohorts");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("use --force") != std::string::npos);
  }

  experiment::CompareOutcome forced = experiment::run_compare(cfg, {}, {fa, fb}, true);
  REQUIRE(forced.reports.size() == 2);
  CHECK(forced.markdown.find("| group | aurora+revision | other |") != std::string::npos);
  CHECK_FALSE(forced.csv.empty());

  // Matching seeds compare cleanly.
  b.cohort_seed = 31;
  write_report_json(fb, b, false);
  experiment::CompareOutcome ok = experiment::run_compare(cfg, {}, {fa, fb});
  CHECK(ok.reports.size() == 2);

  CHECK_THROWS_AS(experiment::run_compare(cfg, {}, {}), ConfigError);
}
