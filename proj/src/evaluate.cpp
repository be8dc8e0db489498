#include "warfarin/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace warfarin {

namespace {

void finalize(ClassSummary& s, const std::vector<double>& values) {
  s.count = static_cast<int>(values.size());
  if (values.empty()) return;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean_pttr = sum / s.count;
  if (s.count > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean_pttr) * (v - s.mean_pttr);
    s.sd_pttr = std::sqrt(sq / (s.count - 1));
  }
}

nlohmann::json summary_json(const ClassSummary& s) {
  return {{"count", s.count}, {"mean_pttr", s.mean_pttr}, {"sd_pttr", s.sd_pttr}};
}

ClassSummary summary_from_json(const nlohmann::json& j) {
  ClassSummary s;
  s.count = j.at("count").get<int>();
  s.mean_pttr = j.at("mean_pttr").get<double>();
  s.sd_pttr = j.at("sd_pttr").get<double>();
  return s;
}

// Everything the aggregation needs from one patient's episode. Filled into a
// per-patient slot so the merge is independent of which worker ran it.
struct EpisodeStats {
  PatientOutcome outcome;
  std::set<int> used;
  long decisions = 0;
  long no_change = 0;
};

EpisodeStats run_one(DosingPolicy& policy, const Patient& p, const PkPdParams& params,
                     const RewardConfig& reward, const TrialConfig& trial,
                     const ActionSpace& actions, std::uint64_t eval_seed,
                     const SensitivityMap& classes) {
  // Child streams are pure functions of (eval_seed, patient id): no draw is
  // taken from the master stream, so workers can derive them independently.
  RandomStream master(eval_seed);
  DosingEnv env(p, params, reward, actions, trial,
                master.child("measurement", static_cast<std::uint64_t>(p.id)));
  Trajectory t = run_episode(env, policy);

  EpisodeStats s;
  s.outcome.patient_id = p.id;
  s.outcome.sensitivity = classes.classify(p.cyp2c9, p.vkorc1);
  s.outcome.pttr = t.pttr;
  double dose_sum = 0.0;
  for (double d : t.daily_dose) dose_sum += d;
  s.outcome.mean_daily_dose = t.daily_dose.empty() ? 0.0 : dose_sum / t.daily_dose.size();
  s.outcome.final_dose = t.daily_dose.empty() ? 0.0 : t.daily_dose.back();
  for (const DecisionRecord& rec : t.decisions) {
    ++s.decisions;
    if (rec.action_index >= 0) s.used.insert(rec.action_index);
    if (rec.percent_change == 0.0 && rec.one_time == OneTimeAction::kNone) ++s.no_change;
  }
  return s;
}

}  // namespace

EvaluationReport evaluate_policy(DosingPolicy& policy, const std::vector<Patient>& cohort,
                                 const PkPdParams& params, const RewardConfig& reward,
                                 const TrialConfig& trial, std::uint64_t eval_seed,
                                 const SensitivityMap& classes, int possible_actions,
                                 int threads) {
  if (cohort.empty()) throw DomainError("evaluate: empty cohort");
  params.validate();
  // The environment only consumes the measurement stream; the action grid is
  // irrelevant for protocol arms, so a default grid is fine here.
  const ActionSpace actions = ActionSpace::uniform_grid();

  if (threads < 1) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<int>(threads, static_cast<int>(cohort.size()));

  std::vector<EpisodeStats> stats(cohort.size());
  if (threads == 1) {
    for (std::size_t i = 0; i < cohort.size(); ++i)
      stats[i] = run_one(policy, cohort[i], params, reward, trial, actions, eval_seed, classes);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w]() {
        try {
          std::unique_ptr<DosingPolicy> mine = policy.clone();
          for (std::size_t i = w; i < cohort.size(); i += threads)
            stats[i] =
                run_one(*mine, cohort[i], params, reward, trial, actions, eval_seed, classes);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EvaluationReport report;
  report.policy_name = policy.name();
  report.eval_seed = eval_seed;
  report.cohort_size = static_cast<int>(cohort.size());
  report.possible_actions = possible_actions;

  std::array<std::vector<double>, 3> class_pttr;
  std::vector<double> all_pttr;
  all_pttr.reserve(cohort.size());
  std::set<int> used;
  long decisions = 0;
  long no_change = 0;
  for (const EpisodeStats& s : stats) {
    report.per_patient.push_back(s.outcome);
    all_pttr.push_back(s.outcome.pttr);
    class_pttr[static_cast<int>(s.outcome.sensitivity)].push_back(s.outcome.pttr);
    used.insert(s.used.begin(), s.used.end());
    decisions += s.decisions;
    no_change += s.no_change;
  }

  finalize(report.overall, all_pttr);
  for (int c = 0; c < 3; ++c) finalize(report.by_class[c], class_pttr[c]);
  report.used_actions = static_cast<int>(used.size());
  report.no_change_fraction =
      decisions > 0 ? static_cast<double>(no_change) / static_cast<double>(decisions) : 0.0;
  return report;
}

void write_plot_data_csv(const std::filesystem::path& path, DosingPolicy& policy,
                         const std::vector<Patient>& cohort, const PkPdParams& params,
                         const RewardConfig& reward, const TrialConfig& trial,
                         std::uint64_t eval_seed, int max_patients,
                         const std::string& config_hash) {
  if (cohort.empty()) throw DomainError("plot data: empty cohort");
  if (max_patients < 1) throw DomainError("plot data: need at least one patient");
  params.validate();
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write plot data: " + path.string());

  const ActionSpace actions = ActionSpace::uniform_grid();
  const int n = std::min<int>(max_patients, static_cast<int>(cohort.size()));
  char buf[64];
  auto d = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };

  out << "# policy = " << policy.name() << "\n";
  out << "# config_hash = " << config_hash << "\n";
  out << "# eval_seed = " << eval_seed << "\n";
  out << "# patients = " << n << "\n";
  out << "patient_id,day,dose_mg,inr_true,inr_measured,decision,in_range\n";
  RandomStream master(eval_seed);
  for (int i = 0; i < n; ++i) {
    const Patient& p = cohort[i];
    DosingEnv env(p, params, reward, actions, trial,
                  master.child("measurement", static_cast<std::uint64_t>(p.id)));
    Trajectory t = run_episode(env, policy);
    std::set<int> decision_days;
    for (const DecisionRecord& rec : t.decisions) decision_days.insert(rec.day);
    for (std::size_t k = 0; k < t.daily_true_inr.size(); ++k) {
      const int day = static_cast<int>(k) + 1;
      const bool in_range =
          t.daily_true_inr[k] >= trial.pttr_low && t.daily_true_inr[k] <= trial.pttr_high;
      out << p.id << ',' << day << ',' << d(t.daily_dose[k]) << ',' << d(t.daily_true_inr[k])
          << ',' << d(t.daily_measured_inr[k]) << ',' << (decision_days.count(day) ? 1 : 0) << ','
          << (in_range ? 1 : 0) << '\n';
    }
  }
}

nlohmann::json EvaluationReport::to_json(bool include_per_patient) const {
  nlohmann::json j;
  j["policy_name"] = policy_name;
  j["config_hash"] = config_hash;
  j["eval_seed"] = eval_seed;
  j["cohort_seed"] = cohort_seed;
  j["cohort_size"] = cohort_size;
  j["overall"] = summary_json(overall);
  j["by_class"] = {{"normal", summary_json(by_class[0])},
                   {"sensitive", summary_json(by_class[1])},
                   {"highly_sensitive", summary_json(by_class[2])}};
  j["possible_actions"] = possible_actions;
  j["used_actions"] = used_actions;
  j["no_change_fraction"] = no_change_fraction;
  if (include_per_patient) {
    nlohmann::json arr = nlohmann::json::array();
    for (const PatientOutcome& o : per_patient) {
      arr.push_back({{"patient_id", o.patient_id},
                     {"sensitivity", to_string(o.sensitivity)},
                     {"pttr", o.pttr},
                     {"mean_daily_dose", o.mean_daily_dose},
                     {"final_dose", o.final_dose}});
    }
    j["per_patient"] = arr;
  }
  return j;
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& j) {
  EvaluationReport r;
  r.policy_name = j.at("policy_name").get<std::string>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.eval_seed = j.at("eval_seed").get<std::uint64_t>();
  r.cohort_seed = j.at("cohort_seed").get<std::uint64_t>();
  r.cohort_size = j.at("cohort_size").get<int>();
  r.overall = summary_from_json(j.at("overall"));
  r.by_class[0] = summary_from_json(j.at("by_class").at("normal"));
  r.by_class[1] = summary_from_json(j.at("by_class").at("sensitive"));
  r.by_class[2] = summary_from_json(j.at("by_class").at("highly_sensitive"));
  r.possible_actions = j.at("possible_actions").get<int>();
  r.used_actions = j.at("used_actions").get<int>();
  r.no_change_fraction = j.at("no_change_fraction").get<double>();
  if (j.contains("per_patient")) {
    for (const auto& e : j.at("per_patient")) {
      PatientOutcome o;
      o.patient_id = e.at("patient_id").get<int>();
      o.sensitivity = sensitivity_from_string(e.at("sensitivity").get<std::string>());
      o.pttr = e.at("pttr").get<double>();
      o.mean_daily_dose = e.at("mean_daily_dose").get<double>();
      o.final_dose = e.at("final_dose").get<double>();
      r.per_patient.push_back(o);
    }
  }
  return r;
}

void write_report_json(const std::filesystem::path& path, const EvaluationReport& report,
                       bool include_per_patient) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write report: " + path.string());
  out << report.to_json(include_per_patient).dump(2) << "\n";
}

EvaluationReport read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open report: " + path.string());
  nlohmann::json j;
  in >> j;
  return EvaluationReport::from_json(j);
}

void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write report csv: " + path.string());
  out << "# policy = " << report.policy_name << "\n";
  out << "# config_hash = " << report.config_hash << "\n";
  out << "# eval_seed = " << report.eval_seed << "\n";
  char buf[64];
  auto d = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  out << "patient_id,sensitivity,pttr,mean_daily_dose,final_dose\n";
  for (const PatientOutcome& o : report.per_patient)
    out << o.patient_id << ',' << to_string(o.sensitivity) << ',' << d(o.pttr) << ','
        << d(o.mean_daily_dose) << ',' << d(o.final_dose) << '\n';
}

namespace {

std::string pct_cell(const ClassSummary& s) {
  if (s.count == 0) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f (%.1f)", 100.0 * s.mean_pttr, 100.0 * s.sd_pttr);
  return std::string(buf);
}

}  // namespace

std::string comparison_markdown(const std::vector<EvaluationReport>& reports) {
  if (reports.empty()) throw DomainError("comparison: no reports");
  std::ostringstream out;
  out << "# Protocol comparison\n\n";
  out << "Percent of days 1-90 with true INR in the therapeutic range, mean (sd)\n";
  out << "across patients, split by dose-response sensitivity class.\n\n";
  out << "| group |";
  for (const auto& r : reports) out << ' ' << r.policy_name << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < reports.size(); ++i) out << "---|";
  out << "\n";
  const char* row_names[3] = {"normal", "sensitive", "highly sensitive"};
  for (int c = 0; c < 3; ++c) {
    out << "| " << row_names[c] << " |";
    for (const auto& r : reports) out << ' ' << pct_cell(r.by_class[c]) << " |";
    out << "\n";
  }
  out << "| all |";
  for (const auto& r : reports) out << ' ' << pct_cell(r.overall) << " |";
  out << "\n| possible actions |";
  for (const auto& r : reports) out << ' ' << r.possible_actions << " |";
  out << "\n| used actions |";
  for (const auto& r : reports) out << ' ' << r.used_actions << " |";
  out << "\n| no-change decisions |";
  char buf[32];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), " %.1f%% |", 100.0 * r.no_change_fraction);
    out << buf;
  }
  out << "\n\n";
  out << "Parenthesised values are the standard deviation of per-patient PTTR,\n";
  out << "printed in percentage points: \"(9.0)\" means a 9.0 pp spread across\n";
  out << "patients, i.e. 0.090 in fraction-of-time units.\n";
  return out.str();
}

std::string comparison_csv(const std::vector<EvaluationReport>& reports) {
  if (reports.empty()) throw DomainError("comparison: no reports");
  std::ostringstream out;
  out << "group";
  for (const auto& r : reports) out << ',' << r.policy_name;
  out << "\n";
  char buf[64];
  auto cell = [&buf](const ClassSummary& s) {
    if (s.count == 0) return std::string("-");
    std::snprintf(buf, sizeof(buf), "%.4f", s.mean_pttr);
    return std::string(buf);
  };
  const char* row_names[3] = {"normal", "sensitive", "highly_sensitive"};
  for (int c = 0; c < 3; ++c) {
    out << row_names[c];
    for (const auto& r : reports) out << ',' << cell(r.by_class[c]);
    out << "\n";
  }
  out << "all";
  for (const auto& r : reports) out << ',' << cell(r.overall);
  out << "\npossible_actions";
  for (const auto& r : reports) out << ',' << r.possible_actions;
  out << "\nused_actions";
  for (const auto& r : reports) out << ',' << r.used_actions;
  out << "\nno_change_fraction";
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%.4f", r.no_change_fraction);
    out << ',' << buf;
  }
  out << "\n";
  return out.str();
}

}  // namespace warfarin
