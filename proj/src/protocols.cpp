#include "warfarin/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "warfarin/detail/kvfile.hpp"

namespace warfarin {

namespace {

constexpr double kEdgeTolerance = 1e-9;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(detail::trim_ws(f));
  return out;
}

double parse_bound(const std::string& s, const std::string& context) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    double d = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(context + ": bad bound: " + s);
  }
}

}  // namespace

const char* to_string(OneTimeAction v) {
  switch (v) {
    case OneTimeAction::kNone: return "none";
    case OneTimeAction::kSkipDose: return "skip_dose";
    case OneTimeAction::kExtraDose: return "extra_dose";
  }
  return "none";
}

OneTimeAction one_time_action_from_string(const std::string& s) {
  if (s == "none") return OneTimeAction::kNone;
  if (s == "skip_dose") return OneTimeAction::kSkipDose;
  if (s == "extra_dose") return OneTimeAction::kExtraDose;
  throw ConfigError("unknown one-time action: " + s);
}

double next_dose(double previous_dose_mg, double percent_change) {
  if (!std::isfinite(previous_dose_mg) || previous_dose_mg < 0)
    throw DomainError("next_dose: previous dose must be finite and non-negative");
  if (!std::isfinite(percent_change)) throw DomainError("next_dose: percent change must be finite");
  double dose = previous_dose_mg * (1.0 + percent_change);
  return std::clamp(dose, 0.0, kMaxDailyDoseMg);
}

ProtocolTable ProtocolTable::from_rows(std::vector<ProtocolRow> rows, std::string name) {
  if (rows.empty()) throw ConfigError("protocol table " + name + ": no rows");
  std::sort(rows.begin(), rows.end(),
            [](const ProtocolRow& a, const ProtocolRow& b) { return a.inr_low < b.inr_low; });
  if (std::abs(rows.front().inr_low) > kEdgeTolerance)
    throw ConfigError("protocol table " + name + ": first row must start at 0");
  rows.front().inr_low = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ProtocolRow& r = rows[i];
    if (!(r.inr_high > r.inr_low))
      throw ConfigError("protocol table " + name + ": row bounds not increasing");
    if (!std::isfinite(r.percent_change) || r.percent_change <= -1.0 || r.percent_change > 5.0)
      throw ConfigError("protocol table " + name + ": percent change out of range");
    if (i + 1 < rows.size()) {
      if (std::abs(rows[i + 1].inr_low - r.inr_high) > kEdgeTolerance)
        throw ConfigError("protocol table " + name + ": rows do not partition (0, inf)");
      rows[i + 1].inr_low = r.inr_high;
    }
  }
  if (!std::isinf(rows.back().inr_high))
    throw ConfigError("protocol table " + name + ": last row must extend to inf");
  ProtocolTable t;
  t.rows_ = std::move(rows);
  t.name_ = std::move(name);
  return t;
}

const ProtocolRow& ProtocolTable::row_for(double inr) const {
  if (!(inr > 0) || !std::isfinite(inr))
    throw DomainError("protocol table " + name_ + ": INR must be positive and finite");
  for (const ProtocolRow& r : rows_)
    if (inr > r.inr_low && inr <= r.inr_high) return r;
  return rows_.back();
}

ProtocolTable ProtocolTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open protocol table: " + path.string());
  std::string name = path.stem().string();
  std::vector<ProtocolRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    line = detail::trim_ws(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen && line.rfind("name", 0) == 0 && line.find('=') != std::string::npos) {
      name = detail::trim_ws(line.substr(line.find('=') + 1));
      continue;
    }
    if (line.rfind("low,", 0) == 0) {
      header_seen = true;
      continue;
    }
    auto fields = split_csv(line);
    if (fields.size() != 4)
      throw ConfigError(path.string() + ": expected 4 fields per row, got: " + line);
    ProtocolRow r;
    r.inr_low = parse_bound(fields[0], path.string());
    r.inr_high = parse_bound(fields[1], path.string());
    try {
      r.percent_change = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw ConfigError(path.string() + ": bad percent: " + fields[2]);
    }
    r.one_time = one_time_action_from_string(fields[3]);
    rows.push_back(r);
  }
  return from_rows(std::move(rows), name);
}

void ProtocolTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write protocol table: " + path.string());
  char buf[64];
  auto d = [&buf](double v) {
    if (std::isinf(v)) return std::string("inf");
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "name = " << name_ << "\n";
  out << "low,high,percent_change,one_time_action\n";
  for (const ProtocolRow& r : rows_)
    out << d(r.inr_low) << ',' << d(r.inr_high) << ',' << d(r.percent_change) << ','
        << to_string(r.one_time) << '\n';
}

DoseDecision table_decide(const ProtocolTable& table, const Observation& obs, int duration_days) {
  const ProtocolRow& row = table.row_for(obs.inr_current);
  DoseDecision d;
  d.dose_mg = next_dose(obs.dose_previous_mg, row.percent_change);
  d.duration_days = duration_days;
  d.one_time = row.one_time;
  d.percent_change = row.percent_change;
  // Row index doubles as the action id so used-action statistics cover the
  // table arms too.
  d.action_index = static_cast<int>(&row - table.rows().data());
  return d;
}

IwpcCoefficients IwpcCoefficients::load(const std::filesystem::path& path) {
  detail::KvFile kv = detail::KvFile::load(path);
  IwpcCoefficients c;
  c.intercept = kv.get_double("intercept");
  c.age_decade = kv.get_double("age_decade");
  c.height_cm = kv.get_double("height_cm");
  c.weight_kg = kv.get_double("weight_kg");
  c.vkorc1_ga = kv.get_double("vkorc1_ga");
  c.vkorc1_aa = kv.get_double("vkorc1_aa");
  c.cyp2c9_12 = kv.get_double("cyp2c9_star1_star2");
  c.cyp2c9_13 = kv.get_double("cyp2c9_star1_star3");
  c.cyp2c9_22 = kv.get_double("cyp2c9_star2_star2");
  c.cyp2c9_23 = kv.get_double("cyp2c9_star2_star3");
  c.cyp2c9_33 = kv.get_double("cyp2c9_star3_star3");
  c.asian = kv.get_double("asian");
  c.black = kv.get_double("black");
  c.missing_or_mixed_race = kv.get_double("missing_or_mixed_race");
  c.enzyme_inducer = kv.get_double("enzyme_inducer");
  c.amiodarone = kv.get_double("amiodarone");
  return c;
}

double iwpc_daily_dose(const Patient& p, const IwpcCoefficients& c) {
  double s = c.intercept;
  s += c.age_decade * std::floor(p.age_years / 10.0);
  s += c.height_cm * p.height_cm();
  s += c.weight_kg * p.weight_kg();
  if (p.vkorc1 == Vkorc1::kGA) s += c.vkorc1_ga;
  if (p.vkorc1 == Vkorc1::kAA) s += c.vkorc1_aa;
  switch (p.cyp2c9) {
    case Cyp2c9::k1_1: break;
    case Cyp2c9::k1_2: s += c.cyp2c9_12; break;
    case Cyp2c9::k1_3: s += c.cyp2c9_13; break;
    case Cyp2c9::k2_2: s += c.cyp2c9_22; break;
    case Cyp2c9::k2_3: s += c.cyp2c9_23; break;
    case Cyp2c9::k3_3: s += c.cyp2c9_33; break;
  }
  switch (p.race) {
    case Race::kWhite: break;
    case Race::kBlack: s += c.black; break;
    case Race::kAsian: s += c.asian; break;
    case Race::kAmericanIndianAlaskan:
    case Race::kPacificIslander: s += c.missing_or_mixed_race; break;
  }
  // No enzyme-inducer comedication in the simulated cohort; the coefficient
  // is kept for completeness.
  if (p.amiodarone) s += c.amiodarone;
  double weekly = s * s;
  return std::clamp(weekly / 7.0, 0.0, kMaxDailyDoseMg);
}

DoseDecision iwpc_initial_decision(const Patient& p, const IwpcCoefficients& coef,
                                   int duration_days) {
  DoseDecision d;
  d.dose_mg = iwpc_daily_dose(p, coef);
  d.duration_days = duration_days;
  return d;
}

LenziniCoefficients LenziniCoefficients::load(const std::filesystem::path& path) {
  detail::KvFile kv = detail::KvFile::load(path);
  LenziniCoefficients c;
  c.intercept = kv.get_double("intercept");
  c.age_year = kv.get_double("age_year");
  c.ln_inr = kv.get_double("ln_inr");
  c.vkorc1_a_allele = kv.get_double("vkorc1_a_allele");
  c.cyp2c9_star2_allele = kv.get_double("cyp2c9_star2_allele");
  c.cyp2c9_star3_allele = kv.get_double("cyp2c9_star3_allele");
  c.bsa_m2 = kv.get_double("bsa_m2");
  c.target_inr = kv.get_double("target_inr");
  c.black = kv.get_double("black");
  c.fluvastatin = kv.get_double("fluvastatin");
  c.amiodarone = kv.get_double("amiodarone");
  c.dose_minus_2 = kv.get_double("dose_minus_2");
  c.dose_minus_3 = kv.get_double("dose_minus_3");
  c.dose_minus_4 = kv.get_double("dose_minus_4");
  return c;
}

double lenzini_daily_dose(const Patient& p, double measured_inr, double target_inr,
                          const std::vector<double>& recent_doses,
                          const LenziniCoefficients& c) {
  if (!(measured_inr > 0)) throw DomainError("lenzini_daily_dose: INR must be positive");
  if (recent_doses.size() < 3)
    throw DomainError("lenzini_daily_dose: needs doses for days -2, -3, -4");
  double s = c.intercept;
  s += c.age_year * p.age_years;
  s += c.ln_inr * std::log(measured_inr);
  s += c.vkorc1_a_allele * p.vkorc1_a_alleles();
  s += c.cyp2c9_star2_allele * p.cyp2c9_star2_alleles();
  s += c.cyp2c9_star3_allele * p.cyp2c9_star3_alleles();
  s += c.bsa_m2 * p.bsa_m2();
  s += c.target_inr * target_inr;
  if (p.race == Race::kBlack) s += c.black;
  if (p.fluvastatin) s += c.fluvastatin;
  if (p.amiodarone) s += c.amiodarone;
  s += c.dose_minus_2 * recent_doses[0];
  s += c.dose_minus_3 * recent_doses[1];
  s += c.dose_minus_4 * recent_doses[2];
  double weekly = std::exp(s);
  return std::clamp(weekly / 7.0, 0.0, kMaxDailyDoseMg);
}

TableMaintenancePolicy::TableMaintenancePolicy(ProtocolTable table, int duration_days,
                                               bool lenzini_first_revision,
                                               LenziniCoefficients lenzini, double target_inr)
    : table_(std::move(table)),
      duration_days_(duration_days),
      lenzini_first_revision_(lenzini_first_revision),
      lenzini_(lenzini),
      target_inr_(target_inr) {}

void TableMaintenancePolicy::reset() {
  first_decision_done_ = false;
  daily_doses_.clear();
}

void TableMaintenancePolicy::observe_history(const std::vector<double>& daily_doses) {
  daily_doses_ = daily_doses;
}

DoseDecision TableMaintenancePolicy::decide(const Observation& obs, const Patient& p, int day) {
  if (lenzini_first_revision_ && !first_decision_done_) {
    first_decision_done_ = true;
    // Administered doses on days (day-2, day-3, day-4); day d sits at index
    // d-1 of the history.
    if (day >= 5 && static_cast<int>(daily_doses_.size()) >= day - 2) {
      std::vector<double> recent = {daily_doses_[day - 3], daily_doses_[day - 4],
                                    daily_doses_[day - 5]};
      DoseDecision d;
      d.dose_mg = lenzini_daily_dose(p, obs.inr_current, target_inr_, recent, lenzini_);
      d.duration_days = duration_days_;
      return d;
    }
  }
  first_decision_done_ = true;
  return table_decide(table_, obs, duration_days_);
}

std::string TableMaintenancePolicy::name() const {
  return table_.name() + (lenzini_first_revision_ ? "+revision" : "");
}

std::unique_ptr<DosingPolicy> TableMaintenancePolicy::clone() const {
  return std::make_unique<TableMaintenancePolicy>(*this);
}

DoseDecision FixedMaintenancePolicy::decide(const Observation& obs, const Patient& p, int day) {
  (void)p;
  (void)day;
  return DoseDecision{obs.dose_previous_mg, duration_days_, OneTimeAction::kNone};
}

}  // namespace warfarin
