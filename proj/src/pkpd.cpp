#include "warfarin/pkpd.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "warfarin/detail/kvfile.hpp"

namespace warfarin::detail {

std::string trim_ws(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

KvFile KvFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str(), path.string());
}

KvFile KvFile::from_string(const std::string& text, const std::string& origin) {
  KvFile kv;
  kv.origin_ = origin;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    line = trim_ws(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ": malformed line: " + line);
    std::string key = trim_ws(line.substr(0, eq));
    std::string val = trim_ws(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ": empty key in line: " + line);
    kv.entries_[key] = val;
  }
  return kv;
}

bool KvFile::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KvFile::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(origin_ + ": missing key: " + key);
  return it->second;
}

double KvFile::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key " + key + " is not a number: " + v);
  }
}

double KvFile::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int KvFile::get_int(const std::string& key) const {
  double d = get_double(key);
  int i = static_cast<int>(d);
  if (static_cast<double>(i) != d)
    throw ConfigError(origin_ + ": key " + key + " is not an integer");
  return i;
}

}  // namespace warfarin::detail

namespace warfarin {

namespace {

constexpr int kMaxTransit = 16;

// Flattened ODE right-hand side over y = [gut, central, fast..., slow...].
struct OdeSystem {
  double ka, ke, inv_v, emax, gamma, ec50_pow_gamma, ec50;
  double k_fast, k_slow;
  int n_fast, n_slow;

  int dim() const { return 2 + n_fast + n_slow; }

  void rhs(const double* y, double* dy) const {
    dy[0] = -ka * y[0];
    dy[1] = ka * y[0] - ke * y[1];
    double c = y[1] * inv_v;
    if (c < 0) c = 0;
    double effect;
    if (gamma == 1.0) {
      effect = c > 0 ? emax * c / (c + ec50) : 0.0;
    } else {
      double cg = c > 0 ? std::pow(c, gamma) : 0.0;
      effect = cg > 0 ? emax * cg / (cg + ec50_pow_gamma) : 0.0;
    }
    double inflow = 1.0 - effect;
    const double* f = y + 2;
    double* df = dy + 2;
    df[0] = k_fast * (inflow - f[0]);
    for (int i = 1; i < n_fast; ++i) df[i] = k_fast * (f[i - 1] - f[i]);
    const double* s = y + 2 + n_fast;
    double* ds = dy + 2 + n_fast;
    ds[0] = k_slow * (inflow - s[0]);
    for (int i = 1; i < n_slow; ++i) ds[i] = k_slow * (s[i - 1] - s[i]);
  }
};

OdeSystem make_system(const Patient& p, const PkPdParams& params) {
  PatientPk pk = individualize(p, params);
  OdeSystem sys;
  sys.ka = params.absorption_rate_per_h;
  sys.ke = pk.clearance_l_per_h / pk.volume_l;
  sys.inv_v = 1.0 / pk.volume_l;
  sys.emax = params.emax;
  sys.gamma = params.hill_gamma;
  sys.ec50 = pk.ec50_mg_per_l;
  sys.ec50_pow_gamma = std::pow(pk.ec50_mg_per_l, params.hill_gamma);
  sys.k_fast = params.transit_count_fast / params.transit_mtt_fast_h;
  sys.k_slow = params.transit_count_slow / params.transit_mtt_slow_h;
  sys.n_fast = params.transit_count_fast;
  sys.n_slow = params.transit_count_slow;
  return sys;
}

void rk4_step(const OdeSystem& sys, double h, double* y) {
  constexpr int kMaxDim = 2 + 2 * kMaxTransit;
  std::array<double, kMaxDim> k1, k2, k3, k4, tmp;
  const int n = sys.dim();
  sys.rhs(y, k1.data());
  for (int i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  sys.rhs(tmp.data(), k2.data());
  for (int i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  sys.rhs(tmp.data(), k3.data());
  for (int i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
  sys.rhs(tmp.data(), k4.data());
  for (int i = 0; i < n; ++i)
    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

double activity(const PkPdState& state) {
  return 0.5 * (state.fast_chain.back() + state.slow_chain.back());
}

}  // namespace

void PkPdParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v))
      throw ConfigError(std::string("pkpd params: ") + name + " must be positive");
  };
  positive(absorption_rate_per_h, "absorption_rate_per_h");
  positive(bioavailability, "bioavailability");
  positive(volume_l, "volume_l");
  for (double cl : clearance_by_cyp2c9) positive(cl, "clearance_by_cyp2c9");
  for (double e : ec50_by_vkorc1) positive(e, "ec50_by_vkorc1");
  positive(emax, "emax");
  if (emax > 1.0) throw ConfigError("pkpd params: emax must be <= 1");
  positive(hill_gamma, "hill_gamma");
  if (transit_count_fast < 1 || transit_count_fast > kMaxTransit ||
      transit_count_slow < 1 || transit_count_slow > kMaxTransit)
    throw ConfigError("pkpd params: transit counts must be in [1, 16]");
  positive(transit_mtt_fast_h, "transit_mtt_fast_h");
  positive(transit_mtt_slow_h, "transit_mtt_slow_h");
  positive(inr_max, "inr_max");
  positive(inr_exponent, "inr_exponent");
  if (measurement_noise_sd < 0) throw ConfigError("pkpd params: measurement_noise_sd must be >= 0");
  positive(step_hours, "step_hours");
  double steps = 24.0 / step_hours;
  if (std::abs(steps - std::round(steps)) > 1e-9)
    throw ConfigError("pkpd params: step_hours must divide 24");
  if (age_reference_years <= 0) throw ConfigError("pkpd params: age_reference_years must be positive");
  if (physiology.clearance_sd < 0 || physiology.volume_sd < 0 || physiology.ec50_sd < 0 ||
      physiology.baseline_inr_sd < 0)
    throw ConfigError("pkpd params: physiology sds must be >= 0");
  if (physiology.baseline_inr_min > physiology.baseline_inr_max)
    throw ConfigError("pkpd params: baseline INR bounds inverted");
}

PatientPk individualize(const Patient& p, const PkPdParams& params) {
  PatientPk pk;
  double age_factor =
      1.0 - params.age_clearance_slope_per_year * (p.age_years - params.age_reference_years);
  age_factor = std::max(age_factor, 0.05);
  pk.clearance_l_per_h = params.clearance_by_cyp2c9[static_cast<int>(p.cyp2c9)] * age_factor *
                         p.physiology.clearance_multiplier;
  pk.volume_l = params.volume_l * p.physiology.volume_multiplier;
  pk.ec50_mg_per_l =
      params.ec50_by_vkorc1[static_cast<int>(p.vkorc1)] * p.physiology.ec50_multiplier;
  return pk;
}

PkPdState init_state(const Patient& p, const PkPdParams& params) {
  (void)p;
  PkPdState s;
  s.fast_chain.assign(params.transit_count_fast, 1.0);
  s.slow_chain.assign(params.transit_count_slow, 1.0);
  return s;
}

double inr_now(const PkPdState& state, const Patient& p, const PkPdParams& params) {
  double residual = std::clamp(1.0 - activity(state), 0.0, 1.0);
  return p.physiology.baseline_inr + params.inr_max * std::pow(residual, params.inr_exponent);
}

InrSeries advance(PkPdState& state, const Patient& p, const PkPdParams& params,
                  double daily_dose_mg, int days, RandomStream& measurement,
                  const std::vector<double>* day_doses) {
  if (days < 0) throw DomainError("advance: negative day count");
  if (static_cast<int>(state.fast_chain.size()) != params.transit_count_fast ||
      static_cast<int>(state.slow_chain.size()) != params.transit_count_slow)
    throw DomainError("advance: state does not match params transit layout");
  OdeSystem sys = make_system(p, params);
  const int steps_per_day = static_cast<int>(std::round(24.0 / params.step_hours));
  const double h = params.step_hours;

  std::array<double, 2 + 2 * kMaxTransit> y;
  y[0] = state.gut_mg;
  y[1] = state.central_mg;
  for (int i = 0; i < sys.n_fast; ++i) y[2 + i] = state.fast_chain[i];
  for (int i = 0; i < sys.n_slow; ++i) y[2 + sys.n_fast + i] = state.slow_chain[i];

  InrSeries series;
  series.true_inr.reserve(days);
  series.measured_inr.reserve(days);
  for (int d = 0; d < days; ++d) {
    double dose = daily_dose_mg;
    if (day_doses && d < static_cast<int>(day_doses->size())) dose = (*day_doses)[d];
    if (!std::isfinite(dose) || dose < 0)
      throw DomainError("advance: daily dose must be finite and non-negative");
    y[0] += params.bioavailability * dose;
    for (int s = 0; s < steps_per_day; ++s) rk4_step(sys, h, y.data());
    for (int i = 0; i < sys.dim(); ++i)
      if (y[i] < 0 && y[i] > -1e-9) y[i] = 0.0;

    state.gut_mg = y[0];
    state.central_mg = y[1];
    for (int i = 0; i < sys.n_fast; ++i) state.fast_chain[i] = y[2 + i];
    for (int i = 0; i < sys.n_slow; ++i) state.slow_chain[i] = y[2 + sys.n_fast + i];
    state.clock_hours += 24.0;

    double t = inr_now(state, p, params);
    series.true_inr.push_back(t);
    double m = t;
    if (params.measurement_noise_sd > 0)
      m = t * measurement.lognormal(0.0, params.measurement_noise_sd);
    series.measured_inr.push_back(m);
  }
  return series;
}

double steady_state_inr(const Patient& p, const PkPdParams& params, double daily_dose_mg) {
  if (daily_dose_mg < 0) throw DomainError("steady_state_inr: dose must be non-negative");
  PatientPk pk = individualize(p, params);
  double css = params.bioavailability * daily_dose_mg / (24.0 * pk.clearance_l_per_h);
  double effect = 0.0;
  if (css > 0) {
    double cg = std::pow(css, params.hill_gamma);
    effect = params.emax * cg / (cg + std::pow(pk.ec50_mg_per_l, params.hill_gamma));
  }
  return p.physiology.baseline_inr + params.inr_max * std::pow(effect, params.inr_exponent);
}

PkPdParams PkPdParams::load(const std::filesystem::path& path) {
  detail::KvFile kv = detail::KvFile::load(path);
  PkPdParams p;
  p.version = kv.get_int("version");
  p.absorption_rate_per_h = kv.get_double("absorption_rate_per_h");
  p.bioavailability = kv.get_double("bioavailability");
  p.volume_l = kv.get_double("volume_l");
  p.clearance_by_cyp2c9[0] = kv.get_double("clearance_cyp2c9_star1_star1");
  p.clearance_by_cyp2c9[1] = kv.get_double("clearance_cyp2c9_star1_star2");
  p.clearance_by_cyp2c9[2] = kv.get_double("clearance_cyp2c9_star1_star3");
  p.clearance_by_cyp2c9[3] = kv.get_double("clearance_cyp2c9_star2_star2");
  p.clearance_by_cyp2c9[4] = kv.get_double("clearance_cyp2c9_star2_star3");
  p.clearance_by_cyp2c9[5] = kv.get_double("clearance_cyp2c9_star3_star3");
  p.age_clearance_slope_per_year = kv.get_double("age_clearance_slope_per_year");
  p.age_reference_years = kv.get_double("age_reference_years");
  p.ec50_by_vkorc1[0] = kv.get_double("ec50_vkorc1_gg");
  p.ec50_by_vkorc1[1] = kv.get_double("ec50_vkorc1_ga");
  p.ec50_by_vkorc1[2] = kv.get_double("ec50_vkorc1_aa");
  p.emax = kv.get_double("emax");
  p.hill_gamma = kv.get_double("hill_gamma");
  p.transit_count_fast = kv.get_int("transit_count_fast");
  p.transit_mtt_fast_h = kv.get_double("transit_mtt_fast_h");
  p.transit_count_slow = kv.get_int("transit_count_slow");
  p.transit_mtt_slow_h = kv.get_double("transit_mtt_slow_h");
  p.inr_max = kv.get_double("inr_max");
  p.inr_exponent = kv.get_double("inr_exponent");
  p.measurement_noise_sd = kv.get_double("measurement_noise_sd");
  p.step_hours = kv.get_double("step_hours");
  p.physiology.clearance_sd = kv.get_double("iiv_clearance_sd");
  p.physiology.volume_sd = kv.get_double("iiv_volume_sd");
  p.physiology.ec50_sd = kv.get_double("iiv_ec50_sd");
  p.physiology.baseline_inr_mean = kv.get_double("baseline_inr_mean");
  p.physiology.baseline_inr_sd = kv.get_double("baseline_inr_sd");
  p.physiology.baseline_inr_min = kv.get_double("baseline_inr_min");
  p.physiology.baseline_inr_max = kv.get_double("baseline_inr_max");
  p.validate();
  return p;
}

void PkPdParams::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write pkpd params: " + path.string());
  char buf[64];
  auto d = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "version = " << version << "\n";
  out << "absorption_rate_per_h = " << d(absorption_rate_per_h) << "\n";
  out << "bioavailability = " << d(bioavailability) << "\n";
  out << "volume_l = " << d(volume_l) << "\n";
  const char* cyp_keys[] = {"clearance_cyp2c9_star1_star1", "clearance_cyp2c9_star1_star2",
                            "clearance_cyp2c9_star1_star3", "clearance_cyp2c9_star2_star2",
                            "clearance_cyp2c9_star2_star3", "clearance_cyp2c9_star3_star3"};
  for (int i = 0; i < kCyp2c9Count; ++i)
    out << cyp_keys[i] << " = " << d(clearance_by_cyp2c9[i]) << "\n";
  out << "age_clearance_slope_per_year = " << d(age_clearance_slope_per_year) << "\n";
  out << "age_reference_years = " << d(age_reference_years) << "\n";
  out << "ec50_vkorc1_gg = " << d(ec50_by_vkorc1[0]) << "\n";
  out << "ec50_vkorc1_ga = " << d(ec50_by_vkorc1[1]) << "\n";
  out << "ec50_vkorc1_aa = " << d(ec50_by_vkorc1[2]) << "\n";
  out << "emax = " << d(emax) << "\n";
  out << "hill_gamma = " << d(hill_gamma) << "\n";
  out << "transit_count_fast = " << transit_count_fast << "\n";
  out << "transit_mtt_fast_h = " << d(transit_mtt_fast_h) << "\n";
  out << "transit_count_slow = " << transit_count_slow << "\n";
  out << "transit_mtt_slow_h = " << d(transit_mtt_slow_h) << "\n";
  out << "inr_max = " << d(inr_max) << "\n";
  out << "inr_exponent = " << d(inr_exponent) << "\n";
  out << "measurement_noise_sd = " << d(measurement_noise_sd) << "\n";
  out << "step_hours = " << d(step_hours) << "\n";
  out << "iiv_clearance_sd = " << d(physiology.clearance_sd) << "\n";
  out << "iiv_volume_sd = " << d(physiology.volume_sd) << "\n";
  out << "iiv_ec50_sd = " << d(physiology.ec50_sd) << "\n";
  out << "baseline_inr_mean = " << d(physiology.baseline_inr_mean) << "\n";
  out << "baseline_inr_sd = " << d(physiology.baseline_inr_sd) << "\n";
  out << "baseline_inr_min = " << d(physiology.baseline_inr_min) << "\n";
  out << "baseline_inr_max = " << d(physiology.baseline_inr_max) << "\n";
}

}  // namespace warfarin
