#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "warfarin/common.hpp"
#include "warfarin/pkpd.hpp"

using namespace warfarin;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  fs::path p = fs::temp_directory_path() / "warfarin-test-pkpd";
  fs::create_directories(p);
  return p;
}

fs::path shipped_params() { return fs::path(WARFARIN_DATA_DIR) / "pkpd_hamberg2007.params"; }

Patient typical_patient() {
  Patient p;
  p.id = 1;
  p.age_years = 71.0;
  p.weight_lb = 180.0;
  p.height_in = 67.0;
  p.cyp2c9 = Cyp2c9::k1_1;
  p.vkorc1 = Vkorc1::kGA;
  p.physiology.clearance_multiplier = 1.0;
  p.physiology.volume_multiplier = 1.0;
  p.physiology.ec50_multiplier = 1.0;
  p.physiology.baseline_inr = 1.0;
  return p;
}

// Copies the shipped parameter file with one line dropped or rewritten, to
// exercise the file loader's error paths.
fs::path perturbed_params(const std::string& key, const std::string& replacement,
                          const std::string& out_name) {
  std::ifstream in(shipped_params());
  REQUIRE(in.good());
  const fs::path out_path = scratch() / out_name;
  std::ofstream out(out_path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + " =", 0) == 0) {
      if (!replacement.empty()) out << replacement << "\n";
      continue;
    }
    out << line << "\n";
  }
  return out_path;
}

// Independent fixed-step Euler integration of the same dose-response model,
// restated from scratch: gut -> central -> inhibitory Emax on synthesis ->
// two transit chains -> power-law INR.
struct EulerSim {
  double cl, v, ec50;  // individualized
  const PkPdParams& params;
  const Patient& patient;

  double gut = 0.0, central = 0.0;
  std::vector<double> fast, slow;

  EulerSim(const Patient& p, const PkPdParams& prm)
      : params(prm), patient(p) {
    const double age_factor =
        std::max(1.0 - prm.age_clearance_slope_per_year * (p.age_years - prm.age_reference_years),
                 0.05);
    cl = prm.clearance_by_cyp2c9[static_cast<int>(p.cyp2c9)] * age_factor *
         p.physiology.clearance_multiplier;
    v = prm.volume_l * p.physiology.volume_multiplier;
    ec50 = prm.ec50_by_vkorc1[static_cast<int>(p.vkorc1)] * p.physiology.ec50_multiplier;
    fast.assign(params.transit_count_fast, 1.0);
    slow.assign(params.transit_count_slow, 1.0);
  }

  double effect() const {
    const double c = std::max(central / v, 0.0);
    if (c <= 0.0) return 0.0;
    const double cg = std::pow(c, params.hill_gamma);
    return params.emax * cg / (cg + std::pow(ec50, params.hill_gamma));
  }

  void advance_day(double dose_mg, double dt_hours) {
    gut += params.bioavailability * dose_mg;
    const int steps = static_cast<int>(std::lround(24.0 / dt_hours));
    const double kf = params.transit_count_fast / params.transit_mtt_fast_h;
    const double ks = params.transit_count_slow / params.transit_mtt_slow_h;
    for (int s = 0; s < steps; ++s) {
      const double inflow = 1.0 - effect();
      const double d_gut = -params.absorption_rate_per_h * gut;
      const double d_central = params.absorption_rate_per_h * gut - (cl / v) * central;
      std::vector<double> d_fast(fast.size()), d_slow(slow.size());
      d_fast[0] = kf * (inflow - fast[0]);
      for (std::size_t i = 1; i < fast.size(); ++i) d_fast[i] = kf * (fast[i - 1] - fast[i]);
      d_slow[0] = ks * (inflow - slow[0]);
      for (std::size_t i = 1; i < slow.size(); ++i) d_slow[i] = ks * (slow[i - 1] - slow[i]);
      gut += dt_hours * d_gut;
      central += dt_hours * d_central;
      for (std::size_t i = 0; i < fast.size(); ++i) fast[i] += dt_hours * d_fast[i];
      for (std::size_t i = 0; i < slow.size(); ++i) slow[i] += dt_hours * d_slow[i];
    }
  }

  double inr() const {
    const double activity = 0.5 * (fast.back() + slow.back());
    const double depletion = std::clamp(1.0 - activity, 0.0, 1.0);
    return patient.physiology.baseline_inr + params.inr_max * std::pow(depletion, params.inr_exponent);
  }
};

}  // namespace

TEST_CASE("parameter file round trips exactly and matches the built-in defaults") {
  PkPdParams shipped = PkPdParams::load(shipped_params());
  PkPdParams dflt;
  CHECK(shipped.absorption_rate_per_h == dflt.absorption_rate_per_h);
  CHECK(shipped.bioavailability == dflt.bioavailability);
  CHECK(shipped.volume_l == dflt.volume_l);
  for (int i = 0; i < kCyp2c9Count; ++i)
    CHECK(shipped.clearance_by_cyp2c9[i] == dflt.clearance_by_cyp2c9[i]);
  for (int i = 0; i < kVkorc1Count; ++i)
    CHECK(shipped.ec50_by_vkorc1[i] == dflt.ec50_by_vkorc1[i]);
  CHECK(shipped.hill_gamma == dflt.hill_gamma);
  CHECK(shipped.transit_count_fast == dflt.transit_count_fast);
  CHECK(shipped.transit_mtt_fast_h == dflt.transit_mtt_fast_h);
  CHECK(shipped.transit_count_slow == dflt.transit_count_slow);
  CHECK(shipped.transit_mtt_slow_h == dflt.transit_mtt_slow_h);
  CHECK(shipped.inr_max == dflt.inr_max);
  CHECK(shipped.inr_exponent == dflt.inr_exponent);
  CHECK(shipped.measurement_noise_sd == dflt.measurement_noise_sd);
  CHECK(shipped.step_hours == dflt.step_hours);
  CHECK(shipped.physiology.clearance_sd == dflt.physiology.clearance_sd);
  CHECK(shipped.physiology.baseline_inr_max == dflt.physiology.baseline_inr_max);

  const fs::path copy = scratch() / "roundtrip.params";
  shipped.save(copy);
  PkPdParams again = PkPdParams::load(copy);
  CHECK(again.clearance_by_cyp2c9[5] == shipped.clearance_by_cyp2c9[5]);
  CHECK(again.ec50_by_vkorc1[2] == shipped.ec50_by_vkorc1[2]);
  CHECK(again.hill_gamma == shipped.hill_gamma);
  CHECK(again.physiology.baseline_inr_sd == shipped.physiology.baseline_inr_sd);
}

TEST_CASE("parameter file loader reports malformed input") {
  // A line without '=' is malformed.
  {
    const fs::path p = scratch() / "malformed.params";
    std::ofstream out(p);
    out << "version = 1\ngarbage line\n";
    out.close();
    try {
      PkPdParams::load(p);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("malformed line") != std::string::npos);
    }
  }
  // Dropping a key is detected by name.
  {
    const fs::path p = perturbed_params("hill_gamma", "", "missing.params");
    try {
      PkPdParams::load(p);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("missing key: hill_gamma") != std::string::npos);
    }
  }
  // Non-numeric values are rejected with the key name.
  {
    const fs::path p = perturbed_params("hill_gamma", "hill_gamma = shallow", "notnum.params");
    try {
      PkPdParams::load(p);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("hill_gamma") != std::string::npos);
      CHECK(std::string(e.what()).find("not a number") != std::string::npos);
    }
  }
}

TEST_CASE("validate rejects out-of-range parameters") {
  PkPdParams p;
  CHECK_NOTHROW(p.validate());

  PkPdParams bad = p;
  bad.step_hours = 5.0;  // 24/5 is not an integer
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.step_hours = 0.75;  // 24/0.75 = 32: fine
  CHECK_NOTHROW(bad.validate());
  bad = p;
  bad.volume_l = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.emax = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.transit_count_fast = 17;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.measurement_noise_sd = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.physiology.baseline_inr_min = 1.2;
  bad.physiology.baseline_inr_max = 0.9;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("individualize applies genotype, age and multipliers") {
  PkPdParams params;
  Patient p = typical_patient();
  p.age_years = 61.0;
  p.cyp2c9 = Cyp2c9::k1_3;
  p.vkorc1 = Vkorc1::kAA;
  p.physiology.clearance_multiplier = 1.3;
  p.physiology.volume_multiplier = 0.8;
  p.physiology.ec50_multiplier = 1.1;

  PatientPk pk = individualize(p, params);
  const double age_factor = 1.0 - 0.0057 * (61.0 - 71.0);
  CHECK(pk.clearance_l_per_h == doctest::Approx(0.190 * age_factor * 1.3).epsilon(1e-12));
  CHECK(pk.volume_l == doctest::Approx(13.8 * 0.8).epsilon(1e-12));
  CHECK(pk.ec50_mg_per_l == doctest::Approx(0.29 * 1.1).epsilon(1e-12));

  // Extreme age cannot push clearance below the 5% floor.
  Patient old = typical_patient();
  old.age_years = 100.0;
  PkPdParams slow = params;
  slow.age_clearance_slope_per_year = 0.2;
  PatientPk pk_old = individualize(old, slow);
  CHECK(pk_old.clearance_l_per_h == doctest::Approx(0.314 * 0.05).epsilon(1e-12));
}

TEST_CASE("initial state is drug-free and genotype independent") {
  PkPdParams params;
  Patient a = typical_patient();
  Patient b = typical_patient();
  b.cyp2c9 = Cyp2c9::k3_3;
  b.vkorc1 = Vkorc1::kAA;
  PkPdState sa = init_state(a, params);
  PkPdState sb = init_state(b, params);
  CHECK(sa.gut_mg == 0.0);
  CHECK(sa.central_mg == 0.0);
  REQUIRE(static_cast<int>(sa.fast_chain.size()) == params.transit_count_fast);
  REQUIRE(static_cast<int>(sa.slow_chain.size()) == params.transit_count_slow);
  for (double x : sa.fast_chain) CHECK(x == 1.0);
  for (double x : sa.slow_chain) CHECK(x == 1.0);
  CHECK(sa.fast_chain == sb.fast_chain);
  CHECK(sa.central_mg == sb.central_mg);
}

TEST_CASE("ninety days without drug keeps INR at baseline") {
  PkPdParams params;
  params.measurement_noise_sd = 0.0;
  Patient p = typical_patient();
  p.physiology.baseline_inr = 1.05;
  PkPdState state = init_state(p, params);
  RandomStream rng(1);
  InrSeries s = advance(state, p, params, 0.0, 90, rng);
  REQUIRE(static_cast<int>(s.true_inr.size()) == 90);
  for (double inr : s.true_inr) {
    CHECK(inr >= 0.8);
    CHECK(inr <= 1.2);
    CHECK(inr == doctest::Approx(1.05).epsilon(1e-12));
  }
}

TEST_CASE("zero noise consumes no randomness and reports measured == true") {
  PkPdParams params;
  params.measurement_noise_sd = 0.0;
  Patient p = typical_patient();
  PkPdState state = init_state(p, params);
  RandomStream used(42), twin(42);
  InrSeries s = advance(state, p, params, 5.0, 10, used);
  for (int k = 0; k < 10; ++k) CHECK(s.measured_inr[k] == s.true_inr[k]);
  // The stream was never touched: it still agrees with an untouched twin.
  CHECK(used.uniform() == twin.uniform());
}

TEST_CASE("assay noise is a lognormal factor drawn once per day") {
  PkPdParams params;  // shipped noise sd 0.10
  Patient p = typical_patient();
  PkPdState state = init_state(p, params);
  RandomStream used(42), twin(42);
  InrSeries s = advance(state, p, params, 5.0, 10, used);
  for (int k = 0; k < 10; ++k)
    CHECK(s.measured_inr[k] == s.true_inr[k] * twin.lognormal(0.0, params.measurement_noise_sd));
}

TEST_CASE("advance validates its inputs") {
  PkPdParams params;
  Patient p = typical_patient();
  PkPdState state = init_state(p, params);
  RandomStream rng(1);
  CHECK_THROWS_AS(advance(state, p, params, 5.0, -1, rng), DomainError);
  CHECK_THROWS_AS(advance(state, p, params, -2.0, 5, rng), DomainError);
  CHECK_THROWS_AS(advance(state, p, params, std::nan(""), 5, rng), DomainError);
  PkPdState mismatched;  // empty transit chains do not match the params
  CHECK_THROWS_AS(advance(mismatched, p, params, 5.0, 5, rng), DomainError);
}

TEST_CASE("single-day dose overrides replace the first days only") {
  PkPdParams params;
  params.measurement_noise_sd = 0.0;
  Patient p = typical_patient();
  RandomStream rng(1);

  PkPdState plain = init_state(p, params);
  InrSeries s_plain = advance(plain, p, params, 5.0, 6, rng);

  PkPdState skipped = init_state(p, params);
  std::vector<double> first_day_zero = {0.0};
  InrSeries s_skip = advance(skipped, p, params, 5.0, 6, rng, &first_day_zero);

  // Missing the day-1 dose keeps day 1 at baseline and lowers the INR on
  // the following days relative to uninterrupted dosing.
  CHECK(s_skip.true_inr[0] == doctest::Approx(p.physiology.baseline_inr).epsilon(1e-9));
  CHECK(s_skip.true_inr[2] < s_plain.true_inr[2]);
  CHECK(s_skip.true_inr[5] < s_plain.true_inr[5]);
}

TEST_CASE("steady-state INR matches the restated closed form and rises with dose") {
  PkPdParams params;
  Patient p = typical_patient();
  p.age_years = 66.0;
  p.cyp2c9 = Cyp2c9::k1_2;
  p.vkorc1 = Vkorc1::kGG;
  p.physiology.clearance_multiplier = 0.9;
  p.physiology.ec50_multiplier = 1.2;
  p.physiology.baseline_inr = 0.98;

  const PatientPk pk = individualize(p, params);
  const double dose = 6.0;
  const double css = params.bioavailability * dose / (24.0 * pk.clearance_l_per_h);
  const double cg = std::pow(css, params.hill_gamma);
  const double effect = params.emax * cg / (cg + std::pow(pk.ec50_mg_per_l, params.hill_gamma));
  const double oracle =
      p.physiology.baseline_inr + params.inr_max * std::pow(effect, params.inr_exponent);
  CHECK(steady_state_inr(p, params, dose) == doctest::Approx(oracle).epsilon(1e-12));

  CHECK(steady_state_inr(p, params, 0.0) == doctest::Approx(p.physiology.baseline_inr).epsilon(1e-12));
  double last = -1.0;
  for (double d : {0.0, 1.0, 2.0, 4.0, 6.0, 9.0, 12.0}) {
    double inr = steady_state_inr(p, params, d);
    CHECK(inr > last);
    last = inr;
  }
  CHECK_THROWS_AS(steady_state_inr(p, params, -1.0), DomainError);
}

TEST_CASE("simulated INR grows with dose and with genotype sensitivity") {
  PkPdParams params;
  params.measurement_noise_sd = 0.0;
  Patient p = typical_patient();
  RandomStream rng(1);

  double prev = -1.0;
  for (double dose : {2.0, 4.0, 6.0, 8.0}) {
    PkPdState state = init_state(p, params);
    InrSeries s = advance(state, p, params, dose, 60, rng);
    CHECK(s.true_inr.back() > prev);
    prev = s.true_inr.back();
  }

  Patient normal = typical_patient();
  normal.cyp2c9 = Cyp2c9::k1_1;
  normal.vkorc1 = Vkorc1::kGG;
  Patient sensitive = typical_patient();
  sensitive.cyp2c9 = Cyp2c9::k3_3;
  sensitive.vkorc1 = Vkorc1::kAA;
  PkPdState sn = init_state(normal, params);
  PkPdState ss = init_state(sensitive, params);
  InrSeries rn = advance(sn, normal, params, 4.0, 30, rng);
  InrSeries rs = advance(ss, sensitive, params, 4.0, 30, rng);
  CHECK(rs.true_inr.back() > rn.true_inr.back());
}

TEST_CASE("halving the integrator step moves daily INR by less than half a percent") {
  PkPdParams full;
  full.measurement_noise_sd = 0.0;
  full.step_hours = 1.0;
  PkPdParams half = full;
  half.step_hours = 0.5;
  Patient p = typical_patient();
  RandomStream rng(1);

  PkPdState s1 = init_state(p, full);
  PkPdState s2 = init_state(p, half);
  InrSeries r1 = advance(s1, p, full, 5.0, 90, rng);
  InrSeries r2 = advance(s2, p, half, 5.0, 90, rng);
  double worst = 0.0;
  for (int k = 0; k < 90; ++k)
    worst = std::max(worst, std::abs(r1.true_inr[k] - r2.true_inr[k]) / r2.true_inr[k]);
  CHECK(worst < 0.005);
}

TEST_CASE("an independent Euler integration reproduces the trajectory") {
  PkPdParams params;
  params.measurement_noise_sd = 0.0;
  Patient p = typical_patient();
  p.age_years = 64.0;
  p.cyp2c9 = Cyp2c9::k1_2;
  p.vkorc1 = Vkorc1::kGA;
  p.physiology.clearance_multiplier = 1.1;
  p.physiology.volume_multiplier = 0.95;
  p.physiology.ec50_multiplier = 0.9;
  p.physiology.baseline_inr = 1.02;

  PkPdState state = init_state(p, params);
  RandomStream rng(1);
  InrSeries sim = advance(state, p, params, 7.5, 10, rng);

  EulerSim euler(p, params);
  for (int day = 0; day < 10; ++day) {
    euler.advance_day(7.5, 0.005);
    CHECK(euler.inr() == doctest::Approx(sim.true_inr[day]).epsilon(0.005));
  }
}

TEST_CASE("long-run simulation approaches the closed-form steady state") {
  PkPdParams params;
  params.measurement_noise_sd = 0.0;
  Patient p = typical_patient();
  p.vkorc1 = Vkorc1::kGG;
  RandomStream rng(1);
  PkPdState state = init_state(p, params);
  InrSeries s = advance(state, p, params, 5.0, 240, rng);
  const double predicted = steady_state_inr(p, params, 5.0);
  CHECK(s.true_inr.back() == doctest::Approx(predicted).epsilon(0.08));
}
