#include "warfarin/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace warfarin::experiment {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<int> parse_dims(const std::string& csv, const std::string& what) {
  std::vector<int> dims;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      int v = std::stoi(tok, &pos);
      while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
      if (pos != tok.size() || v < 1) throw std::invalid_argument(tok);
      dims.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(what + ": bad layer width '" + tok + "' in '" + csv + "'");
    }
  }
  if (dims.empty()) throw ConfigError(what + ": no layer widths in '" + csv + "'");
  return dims;
}

// Follow a [paths] entry when present; otherwise the in-code defaults stand.
template <typename T, typename Loader>
T load_or_default(const Config& cfg, const char* key, Loader&& loader, T fallback) {
  if (cfg.has("paths", key))
    return loader(cfg.resolve_path(cfg.get_string("paths", key)));
  return fallback;
}

}  // namespace

PkPdParams pkpd_params(const Config& cfg) {
  PkPdParams p = load_or_default<PkPdParams>(
      cfg, "pkpd_params", [](const std::filesystem::path& f) { return PkPdParams::load(f); },
      PkPdParams{});
  p.validate();
  return p;
}

ActionSpace action_space(const Config& cfg) {
  return ActionSpace::uniform_grid(cfg.get_double_or("actions", "min_percent", -1.0),
                                   cfg.get_double_or("actions", "max_percent", 1.0),
                                   cfg.get_double_or("actions", "step", 0.1),
                                   cfg.get_int_or("actions", "duration_days", 7));
}

RewardConfig reward_config(const Config& cfg) {
  RewardConfig r;
  r.target_inr = cfg.get_double_or("reward", "target_inr", r.target_inr);
  r.scale = cfg.get_double_or("reward", "scale", r.scale);
  r.eta = cfg.get_double_or("reward", "eta", r.eta);
  r.clip_min = cfg.get_double_or("reward", "clip_min", r.clip_min);
  if (r.scale < 0) throw ConfigError("reward: scale must be >= 0");
  if (r.eta <= 0) throw ConfigError("reward: eta must be > 0");
  return r;
}

TrialConfig trial_config(const Config& cfg) {
  TrialConfig t;
  t.horizon_days = cfg.get_int_or("trial", "horizon_days", t.horizon_days);
  t.initiation_days = cfg.get_int_or("trial", "initiation_days", t.initiation_days);
  t.decision_interval = cfg.get_int_or("trial", "decision_interval_days", t.decision_interval);
  t.pttr_low = cfg.get_double_or("trial", "pttr_low", t.pttr_low);
  t.pttr_high = cfg.get_double_or("trial", "pttr_high", t.pttr_high);
  if (t.initiation_days < 1 || t.horizon_days <= t.initiation_days)
    throw ConfigError("trial: need horizon_days > initiation_days >= 1");
  if (t.decision_interval < 1) throw ConfigError("trial: decision_interval_days must be >= 1");
  if (!(t.pttr_low < t.pttr_high)) throw ConfigError("trial: pttr_low must be < pttr_high");
  return t;
}

PpoConfig ppo_config(const Config& cfg) {
  PpoConfig p;
  p.clip_ratio = cfg.get_double_or("ppo", "clip_ratio", p.clip_ratio);
  p.discount = cfg.get_double_or("ppo", "discount", p.discount);
  p.gae_lambda = cfg.get_double_or("ppo", "gae_lambda", p.gae_lambda);
  p.target_kl = cfg.get_double_or("ppo", "target_kl", p.target_kl);
  p.entropy_coef = cfg.get_double_or("ppo", "entropy_coef", p.entropy_coef);
  p.actor_iterations = cfg.get_int_or("ppo", "actor_iterations", p.actor_iterations);
  p.critic_iterations = cfg.get_int_or("ppo", "critic_iterations", p.critic_iterations);
  p.patients_per_pass = cfg.get_int_or("train", "patients_per_pass", p.patients_per_pass);
  p.warmup_patients = cfg.get_int_or("train", "warmup_patients",
                                     static_cast<int>(p.warmup_patients));
  p.patience_passes = cfg.get_int_or("train", "patience_passes", p.patience_passes);
  p.max_passes = cfg.get_int_or("train", "max_passes", p.max_passes);
  p.action_elimination_epsilon =
      cfg.get_double_or("train", "action_elimination_epsilon", p.action_elimination_epsilon);
  if (p.clip_ratio <= 0) throw ConfigError("ppo: clip_ratio must be > 0");
  if (p.actor_iterations < 1 || p.critic_iterations < 1)
    throw ConfigError("ppo: iteration counts must be >= 1");
  return p;
}

ForgingConfig forging_config(const Config& cfg) {
  ForgingConfig f;
  f.group_lasso_coef = cfg.get_double_or("forging", "group_lasso_coef", f.group_lasso_coef);
  f.focus_enabled = cfg.get_bool_or("forging", "focus_enabled", f.focus_enabled);
  f.focus_peak = cfg.get_double_or("forging", "focus_peak", f.focus_peak);
  f.focus_dip = cfg.get_double_or("forging", "focus_dip", f.focus_dip);
  f.focus_radius = cfg.get_double_or("forging", "focus_radius", f.focus_radius);
  f.schedule_rate = cfg.get_double_or("forging", "schedule_rate", f.schedule_rate);
  f.schedule_midpoint = cfg.get_double_or("forging", "schedule_midpoint", f.schedule_midpoint);
  if (f.group_lasso_coef < 0) throw ConfigError("forging: group_lasso_coef must be >= 0");
  if (f.focus_radius <= 0) throw ConfigError("forging: focus_radius must be > 0");
  return f;
}

ObsNormalization normalization(const Config& cfg) {
  ObsNormalization n;
  n.inr_scale = cfg.get_double_or("normalization", "inr_scale", n.inr_scale);
  n.dose_scale = cfg.get_double_or("normalization", "dose_scale", n.dose_scale);
  n.duration_scale = cfg.get_double_or("normalization", "duration_scale", n.duration_scale);
  return n;
}

SensitivityMap sensitivity_map(const Config& cfg) {
  return load_or_default<SensitivityMap>(
      cfg, "sensitivity_classes",
      [](const std::filesystem::path& f) { return SensitivityMap::load(f); },
      SensitivityMap::defaults());
}

IwpcCoefficients iwpc_coefficients(const Config& cfg) {
  return load_or_default<IwpcCoefficients>(
      cfg, "iwpc_coefficients",
      [](const std::filesystem::path& f) { return IwpcCoefficients::load(f); },
      IwpcCoefficients::defaults());
}

LenziniCoefficients lenzini_coefficients(const Config& cfg) {
  return load_or_default<LenziniCoefficients>(
      cfg, "lenzini_coefficients",
      [](const std::filesystem::path& f) { return LenziniCoefficients::load(f); },
      LenziniCoefficients::defaults());
}

CohortConfig eval_cohort_config(const Config& cfg) {
  CohortConfig c;
  c.size = cfg.get_int_or("cohort", "size", c.size);
  c.seed = cfg.get_u64_or("cohort", "seed", 20170101);
  c.rebalance_cyp2c9 = cfg.get_bool_or("cohort", "rebalance_cyp2c9", false);
  c.min_variant_prob = cfg.get_double_or("cohort", "min_variant_prob", c.min_variant_prob);
  if (c.size < 1) throw ConfigError("cohort: size must be >= 1");
  return c;
}

TrainSetup train_setup(const Config& cfg) {
  TrainSetup s;
  s.ppo = ppo_config(cfg);
  s.forging = forging_config(cfg);
  s.reward = reward_config(cfg);
  s.trial = trial_config(cfg);
  s.actions = action_space(cfg);
  s.normalization = normalization(cfg);
  s.pkpd = pkpd_params(cfg);
  s.iwpc = iwpc_coefficients(cfg);
  s.sampling.size = s.ppo.patients_per_pass;
  s.sampling.rebalance_cyp2c9 = cfg.get_bool_or("train", "rebalance_cyp2c9", true);
  s.sampling.min_variant_prob = cfg.get_double_or("train", "min_variant_prob", 0.1);
  s.actor_hidden = parse_dims(cfg.get_string_or("actor", "hidden", "256,256,128,64"), "actor");
  s.critic_hidden = parse_dims(cfg.get_string_or("critic", "hidden", "256,256,128,64"), "critic");
  s.actor_lr = {cfg.get_double_or("actor", "lr", 1e-4), cfg.get_double_or("actor", "lr_decay", 0.8),
                cfg.get_int_or("actor", "lr_step", 1000)};
  s.critic_lr = {cfg.get_double_or("critic", "lr", 1e-5),
                 cfg.get_double_or("critic", "lr_decay", 0.8),
                 cfg.get_int_or("critic", "lr_step", 1000)};
  s.seed = cfg.get_u64_or("train", "seed", cfg.get_u64_or("run", "seed", 12345));
  s.config_hash = cfg.hash();
  return s;
}

std::vector<Patient> make_eval_cohort(const Config& cfg) {
  return generate_cohort(eval_cohort_config(cfg), pkpd_params(cfg).physiology);
}

PolicyHandle make_policy(const Config& cfg, const std::string& spec) {
  const std::string s = lower(spec);
  const ActionSpace actions = action_space(cfg);
  const bool revision = cfg.get_bool_or("baselines", "lenzini_revision", true);
  const LenziniCoefficients lenzini = lenzini_coefficients(cfg);
  const double target = reward_config(cfg).target_inr;

  auto from_table = [&](ProtocolTable table, bool revise) {
    PolicyHandle h;
    h.possible_actions = static_cast<int>(table.rows().size());
    h.policy = std::make_unique<TableMaintenancePolicy>(std::move(table), actions.duration_days,
                                                        revise, lenzini, target);
    h.label = h.policy->name();
    return h;
  };

  if (s == "aurora" || s == "intermountain") {
    const char* key = s == "aurora" ? "aurora_table" : "intermountain_table";
    if (!cfg.has("paths", key))
      throw ConfigError("policy '" + spec + "' needs [paths] " + key + " in the config");
    return from_table(ProtocolTable::load(cfg.resolve_path(cfg.get_string("paths", key))),
                      revision);
  }
  if (s == "fixed") {
    PolicyHandle h;
    h.possible_actions = 1;
    h.policy = std::make_unique<FixedMaintenancePolicy>(actions.duration_days);
    h.label = h.policy->name();
    return h;
  }
  // table:/checkpoint: paths come from the command line, so unlike [paths]
  // entries they resolve against the working directory.
  if (s.rfind("table:", 0) == 0) {
    // Stand-alone tables (e.g. distilled policies) are evaluated without the
    // first-revisit revision so they are compared like the policy they mimic.
    return from_table(ProtocolTable::load(spec.substr(6)), false);
  }
  if (s.rfind("checkpoint:", 0) == 0) {
    auto ckpt = std::make_shared<PolicyCheckpoint>(load_checkpoint(spec.substr(11)));
    PolicyHandle h;
    const double eps = cfg.get_double_or("train", "action_elimination_epsilon", 1e-3);
    h.possible_actions = action_usage(ckpt->actor, ckpt->forging, ckpt->forging_delta,
                                      Eigen::MatrixXd(0, ckpt->actor.input_dim()), ckpt->actions,
                                      eps)
                             .available;
    h.policy = std::make_unique<NeuralDosingPolicy>(ckpt);
    h.label = h.policy->name();
    return h;
  }
  throw ConfigError("unknown policy spec '" + spec +
                    "' (expected aurora, intermountain, fixed, checkpoint:<path> or "
                    "table:<path>)");
}

GenerateOutcome run_generate(const Config& cfg, const std::filesystem::path& out_csv) {
  const CohortConfig ccfg = eval_cohort_config(cfg);
  std::vector<Patient> cohort = generate_cohort(ccfg, pkpd_params(cfg).physiology);
  if (out_csv.has_parent_path()) std::filesystem::create_directories(out_csv.parent_path());
  write_cohort_csv(out_csv, cohort, ccfg, cfg.hash());
  return {out_csv, static_cast<int>(cohort.size())};
}

TrainOutcome run_train(const Config& cfg, const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume,
                       const std::function<void(const TrainLogRow&)>& on_pass) {
  TrainSetup setup = train_setup(cfg);
  std::unique_ptr<PolicyCheckpoint> resumed;
  if (resume) {
    resumed = std::make_unique<PolicyCheckpoint>(load_checkpoint(*resume));
    setup.resume_from = resumed.get();
  }
  TrainOutcome out;
  out.result = train(setup, on_pass);
  std::filesystem::create_directories(out_dir);
  out.best_checkpoint = out_dir / "policy_best.ckpt";
  out.final_checkpoint = out_dir / "policy_final.ckpt";
  out.log_csv = out_dir / "train_log.csv";
  save_checkpoint(out.best_checkpoint, out.result.best);
  save_checkpoint(out.final_checkpoint, out.result.final_state);
  write_train_log_csv(out.log_csv, out.result.log);
  return out;
}

EvaluationReport run_evaluate(const Config& cfg, const std::string& policy_spec,
                              const EvaluateOptions& opts) {
  const CohortConfig ccfg = eval_cohort_config(cfg);
  const PkPdParams params = pkpd_params(cfg);
  const RewardConfig reward = reward_config(cfg);
  const TrialConfig trial = trial_config(cfg);
  const std::uint64_t eval_seed = cfg.get_u64_or("evaluate", "seed", 99);
  std::vector<Patient> cohort = generate_cohort(ccfg, params.physiology);
  PolicyHandle h = make_policy(cfg, policy_spec);
  EvaluationReport report =
      evaluate_policy(*h.policy, cohort, params, reward, trial, eval_seed, sensitivity_map(cfg),
                      h.possible_actions, opts.threads);
  report.config_hash = cfg.hash();
  report.cohort_seed = ccfg.seed;
  if (opts.plot_data) {
    if (opts.plot_data->has_parent_path())
      std::filesystem::create_directories(opts.plot_data->parent_path());
    write_plot_data_csv(*opts.plot_data, *h.policy, cohort, params, reward, trial, eval_seed,
                        opts.plot_patients, cfg.hash());
  }
  return report;
}

DistillOutcome run_distill(const Config& cfg, const std::filesystem::path& checkpoint_path,
                           const std::filesystem::path& out_dir) {
  const PolicyCheckpoint teacher = load_checkpoint(checkpoint_path);
  const PkPdParams params = pkpd_params(cfg);

  CohortConfig dcfg = eval_cohort_config(cfg);
  dcfg.size = cfg.get_int_or("distill", "cohort_size", dcfg.size);
  dcfg.seed = cfg.get_u64_or("distill", "cohort_seed", dcfg.seed + 1);
  const std::uint64_t dataset_seed = cfg.get_u64_or("distill", "seed", 4242);
  std::vector<Patient> cohort = generate_cohort(dcfg, params.physiology);

  DistillDataset data = collect_distill_dataset(teacher, cohort, params, reward_config(cfg),
                                                trial_config(cfg), dataset_seed);
  DecisionTree tree = DecisionTree::fit(data, cfg.get_int_or("distill", "max_depth", 4),
                                        cfg.get_int_or("distill", "min_samples_leaf", 50));
  ProtocolTable table = tree_to_table(tree, teacher.actions,
                                      cfg.get_string_or("distill", "table_name", "distilled"));

  DistillReport report;
  report.teacher_config_hash = teacher.config_hash;
  report.dataset_seed = dataset_seed;
  report.dataset_size = static_cast<int>(data.size());
  report.tree_leaves = tree.leaf_count();
  report.table_rows = static_cast<int>(table.rows().size());
  report.teacher_agreement = dataset_fidelity(table, data, teacher.actions);
  RandomStream probe(dataset_seed);
  RandomStream probe_child = probe.child("distill-probe");
  report.tree_table_agreement =
      table_tree_agreement(table, tree, teacher.actions,
                           cfg.get_int_or("distill", "agreement_points", 10000), probe_child);

  std::filesystem::create_directories(out_dir);
  DistillOutcome out;
  out.table_path = out_dir / "distilled_policy.table";
  out.card_path = out_dir / "distilled_policy.md";
  table.save(out.table_path);
  std::ofstream card(out.card_path);
  if (!card) throw DomainError("cannot write " + out.card_path.string());
  card << protocol_card_markdown(table, report);
  out.table = std::move(table);
  out.report = report;
  return out;
}

CompareOutcome run_compare(const Config& cfg, const std::vector<std::string>& policy_specs,
                           const std::vector<std::filesystem::path>& report_files, bool force,
                           int threads) {
  if (policy_specs.empty() && report_files.empty())
    throw ConfigError("compare: need at least one --policy or --report");

  CompareOutcome out;
  for (const std::filesystem::path& f : report_files)
    out.reports.push_back(read_report_json(f));

  if (!policy_specs.empty()) {
    const CohortConfig ccfg = eval_cohort_config(cfg);
    const PkPdParams params = pkpd_params(cfg);
    std::vector<Patient> cohort = generate_cohort(ccfg, params.physiology);
    const RewardConfig reward = reward_config(cfg);
    const TrialConfig trial = trial_config(cfg);
    const SensitivityMap classes = sensitivity_map(cfg);
    const std::uint64_t eval_seed = cfg.get_u64_or("evaluate", "seed", 99);
    for (const std::string& spec : policy_specs) {
      PolicyHandle h = make_policy(cfg, spec);
      EvaluationReport r = evaluate_policy(*h.policy, cohort, params, reward, trial, eval_seed,
                                           classes, h.possible_actions, threads);
      r.config_hash = cfg.hash();
      r.cohort_seed = ccfg.seed;
      out.reports.push_back(std::move(r));
    }
  }

  // Columns are only comparable when every arm saw the same patients.
  for (std::size_t i = 1; i < out.reports.size(); ++i) {
    const EvaluationReport& a = out.reports.front();
    const EvaluationReport& b = out.reports[i];
    if (a.cohort_seed != b.cohort_seed || a.cohort_size != b.cohort_size) {
      std::string msg = "compare: '" + b.policy_name + "' was evaluated on cohort seed " +
                        std::to_string(b.cohort_seed) + " size " + std::to_string(b.cohort_size) +
                        " but '" + a.policy_name + "' on seed " + std::to_string(a.cohort_seed) +
                        " size " + std::to_string(a.cohort_size);
      if (!force) throw DomainError(msg + " (use --force to compare anyway)");
    }
  }

  out.markdown = comparison_markdown(out.reports);
  out.csv = comparison_csv(out.reports);
  return out;
}

}  // namespace warfarin::experiment
