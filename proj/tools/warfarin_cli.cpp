// warfarin: explainable dosing-policy pipeline.
//
//   warfarin generate  --config data/default.cfg --out out/cohort.csv
//   warfarin train     --config data/default.cfg --out out/run1 [--resume ckpt]
//   warfarin evaluate  --config data/default.cfg --policy aurora --out out/aurora.json
//   warfarin distill   --config data/default.cfg --checkpoint out/run1/policy_best.ckpt --out out/run1
//   warfarin compare   --config data/default.cfg --policy aurora --policy checkpoint:...
//
// Exit codes: 0 ok, 1 domain error (simulation/data), 2 configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "warfarin/experiment.hpp"

namespace {

using warfarin::Config;

Config load_config(const std::string& path, const std::vector<std::string>& overrides) {
  Config cfg = Config::load(path);
  for (const std::string& o : overrides) cfg.apply_override(o);
  return cfg;
}

void print_log_row(const warfarin::TrainLogRow& r) {
  std::printf("pass %3d  patients %7ld  reward %8.3f  pttr %.4f  kl %.5f  iters %2d  "
              "avail %2d  used %2d  nochange %.3f%s\n",
              r.pass, r.patients_seen, r.mean_reward, r.pttr, r.kl, r.actor_iterations,
              r.available_actions, r.used_actions, r.no_change_fraction, r.is_best ? "  *" : "");
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable warfarin dosing: simulate, train, distill, compare"};
  app.require_subcommand(1);
  // Let --config / --override appear after the subcommand name too.
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config,-c", config_path, "INI configuration file")->required();
  app.add_option("--override,-D", overrides, "Override a key: section.key=value (repeatable)");

  auto* gen = app.add_subcommand("generate", "Sample a virtual patient cohort to csv");
  std::string gen_out = "cohort.csv";
  gen->add_option("--out,-o", gen_out, "Output csv path");

  auto* train = app.add_subcommand("train", "Train the dosing policy");
  std::string train_out = "run";
  std::string train_resume;
  train->add_option("--out,-o", train_out, "Output directory for checkpoints and the log");
  train->add_option("--resume", train_resume, "Continue from an existing checkpoint");

  auto* eval = app.add_subcommand("evaluate", "Evaluate one policy on the evaluation cohort");
  std::string eval_policy;
  std::string eval_out;
  std::string eval_plot;
  int eval_plot_patients = 20;
  int eval_threads = 0;
  eval->add_option("--policy,-p", eval_policy,
                   "aurora | intermountain | fixed | checkpoint:<path> | table:<path>")
      ->required();
  eval->add_option("--out,-o", eval_out, "Write the full report json here (default: stdout)");
  eval->add_option("--plot-data", eval_plot, "Write daily INR/dose trajectories to this csv");
  eval->add_option("--plot-patients", eval_plot_patients,
                   "How many patients the plot-data csv covers (default 20)");
  eval->add_option("--threads,-j", eval_threads,
                   "Evaluation worker pool size (default 0 = all hardware threads)");

  auto* dist = app.add_subcommand("distill", "Distill a checkpoint into a dosing table");
  std::string dist_ckpt;
  std::string dist_out = "run";
  dist->add_option("--checkpoint", dist_ckpt, "Trained policy checkpoint")->required();
  dist->add_option("--out,-o", dist_out, "Output directory for the table and its card");

  auto* comp = app.add_subcommand("compare", "Evaluate several policies side by side");
  std::vector<std::string> comp_policies;
  std::vector<std::string> comp_reports;
  std::string comp_out;
  bool comp_force = false;
  int comp_threads = 0;
  comp->add_option("--policy,-p", comp_policies, "Policy spec to evaluate now (repeatable)");
  comp->add_option("--report,-r", comp_reports,
                   "Existing evaluation report json to include as a column (repeatable)");
  comp->add_flag("--force", comp_force, "Compare arms even if their cohorts differ");
  comp->add_option("--threads,-j", comp_threads,
                   "Evaluation worker pool size (default 0 = all hardware threads)");
  comp->add_option("--out,-o", comp_out, "Directory for comparison.md/.csv and per-arm json");

  CLI11_PARSE(app, argc, argv);

  try {
    const Config cfg = load_config(config_path, overrides);

    if (gen->parsed()) {
      auto outcome = warfarin::experiment::run_generate(cfg, gen_out);
      std::printf("wrote %d patients to %s (config %s)\n", outcome.size,
                  outcome.cohort_csv.string().c_str(), cfg.hash().c_str());
    } else if (train->parsed()) {
      std::optional<std::filesystem::path> resume;
      if (!train_resume.empty()) resume = train_resume;
      auto outcome = warfarin::experiment::run_train(cfg, train_out, resume, print_log_row);
      const double best = outcome.result.log.empty() ? 0.0 : outcome.result.log.back().best_pttr;
      std::printf("best pass %d (pttr %.4f), checkpoints in %s\n", outcome.result.best_pass, best,
                  train_out.c_str());
    } else if (eval->parsed()) {
      warfarin::experiment::EvaluateOptions opts;
      if (!eval_plot.empty()) opts.plot_data = eval_plot;
      opts.plot_patients = eval_plot_patients;
      opts.threads = eval_threads;
      warfarin::EvaluationReport report =
          warfarin::experiment::run_evaluate(cfg, eval_policy, opts);
      if (!eval_out.empty()) {
        warfarin::write_report_json(eval_out, report);
        std::printf("wrote %s\n", eval_out.c_str());
      }
      if (!eval_plot.empty()) std::printf("wrote %s\n", eval_plot.c_str());
      std::cout << report.to_json(false).dump(2) << "\n";
    } else if (dist->parsed()) {
      auto outcome = warfarin::experiment::run_distill(cfg, dist_ckpt, dist_out);
      std::printf("distilled table: %d rows, teacher agreement %.4f, tree agreement %.4f\n",
                  outcome.report.table_rows, outcome.report.teacher_agreement,
                  outcome.report.tree_table_agreement);
      std::printf("wrote %s and %s\n", outcome.table_path.string().c_str(),
                  outcome.card_path.string().c_str());
    } else if (comp->parsed()) {
      std::vector<std::filesystem::path> report_files(comp_reports.begin(), comp_reports.end());
      auto outcome = warfarin::experiment::run_compare(cfg, comp_policies, report_files,
                                                       comp_force, comp_threads);
      std::cout << outcome.markdown;
      if (!comp_out.empty()) {
        std::filesystem::create_directories(comp_out);
        std::filesystem::path dir(comp_out);
        std::ofstream md(dir / "comparison.md");
        md << outcome.markdown;
        std::ofstream csvf(dir / "comparison.csv");
        csvf << outcome.csv;
        for (const auto& r : outcome.reports)
          warfarin::write_report_json(dir / (r.policy_name + ".json"), r);
        std::printf("wrote comparison.md/.csv and per-arm json to %s\n", comp_out.c_str());
      }
    }
    return 0;
  } catch (const warfarin::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const warfarin::DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
