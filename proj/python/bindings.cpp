// Python bindings for the dosing pipeline. The heavy lifting stays in C++;
// these calls accept a config path plus "section.key=value" overrides and
// return JSON strings the python package turns into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "warfarin/experiment.hpp"

namespace py = pybind11;
namespace wf = warfarin;
namespace wx = warfarin::experiment;

namespace {

wf::Config make_config(const std::string& path, const std::vector<std::string>& overrides) {
  wf::Config cfg = wf::Config::load(path);
  for (const std::string& o : overrides) cfg.apply_override(o);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_warfarin_core, m) {
  m.doc() = "Virtual warfarin trial: cohort simulation, policy training, distillation";

  py::register_exception<wf::ConfigError>(m, "ConfigurationError");
  py::register_exception<wf::DomainError>(m, "SimulationError");

  m.def(
      "config_hash",
      [](const std::string& config, const std::vector<std::string>& overrides) {
        return make_config(config, overrides).hash();
      },
      py::arg("config"), py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "generate",
      [](const std::string& config, const std::string& out_csv,
         const std::vector<std::string>& overrides) {
        auto outcome = wx::run_generate(make_config(config, overrides), out_csv);
        return outcome.size;
      },
      py::arg("config"), py::arg("out_csv"), py::arg("overrides") = std::vector<std::string>{},
      "Sample the evaluation cohort and write it as csv; returns the cohort size.");

  m.def(
      "train",
      [](const std::string& config, const std::string& out_dir,
         const std::vector<std::string>& overrides, const std::string& resume) {
        std::optional<std::filesystem::path> res;
        if (!resume.empty()) res = resume;
        wx::TrainOutcome out;
        {
          py::gil_scoped_release release;
          out = wx::run_train(make_config(config, overrides), out_dir, res);
        }
        nlohmann::json j;
        j["best_checkpoint"] = out.best_checkpoint.string();
        j["final_checkpoint"] = out.final_checkpoint.string();
        j["log_csv"] = out.log_csv.string();
        j["best_pass"] = out.result.best_pass;
        j["passes"] = out.result.log.size();
        j["stopped_early"] = out.result.stopped_early;
        j["best_pttr"] = out.result.log.empty() ? 0.0 : out.result.log.back().best_pttr;
        return j.dump();
      },
      py::arg("config"), py::arg("out_dir"), py::arg("overrides") = std::vector<std::string>{},
      py::arg("resume") = std::string{},
      "Train the dosing policy; returns a JSON summary string.");

  m.def(
      "evaluate",
      [](const std::string& config, const std::string& policy,
         const std::vector<std::string>& overrides, bool per_patient) {
        wf::EvaluationReport report;
        {
          py::gil_scoped_release release;
          report = wx::run_evaluate(make_config(config, overrides), policy);
        }
        return report.to_json(per_patient).dump();
      },
      py::arg("config"), py::arg("policy"), py::arg("overrides") = std::vector<std::string>{},
      py::arg("per_patient") = false,
      "Evaluate a policy spec (aurora | intermountain | fixed | checkpoint:<path> | "
      "table:<path>); returns the report as a JSON string.");

  m.def(
      "distill",
      [](const std::string& config, const std::string& checkpoint, const std::string& out_dir,
         const std::vector<std::string>& overrides) {
        wx::DistillOutcome out;
        {
          py::gil_scoped_release release;
          out = wx::run_distill(make_config(config, overrides), checkpoint, out_dir);
        }
        nlohmann::json j;
        j["table_path"] = out.table_path.string();
        j["card_path"] = out.card_path.string();
        j["table_rows"] = out.report.table_rows;
        j["tree_leaves"] = out.report.tree_leaves;
        j["dataset_size"] = out.report.dataset_size;
        j["teacher_agreement"] = out.report.teacher_agreement;
        j["tree_table_agreement"] = out.report.tree_table_agreement;
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : out.table.rows())
          rows.push_back({{"inr_low", r.inr_low},
                          {"inr_high", r.inr_high},
                          {"percent_change", r.percent_change},
                          {"one_time", wf::to_string(r.one_time)}});
        j["rows"] = rows;
        return j.dump();
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("out_dir"),
      py::arg("overrides") = std::vector<std::string>{},
      "Distill a trained checkpoint into an INR-indexed dosing table.");

  m.def(
      "compare",
      [](const std::string& config, const std::vector<std::string>& policies,
         const std::vector<std::string>& overrides) {
        wx::CompareOutcome out;
        {
          py::gil_scoped_release release;
          out = wx::run_compare(make_config(config, overrides), policies);
        }
        nlohmann::json j;
        j["markdown"] = out.markdown;
        j["csv"] = out.csv;
        nlohmann::json reports = nlohmann::json::array();
        for (const auto& r : out.reports) reports.push_back(r.to_json(false));
        j["reports"] = reports;
        return j.dump();
      },
      py::arg("config"), py::arg("policies"), py::arg("overrides") = std::vector<std::string>{},
      "Evaluate several policy specs on one shared cohort; returns JSON with the "
      "comparison table.");
}
