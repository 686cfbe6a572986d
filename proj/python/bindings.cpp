#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "sensel/assignment.hpp"
#include "sensel/error.hpp"
#include "sensel/eval.hpp"
#include "sensel/gmm.hpp"
#include "sensel/pipeline.hpp"
#include "sensel/stats.hpp"

namespace py = pybind11;
using namespace sensel;

namespace {

std::vector<LabelScores> to_scores(const std::vector<std::vector<double>>& rows) {
  std::vector<LabelScores> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(LabelScores::from_probs(r));
  return out;
}

py::object parse_json(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "sensel core: sensitivity-based selective prediction for in-context learning";

  auto base = py::register_exception<Error>(m, "SenselError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());
  py::register_exception<TransportError>(m, "TransportError", base.ptr());
  py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());

  // perturbation
  m.def("word_dropout", &word_dropout, py::arg("instruction"), py::arg("rate"), py::arg("seed"));
  m.def(
      "assemble_prompt",
      [](const std::string& task_json, const std::string& instruction,
         const std::vector<std::pair<std::string, std::size_t>>& shots, const std::vector<std::size_t>& ordering,
         const std::string& target) {
        const TaskSpec spec = parse_task_spec(task_json);
        std::vector<LabeledExample> examples;
        for (std::size_t i = 0; i < shots.size(); ++i) {
          examples.push_back(LabeledExample{"shot" + std::to_string(i), shots[i].first, shots[i].second});
        }
        return assemble_prompt(spec, instruction, examples, ordering, target);
      },
      py::arg("task_json"), py::arg("instruction"), py::arg("shots"), py::arg("ordering"), py::arg("target"),
      "shots are (text, label) pairs; ordering permutes them");

  // selection and evaluation
  m.def(
      "sensitivity",
      [](std::size_t base_prediction, const std::vector<std::size_t>& perturbed) {
        return sensitivity(base_prediction, perturbed);
      },
      py::arg("base_prediction"), py::arg("perturbed_predictions"));
  m.def(
      "f1_macro",
      [](const std::vector<std::size_t>& preds, const std::vector<std::size_t>& golds, std::size_t num_labels) {
        return f1_macro(preds, golds, num_labels);
      },
      py::arg("preds"), py::arg("golds"), py::arg("num_labels"));
  m.def(
      "pearson",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto r = pearson(x, y);
        return py::make_tuple(r.r, r.p_value, r.defined);
      },
      py::arg("x"), py::arg("y"), "(r, two-sided p-value, defined)");
  m.def("max_weight_assignment", &max_weight_assignment, py::arg("weights"), "result[row] = column");

  py::class_<SelectionRecord>(m, "SelectionRecord")
      .def(py::init<>())
      .def_readwrite("example_id", &SelectionRecord::example_id)
      .def_readwrite("base_prediction", &SelectionRecord::base_prediction)
      .def_readwrite("gold", &SelectionRecord::gold)
      .def_readwrite("sensitivity", &SelectionRecord::sensitivity)
      .def_readwrite("confidence", &SelectionRecord::confidence)
      .def_readwrite("maxprob", &SelectionRecord::maxprob)
      .def_readwrite("abstain", &SelectionRecord::abstain)
      .def_readwrite("correct", &SelectionRecord::correct)
      .def("__repr__", [](const SelectionRecord& r) {
        std::ostringstream s;
        s << "SelectionRecord(" << r.example_id << ", pred=" << r.base_prediction << ", gold=" << r.gold
          << ", confidence=" << r.confidence << ")";
        return s.str();
      });

  m.def(
      "make_record",
      [](const std::string& id, std::size_t gold, const std::vector<double>& calibrated_probs,
         const std::vector<std::size_t>& perturbed, const std::string& method) {
        const auto scores = LabelScores::from_probs(calibrated_probs);
        return make_record(id, gold, predict_label(scores), scores, perturbed, parse_selection_method(method));
      },
      py::arg("example_id"), py::arg("gold"), py::arg("calibrated_probs"), py::arg("perturbed_predictions"),
      py::arg("method") = "sensel");
  m.def(
      "apply_threshold",
      [](std::vector<SelectionRecord> records, double gamma) {
        apply_threshold(records, gamma);
        return records;
      },
      py::arg("records"), py::arg("gamma"));
  m.def(
      "coverage_curve",
      [](const std::vector<SelectionRecord>& records, std::size_t num_labels) {
        std::vector<std::pair<double, double>> out;
        for (const auto& p : coverage_curve(records, num_labels).points) out.emplace_back(p.coverage, p.f1);
        return out;
      },
      py::arg("records"), py::arg("num_labels"), "[(coverage, f1)] from most to least confident");
  m.def(
      "auc_f1_coverage",
      [](const std::vector<SelectionRecord>& records, std::size_t num_labels) {
        return auc_f1_coverage(coverage_curve(records, num_labels));
      },
      py::arg("records"), py::arg("num_labels"));
  m.def(
      "coverage_at_f1",
      [](const std::vector<SelectionRecord>& records, std::size_t num_labels, double threshold) {
        return coverage_at_f1(coverage_curve(records, num_labels), threshold);
      },
      py::arg("records"), py::arg("num_labels"), py::arg("threshold"));

  // calibration
  m.def(
      "contextual_prior",
      [](const std::vector<std::vector<double>>& content_free_probs) {
        return cc_from_distributions(to_scores(content_free_probs)).prior;
      },
      py::arg("content_free_probs"));
  m.def(
      "apply_contextual",
      [](const std::vector<double>& prior, const std::vector<double>& probs) {
        return apply_cc(CCModel{prior}, LabelScores::from_probs(probs)).probs();
      },
      py::arg("prior"), py::arg("probs"));
  m.def(
      "prototypical_calibrate",
      [](const std::vector<std::vector<double>>& probs, std::uint64_t seed) {
        const auto scores = to_scores(probs);
        GmmConfig config;
        config.seed = seed;
        const PCModel model = fit_prototypical(scores, config);
        std::vector<std::vector<double>> out;
        for (const auto& s : scores) out.push_back(apply_pc(model, s).probs());
        return py::make_tuple(out, model.assignment);
      },
      py::arg("probs"), py::arg("seed") = 0,
      "fits the mixture on the rows and returns (calibrated rows, cluster->label assignment)");

  // pipeline
  py::enum_<BackendKind>(m, "Backend")
      .value("NONE", BackendKind::None)
      .value("PRECOMPUTED", BackendKind::Precomputed)
      .value("REMOTE", BackendKind::Remote)
      .value("SYNTHETIC", BackendKind::Synthetic);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("task", &RunConfig::task)
      .def_readwrite("train", &RunConfig::train)
      .def_readwrite("test", &RunConfig::test)
      .def_readwrite("shots", &RunConfig::shots)
      .def_readwrite("fewshot_seeds", &RunConfig::fewshot_seeds)
      .def_property(
          "perturb",
          [](const RunConfig& c) {
            std::vector<std::string> out;
            for (auto k : c.perturb) out.emplace_back(to_string(k));
            return out;
          },
          [](RunConfig& c, const std::vector<std::string>& names) {
            c.perturb.clear();
            for (const auto& n : names) c.perturb.push_back(parse_perturb_kind(n));
          })
      .def_readwrite("dropout_rate", &RunConfig::dropout_rate)
      .def_readwrite("n_dropout", &RunConfig::n_dropout)
      .def_readwrite("paraphrase_file", &RunConfig::paraphrase_file)
      .def_readwrite("paraphrase_url", &RunConfig::paraphrase_url)
      .def_readwrite("n_paraphrases", &RunConfig::n_paraphrases)
      .def_readwrite("max_perms", &RunConfig::max_perms)
      .def_property(
          "calibration",
          [](const RunConfig& c) {
            std::vector<std::string> out;
            for (auto k : c.calibration) out.emplace_back(to_string(k));
            return out;
          },
          [](RunConfig& c, const std::vector<std::string>& names) {
            c.calibration.clear();
            for (const auto& n : names) c.calibration.push_back(parse_calibration_kind(n));
          })
      .def_property(
          "methods",
          [](const RunConfig& c) {
            std::vector<std::string> out;
            for (auto k : c.methods) out.emplace_back(to_string(k));
            return out;
          },
          [](RunConfig& c, const std::vector<std::string>& names) {
            c.methods.clear();
            for (const auto& n : names) c.methods.push_back(parse_selection_method(n));
          })
      .def_readwrite("content_free_inputs", &RunConfig::content_free_inputs)
      .def_property(
          "backend", [](const RunConfig& c) { return std::string(to_string(c.backend)); },
          [](RunConfig& c, const std::string& name) { c.backend = parse_backend_kind(name); })
      .def_readwrite("endpoint", &RunConfig::endpoint)
      .def_readwrite("score_file", &RunConfig::score_file)
      .def_readwrite("synthetic_bias", &RunConfig::synthetic_bias)
      .def_readwrite("parallelism", &RunConfig::parallelism)
      .def_readwrite("max_attempts", &RunConfig::max_attempts)
      .def_readwrite("out", &RunConfig::out)
      .def_readwrite("seed", &RunConfig::seed);

  m.def(
      "perturb", [](const RunConfig& c) { return parse_json(manifest_to_json(cmd_perturb(c))); }, py::arg("config"),
      "writes <out>/manifest.json and returns it as a dict");
  m.def(
      "score",
      [](const RunConfig& c) {
        std::ostringstream progress;
        ScoreSummary s;
        {
          py::gil_scoped_release release;
          s = cmd_score(c, progress);
        }
        py::dict d;
        d["requested"] = s.requested;
        d["cached"] = s.cached;
        d["backend_calls"] = s.backend_calls;
        return d;
      },
      py::arg("config"));
  m.def(
      "run",
      [](const RunConfig& c) {
        std::ostringstream progress;
        TaskReport report;
        {
          py::gil_scoped_release release;
          report = cmd_run(c, progress);
        }
        return parse_json(task_report_to_json(report));
      },
      py::arg("config"), "writes <out>/report.json and report.txt and returns the report as a dict");
  m.def(
      "report",
      [](const std::vector<std::filesystem::path>& reports, const std::filesystem::path& out) {
        return cmd_report(reports, out);
      },
      py::arg("reports"), py::arg("out"), "returns the rendered tables");
}
