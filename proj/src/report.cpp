#include "sensel/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sensel/error.hpp"
#include "sensel/eval.hpp"

namespace sensel {

using nlohmann::json;

namespace {

constexpr PerturbKind kPerturbOrder[] = {PerturbKind::InstHuman, PerturbKind::InstAuto, PerturbKind::ExOrder};
constexpr CalibrationKind kCalibrationOrder[] = {CalibrationKind::None, CalibrationKind::Contextual,
                                                 CalibrationKind::Prototypical};

std::vector<std::string> method_order() {
  std::vector<std::string> out{method_label(std::nullopt)};
  for (auto kind : kPerturbOrder) out.push_back(method_label(kind));
  return out;
}

std::string format_fixed(double value, int digits) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", digits, value);
  std::string s(buffer);
  if (s == "-0.000" || s == "-0.0") s.erase(0, 1);
  return s;
}

std::size_t display_width(const std::string& s) {
  std::size_t width = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++width;  // count UTF-8 lead bytes only
  }
  return width;
}

// Left-aligns the first `label_columns` columns, right-aligns the rest.
std::string render_grid(const std::vector<std::vector<std::string>>& rows, std::size_t label_columns) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], display_width(row[c]));
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const std::string& cell = rows[r][c];
      const std::string pad(widths[c] - display_width(cell), ' ');
      if (c) line += "  ";
      line += c < label_columns ? cell + pad : pad + cell;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : widths) total += w;
      out << std::string(total + 2 * (widths.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

json correlation_to_json(const PearsonResult& c) {
  return json{{"r", c.r}, {"p_value", c.p_value}, {"defined", c.defined}};
}

json result_to_json(const CalibrationResult& r) {
  json sens = json::object();
  json corr = json::object();
  for (const auto& [kind, value] : r.sensitivity) sens[std::string(to_string(kind))] = value;
  for (const auto& [kind, value] : r.correlation) corr[std::string(to_string(kind))] = correlation_to_json(value);
  return json{{"calibration", std::string(to_string(r.calibration))},
              {"f1_full", r.f1_full},
              {"sensitivity", std::move(sens)},
              {"correlation", std::move(corr)},
              {"auc", r.auc},
              {"coverage_at_f1", r.coverage_at_f1}};
}

CalibrationResult result_from_json(const json& doc) {
  CalibrationResult r;
  r.calibration = parse_calibration_kind(doc.at("calibration").get<std::string>());
  r.f1_full = doc.at("f1_full").get<double>();
  for (const auto& [kind, value] : doc.at("sensitivity").items()) {
    r.sensitivity[parse_perturb_kind(kind)] = value.get<double>();
  }
  for (const auto& [kind, value] : doc.at("correlation").items()) {
    r.correlation[parse_perturb_kind(kind)] =
        PearsonResult{value.at("r").get<double>(), value.at("p_value").get<double>(), value.at("defined").get<bool>()};
  }
  r.auc = doc.at("auc").get<std::map<std::string, double>>();
  r.coverage_at_f1 = doc.at("coverage_at_f1").get<std::map<std::string, std::vector<double>>>();
  return r;
}

json results_to_json(const std::vector<CalibrationResult>& results) {
  json out = json::array();
  for (const auto& r : results) out.push_back(result_to_json(r));
  return out;
}

std::vector<CalibrationResult> results_from_json(const json& doc) {
  std::vector<CalibrationResult> out;
  for (const auto& r : doc) out.push_back(result_from_json(r));
  return out;
}

std::vector<std::string> header_row(std::vector<std::string> labels, std::span<const TaskReport> reports) {
  for (const auto& r : reports) labels.push_back(r.task);
  labels.push_back("Avg");
  return labels;
}

}  // namespace

const CalibrationResult* TaskReport::find(CalibrationKind kind) const {
  for (const auto& r : results) {
    if (r.calibration == kind) return &r;
  }
  return nullptr;
}

std::string method_label(std::optional<PerturbKind> sensel_set) {
  if (!sensel_set) return "MaxProb";
  return "SenSel-" + std::string(display_name(*sensel_set));
}

std::optional<double> defined_mean(std::span<const std::optional<double>> values) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& v : values) {
    if (v) {
      total += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

std::vector<CalibrationResult> average_over_seeds(std::span<const SeedResult> seeds, std::size_t num_test) {
  std::vector<CalibrationResult> out;
  if (seeds.empty()) return out;
  const double n = static_cast<double>(seeds.size());

  for (std::size_t c = 0; c < seeds.front().results.size(); ++c) {
    CalibrationResult avg;
    avg.calibration = seeds.front().results[c].calibration;
    std::map<PerturbKind, std::pair<double, std::size_t>> corr_sum;
    for (const auto& seed : seeds) {
      if (seed.results.size() != seeds.front().results.size() || seed.results[c].calibration != avg.calibration) {
        throw ValidationError("seed results disagree on calibration settings");
      }
      const auto& r = seed.results[c];
      avg.f1_full += r.f1_full / n;
      for (const auto& [kind, value] : r.sensitivity) avg.sensitivity[kind] += value / n;
      for (const auto& [kind, value] : r.correlation) {
        auto& slot = corr_sum[kind];
        if (value.defined) {
          slot.first += value.r;
          ++slot.second;
        }
      }
      for (const auto& [method, value] : r.auc) avg.auc[method] += value / n;
      for (const auto& [method, grid] : r.coverage_at_f1) {
        auto& acc = avg.coverage_at_f1[method];
        acc.resize(grid.size(), 0.0);
        for (std::size_t i = 0; i < grid.size(); ++i) acc[i] += grid[i] / n;
      }
    }
    for (const auto& [kind, sum] : corr_sum) {
      PearsonResult cell;
      if (sum.second > 0) {
        cell.r = sum.first / static_cast<double>(sum.second);
        cell.p_value = num_test >= 3 ? correlation_p_value(cell.r, num_test) : 1.0;
        cell.defined = true;
      }
      avg.correlation[kind] = cell;
    }
    out.push_back(std::move(avg));
  }
  return out;
}

std::string task_report_to_json(const TaskReport& report) {
  json per_seed = json::array();
  for (const auto& s : report.per_seed) {
    per_seed.push_back(json{{"seed", s.seed}, {"results", results_to_json(s.results)}});
  }
  json doc = {{"task", report.task},
              {"num_test", report.num_test},
              {"shots", report.shots},
              {"results", results_to_json(report.results)},
              {"per_seed", std::move(per_seed)}};
  return doc.dump(2) + "\n";
}

TaskReport parse_task_report(std::string_view json_text) {
  try {
    const json doc = json::parse(json_text);
    TaskReport report;
    report.task = doc.at("task").get<std::string>();
    report.num_test = doc.at("num_test").get<std::size_t>();
    report.shots = doc.at("shots").get<std::size_t>();
    report.results = results_from_json(doc.at("results"));
    for (const auto& s : doc.at("per_seed")) {
      report.per_seed.push_back(SeedResult{s.at("seed").get<std::uint64_t>(), results_from_json(s.at("results"))});
    }
    return report;
  } catch (const json::exception& e) {
    throw ParseError(std::string("task report: ") + e.what());
  }
}

TaskReport load_task_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open report " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_task_report(buffer.str());
}

std::string render_tables(std::span<const TaskReport> reports) {
  std::ostringstream out;

  // Sensitivity and correlation share the (adjustment, perturbation set) row layout.
  std::vector<std::vector<std::string>> sens_rows{header_row({"Adjustment", "Perturb Set"}, reports)};
  std::vector<std::vector<std::string>> corr_rows{header_row({"Adjustment", "Perturb Set"}, reports)};
  std::vector<std::vector<std::string>> auc_rows{header_row({"Adjustment", "Method"}, reports)};

  for (auto calibration : kCalibrationOrder) {
    const bool any = std::any_of(reports.begin(), reports.end(),
                                 [&](const TaskReport& r) { return r.find(calibration) != nullptr; });
    if (!any) continue;
    const std::string adj(display_name(calibration));

    for (auto kind : kPerturbOrder) {
      std::vector<std::optional<double>> sens, corr;
      bool present = false;
      std::vector<std::string> sens_row{adj, std::string(display_name(kind))};
      std::vector<std::string> corr_row = sens_row;
      for (const auto& report : reports) {
        const auto* result = report.find(calibration);
        const double* value = nullptr;
        if (result) {
          if (auto it = result->sensitivity.find(kind); it != result->sensitivity.end()) value = &it->second;
        }
        if (value) {
          present = true;
          sens.push_back(*value);
          sens_row.push_back(format_fixed(*value, 3));
          const auto& c = result->correlation.at(kind);
          if (c.defined) {
            corr.push_back(c.r);
            corr_row.push_back(format_fixed(c.r, 3) + (c.p_value < 0.05 ? "†" : ""));
          } else {
            corr.push_back(std::nullopt);
            corr_row.push_back("/");
          }
        } else {
          sens.push_back(std::nullopt);
          corr.push_back(std::nullopt);
          sens_row.push_back("-");
          corr_row.push_back("-");
        }
      }
      if (!present) continue;
      const auto sens_avg = defined_mean(sens);
      const auto corr_avg = defined_mean(corr);
      sens_row.push_back(sens_avg ? format_fixed(*sens_avg, 3) : "/");
      corr_row.push_back(corr_avg ? format_fixed(*corr_avg, 3) : "/");
      sens_rows.push_back(std::move(sens_row));
      corr_rows.push_back(std::move(corr_row));
    }

    std::vector<std::string> methods{"F1@Cov100"};
    for (const auto& m : method_order()) methods.push_back(m);
    for (const auto& method : methods) {
      std::vector<std::optional<double>> values;
      std::vector<std::string> row{adj, method};
      bool present = false;
      for (const auto& report : reports) {
        const auto* result = report.find(calibration);
        std::optional<double> v;
        if (result) {
          if (method == "F1@Cov100") {
            v = result->f1_full;
          } else if (auto it = result->auc.find(method); it != result->auc.end()) {
            v = it->second;
          }
        }
        if (v) present = true;
        values.push_back(v);
        row.push_back(v ? format_fixed(100.0 * *v, 1) : "-");
      }
      if (!present) continue;
      const auto avg = defined_mean(values);
      row.push_back(avg ? format_fixed(100.0 * *avg, 1) : "/");
      auc_rows.push_back(std::move(row));
    }
  }

  out << "ICL sensitivity\n\n" << render_grid(sens_rows, 2) << '\n';
  out << "Sensitivity-accuracy correlation (Pearson r; † p < 0.05; / undefined)\n\n"
      << render_grid(corr_rows, 2) << '\n';
  out << "Selective prediction (F1@Cov100 and AUC of the F1-coverage curve, x100)\n\n"
      << render_grid(auc_rows, 2);

  // Coverage@F1: one block per (calibration, SenSel set), MaxProb in parentheses.
  for (auto calibration : kCalibrationOrder) {
    for (auto kind : kPerturbOrder) {
      const std::string sensel = method_label(kind);
      const std::string maxprob = method_label(std::nullopt);
      std::vector<std::vector<std::string>> rows;
      std::vector<std::string> header{"Task"};
      for (double t : kCoverageThresholds) header.push_back("C@" + std::to_string(static_cast<int>(std::lround(t * 100))));
      rows.push_back(std::move(header));
      for (const auto& report : reports) {
        const auto* result = report.find(calibration);
        if (!result) continue;
        auto s = result->coverage_at_f1.find(sensel);
        if (s == result->coverage_at_f1.end()) continue;
        auto m = result->coverage_at_f1.find(maxprob);
        std::vector<std::string> row{report.task};
        for (std::size_t i = 0; i < s->second.size(); ++i) {
          std::string cell = std::to_string(std::lround(100.0 * s->second[i]));
          if (m != result->coverage_at_f1.end()) cell += " (" + std::to_string(std::lround(100.0 * m->second[i])) + ")";
          row.push_back(std::move(cell));
        }
        rows.push_back(std::move(row));
      }
      if (rows.size() == 1) continue;
      out << "\nCoverage@F1, " << sensel << " (MaxProb), " << display_name(calibration) << "\n\n"
          << render_grid(rows, 1);
    }
  }
  return out.str();
}

}  // namespace sensel
