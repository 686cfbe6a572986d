#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sensel/calibrate.hpp"
#include "sensel/perturb.hpp"
#include "sensel/stats.hpp"

namespace sensel {

/// Everything measured for one task under one calibration setting.
struct CalibrationResult {
  CalibrationKind calibration = CalibrationKind::None;
  std::map<PerturbKind, double> sensitivity;  // mean over test examples
  std::map<PerturbKind, PearsonResult> correlation;
  double f1_full = 0.0;  // F1 with no abstention
  std::map<std::string, double> auc;  // keyed by method label, see method_label()
  std::map<std::string, std::vector<double>> coverage_at_f1;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<CalibrationResult> results;
};

struct TaskReport {
  std::string task;
  std::size_t num_test = 0;
  std::size_t shots = 0;
  std::vector<SeedResult> per_seed;
  std::vector<CalibrationResult> results;  // averaged over per_seed

  const CalibrationResult* find(CalibrationKind kind) const;
};

/// "MaxProb" or "SenSel-<set>".
std::string method_label(std::optional<PerturbKind> sensel_set);

/// Arithmetic mean over seeds. Correlations average r over the seeds where it is
/// defined; the p-value is recomputed for the averaged r at num_test pairs.
std::vector<CalibrationResult> average_over_seeds(std::span<const SeedResult> seeds, std::size_t num_test);

std::string task_report_to_json(const TaskReport& report);
TaskReport parse_task_report(std::string_view json_text);
TaskReport load_task_report(const std::filesystem::path& path);

/// Aligned text tables: sensitivity, correlation, AUC (per-task columns, Avg last)
/// and Coverage@F1 (per-task rows).
std::string render_tables(std::span<const TaskReport> reports);

/// Mean of the entries that are present; nullopt when none are.
std::optional<double> defined_mean(std::span<const std::optional<double>> values);

}  // namespace sensel
