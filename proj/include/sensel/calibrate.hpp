#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sensel/gmm.hpp"
#include "sensel/perturb.hpp"
#include "sensel/scoring.hpp"
#include "sensel/task_data.hpp"

namespace sensel {

enum class CalibrationKind { None, Contextual, Prototypical };

std::string_view to_string(CalibrationKind kind);
/// Accepts "none", "cc" and "pc".
CalibrationKind parse_calibration_kind(std::string_view name);
/// "None", "CC", "PC".
std::string_view display_name(CalibrationKind kind);

/// Contextual calibration: the label prior estimated from content-free probes.
struct CCModel {
  std::vector<double> prior;
};

/// Prototypical calibration: a mixture over prediction vectors plus the
/// cluster -> label bijection.
struct PCModel {
  GmmModel gmm;
  std::vector<std::size_t> assignment;  // assignment[cluster] = label
};

struct NoCalibration {};

using CalibrationModel = std::variant<NoCalibration, CCModel, PCModel>;

inline constexpr double kPriorFloor = 1e-6;

/// "", "[MASK]" and "N/A".
const std::vector<std::string>& default_content_free_inputs();

/// Arithmetic mean of the distributions, floored at kPriorFloor, renormalized.
CCModel cc_from_distributions(std::span<const LabelScores> content_free_scores);

/// Scores each content-free input in the given prompt context (instruction, shots,
/// ordering) and averages the resulting distributions. Requests are keyed
/// ("__cf__<i>", variant_id).
CCModel fit_contextual(Scorer& backend, const TaskSpec& spec, const FewShotSet& shots,
                       std::span<const std::size_t> ordering, std::string_view instruction,
                       std::span<const std::string> content_free_inputs, std::string_view variant_id = "base",
                       VerbalizerScoring mode = VerbalizerScoring::Sum);

/// The content-free scoring requests fit_contextual issues, for pre-scoring into a cache.
std::vector<ScoreRequest> content_free_requests(const TaskSpec& spec, const FewShotSet& shots,
                                                const PromptVariant& variant,
                                                std::span<const std::string> content_free_inputs);

/// calibrated_l proportional to probs_l / prior_l.
LabelScores apply_cc(const CCModel& model, const LabelScores& raw);

/// Maximum-weight bijection between clusters and labels, where the weight of
/// (cluster j, label l) is the l-th coordinate of cluster j's mean.
std::vector<std::size_t> match_clusters(const GmmModel& gmm);

/// Fits the mixture on the given (unlabeled) prediction distributions and matches clusters.
PCModel fit_prototypical(std::span<const LabelScores> predictions, const GmmConfig& config);

/// Calibrated probability of label l is the posterior of the cluster assigned to l.
LabelScores apply_pc(const PCModel& model, const LabelScores& raw);

LabelScores apply_calibration(const CalibrationModel& model, const LabelScores& raw);

/// Per-variant calibration models, keyed by variant id.
std::string calibration_models_to_json(const std::map<std::string, CalibrationModel>& models);
std::map<std::string, CalibrationModel> parse_calibration_models(std::string_view json_text);
void write_calibration_models(const std::filesystem::path& path, const std::map<std::string, CalibrationModel>& models);
std::map<std::string, CalibrationModel> load_calibration_models(const std::filesystem::path& path);

}  // namespace sensel
