#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sensel/scoring.hpp"

namespace sensel {

enum class SelectionMethod { SenSel, MaxProb };

std::string_view to_string(SelectionMethod method);
/// Accepts "sensel" and "maxprob".
SelectionMethod parse_selection_method(std::string_view name);

struct SelectionRecord {
  std::string example_id;
  std::size_t base_prediction = 0;
  std::size_t gold = 0;
  double sensitivity = 0.0;
  double confidence = 0.0;
  double maxprob = 0.0;  // secondary ranking key
  bool abstain = false;
  bool correct = false;

  bool operator==(const SelectionRecord&) const = default;
};

struct SelectionConfig {
  SelectionMethod method = SelectionMethod::SenSel;
  double gamma = -std::numeric_limits<double>::infinity();
};

/// Fraction of perturbed predictions that differ from the base prediction.
double sensitivity(std::size_t base_prediction, std::span<const std::size_t> perturbed_predictions);

double sensel_confidence(const SelectionRecord& record);
double maxprob_confidence(const LabelScores& calibrated);

/// Builds a record for one example; confidence follows the method.
SelectionRecord make_record(std::string example_id, std::size_t gold, std::size_t base_prediction,
                            const LabelScores& calibrated_base, std::span<const std::size_t> perturbed_predictions,
                            SelectionMethod method);

/// abstain <=> confidence < gamma. Predictions are left untouched.
void apply_threshold(std::span<SelectionRecord> records, double gamma);

/// Most confident first: confidence desc, then maxprob desc, then example_id asc.
bool ranks_before(const SelectionRecord& a, const SelectionRecord& b);
std::vector<std::size_t> rank_order(std::span<const SelectionRecord> records);

void write_records(const std::filesystem::path& path, std::span<const SelectionRecord> records);
std::vector<SelectionRecord> load_records(const std::filesystem::path& path);

}  // namespace sensel
