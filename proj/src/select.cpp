#include "sensel/select.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "sensel/error.hpp"

namespace sensel {

using nlohmann::json;

std::string_view to_string(SelectionMethod method) {
  return method == SelectionMethod::SenSel ? "sensel" : "maxprob";
}

SelectionMethod parse_selection_method(std::string_view name) {
  if (name == "sensel") return SelectionMethod::SenSel;
  if (name == "maxprob") return SelectionMethod::MaxProb;
  throw ConfigError("unknown selection method '" + std::string(name) + "' (expected sensel or maxprob)");
}

double sensitivity(std::size_t base_prediction, std::span<const std::size_t> perturbed_predictions) {
  if (perturbed_predictions.empty()) throw ConfigError("sensitivity needs a non-empty perturbation set");
  const auto differing = std::count_if(perturbed_predictions.begin(), perturbed_predictions.end(),
                                       [&](std::size_t p) { return p != base_prediction; });
  return static_cast<double>(differing) / static_cast<double>(perturbed_predictions.size());
}

double sensel_confidence(const SelectionRecord& record) { return -record.sensitivity; }

double maxprob_confidence(const LabelScores& calibrated) {
  const auto& probs = calibrated.probs();
  return *std::max_element(probs.begin(), probs.end());
}

SelectionRecord make_record(std::string example_id, std::size_t gold, std::size_t base_prediction,
                            const LabelScores& calibrated_base, std::span<const std::size_t> perturbed_predictions,
                            SelectionMethod method) {
  SelectionRecord r;
  r.example_id = std::move(example_id);
  r.gold = gold;
  r.base_prediction = base_prediction;
  r.correct = base_prediction == gold;
  r.maxprob = maxprob_confidence(calibrated_base);
  if (!perturbed_predictions.empty()) r.sensitivity = sensitivity(base_prediction, perturbed_predictions);
  r.confidence = method == SelectionMethod::SenSel ? sensel_confidence(r) : r.maxprob;
  return r;
}

void apply_threshold(std::span<SelectionRecord> records, double gamma) {
  for (auto& r : records) r.abstain = r.confidence < gamma;
}

bool ranks_before(const SelectionRecord& a, const SelectionRecord& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.maxprob != b.maxprob) return a.maxprob > b.maxprob;
  return a.example_id < b.example_id;
}

std::vector<std::size_t> rank_order(std::span<const SelectionRecord> records) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ranks_before(records[a], records[b]); });
  return order;
}

void write_records(const std::filesystem::path& path, std::span<const SelectionRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write selection records " + path.string());
  for (const auto& r : records) {
    out << json{{"example_id", r.example_id},   {"base_prediction", r.base_prediction},
                {"gold", r.gold},               {"sensitivity", r.sensitivity},
                {"confidence", r.confidence},   {"maxprob", r.maxprob},
                {"abstain", r.abstain},         {"correct", r.correct}}
               .dump()
        << '\n';
  }
}

std::vector<SelectionRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open selection records " + path.string());
  std::vector<SelectionRecord> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json doc = json::parse(line);
      SelectionRecord r;
      r.example_id = doc.at("example_id").get<std::string>();
      r.base_prediction = doc.at("base_prediction").get<std::size_t>();
      r.gold = doc.at("gold").get<std::size_t>();
      r.sensitivity = doc.at("sensitivity").get<double>();
      r.confidence = doc.at("confidence").get<double>();
      r.maxprob = doc.at("maxprob").get<double>();
      r.abstain = doc.at("abstain").get<bool>();
      r.correct = doc.at("correct").get<bool>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError("selection records line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sensel
