#include "sensel/calibrate.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sensel/assignment.hpp"
#include "sensel/error.hpp"

namespace sensel {

using nlohmann::json;

std::string_view to_string(CalibrationKind kind) {
  switch (kind) {
    case CalibrationKind::None: return "none";
    case CalibrationKind::Contextual: return "cc";
    case CalibrationKind::Prototypical: return "pc";
  }
  return "none";
}

std::string_view display_name(CalibrationKind kind) {
  switch (kind) {
    case CalibrationKind::None: return "None";
    case CalibrationKind::Contextual: return "CC";
    case CalibrationKind::Prototypical: return "PC";
  }
  return "None";
}

CalibrationKind parse_calibration_kind(std::string_view name) {
  for (auto kind : {CalibrationKind::None, CalibrationKind::Contextual, CalibrationKind::Prototypical}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown calibration '" + std::string(name) + "' (expected none, cc or pc)");
}

const std::vector<std::string>& default_content_free_inputs() {
  static const std::vector<std::string> inputs{"", "[MASK]", "N/A"};
  return inputs;
}

CCModel cc_from_distributions(std::span<const LabelScores> content_free_scores) {
  if (content_free_scores.empty()) throw ConfigError("contextual calibration needs at least one content-free input");
  const std::size_t labels = content_free_scores.front().size();
  std::vector<double> prior(labels, 0.0);
  for (const auto& s : content_free_scores) {
    if (s.size() != labels) throw ValidationError("contextual calibration: inconsistent label counts");
    for (std::size_t l = 0; l < labels; ++l) prior[l] += s.probs()[l];
  }
  double total = 0.0;
  for (double& p : prior) {
    p = std::max(p / static_cast<double>(content_free_scores.size()), kPriorFloor);
    total += p;
  }
  for (double& p : prior) p /= total;
  return CCModel{std::move(prior)};
}

std::vector<ScoreRequest> content_free_requests(const TaskSpec& spec, const FewShotSet& shots,
                                                const PromptVariant& variant,
                                                std::span<const std::string> content_free_inputs) {
  std::vector<ScoreRequest> requests;
  for (std::size_t i = 0; i < content_free_inputs.size(); ++i) {
    requests.push_back(ScoreRequest{
        ScoreKey{"__cf__" + std::to_string(i), variant.variant_id}, shots.seed,
        assemble_prompt(spec, variant.instruction, shots.examples, variant.ordering, content_free_inputs[i])});
  }
  return requests;
}

CCModel fit_contextual(Scorer& backend, const TaskSpec& spec, const FewShotSet& shots,
                       std::span<const std::size_t> ordering, std::string_view instruction,
                       std::span<const std::string> content_free_inputs, std::string_view variant_id,
                       VerbalizerScoring mode) {
  if (content_free_inputs.empty()) throw ConfigError("contextual calibration needs at least one content-free input");
  PromptVariant context{VariantKind::Base, 0, std::string(instruction),
                        std::vector<std::size_t>(ordering.begin(), ordering.end()), std::string(variant_id)};
  std::vector<LabelScores> scored;
  for (const auto& request : content_free_requests(spec, shots, context, content_free_inputs)) {
    scored.push_back(score_labels(backend, request, spec.verbalizers, mode));
  }
  return cc_from_distributions(scored);
}

LabelScores apply_cc(const CCModel& model, const LabelScores& raw) {
  if (model.prior.size() != raw.size()) throw ValidationError("contextual calibration: label count mismatch");
  std::vector<double> adjusted(raw.size());
  for (std::size_t l = 0; l < raw.size(); ++l) adjusted[l] = raw.probs()[l] / model.prior[l];
  return LabelScores::from_probs(std::move(adjusted));
}

std::vector<std::size_t> match_clusters(const GmmModel& gmm) {
  if (gmm.components() != gmm.dimension()) {
    throw ConfigError("prototypical calibration needs one cluster per label");
  }
  return max_weight_assignment(gmm.means);
}

PCModel fit_prototypical(std::span<const LabelScores> predictions, const GmmConfig& config) {
  std::vector<Point> points;
  points.reserve(predictions.size());
  for (const auto& p : predictions) points.push_back(p.probs());
  PCModel model;
  model.gmm = fit_gmm(points, config);
  model.assignment = match_clusters(model.gmm);
  return model;
}

LabelScores apply_pc(const PCModel& model, const LabelScores& raw) {
  const auto posterior = gmm_posteriors(model.gmm, raw.probs());
  std::vector<double> calibrated(posterior.size(), 0.0);
  for (std::size_t cluster = 0; cluster < posterior.size(); ++cluster) {
    calibrated[model.assignment[cluster]] = posterior[cluster];
  }
  return LabelScores::from_probs(std::move(calibrated));
}

LabelScores apply_calibration(const CalibrationModel& model, const LabelScores& raw) {
  return std::visit(
      [&](const auto& m) -> LabelScores {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NoCalibration>) {
          return raw;
        } else if constexpr (std::is_same_v<T, CCModel>) {
          return apply_cc(m, raw);
        } else {
          return apply_pc(m, raw);
        }
      },
      model);
}

namespace {

json model_to_json(const CalibrationModel& model) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NoCalibration>) {
          return json{{"kind", "none"}};
        } else if constexpr (std::is_same_v<T, CCModel>) {
          return json{{"kind", "cc"}, {"prior", m.prior}};
        } else {
          return json{{"kind", "pc"},
                      {"weights", m.gmm.weights},
                      {"means", m.gmm.means},
                      {"variances", m.gmm.variances},
                      {"log_likelihood", m.gmm.log_likelihood},
                      {"assignment", m.assignment}};
        }
      },
      model);
}

CalibrationModel model_from_json(const json& doc) {
  const auto kind = parse_calibration_kind(doc.at("kind").get<std::string>());
  switch (kind) {
    case CalibrationKind::None: return NoCalibration{};
    case CalibrationKind::Contextual: return CCModel{doc.at("prior").get<std::vector<double>>()};
    case CalibrationKind::Prototypical: {
      PCModel m;
      m.gmm.weights = doc.at("weights").get<std::vector<double>>();
      m.gmm.means = doc.at("means").get<std::vector<Point>>();
      m.gmm.variances = doc.at("variances").get<std::vector<Point>>();
      m.gmm.log_likelihood = doc.at("log_likelihood").get<double>();
      m.assignment = doc.at("assignment").get<std::vector<std::size_t>>();
      if (m.assignment.size() != m.gmm.weights.size() ||
          !is_permutation_of_range(m.assignment, m.assignment.size())) {
        throw ValidationError("calibration model: assignment is not a permutation");
      }
      return m;
    }
  }
  return NoCalibration{};
}

}  // namespace

std::string calibration_models_to_json(const std::map<std::string, CalibrationModel>& models) {
  json doc = json::object();
  for (const auto& [variant, model] : models) doc[variant] = model_to_json(model);
  return doc.dump(2) + "\n";
}

std::map<std::string, CalibrationModel> parse_calibration_models(std::string_view json_text) {
  try {
    const json doc = json::parse(json_text);
    std::map<std::string, CalibrationModel> out;
    for (const auto& [variant, model] : doc.items()) out.emplace(variant, model_from_json(model));
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("calibration models: ") + e.what());
  }
}

void write_calibration_models(const std::filesystem::path& path, const std::map<std::string, CalibrationModel>& models) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write calibration models " + path.string());
  out << calibration_models_to_json(models);
}

std::map<std::string, CalibrationModel> load_calibration_models(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open calibration models " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_calibration_models(buffer.str());
}

}  // namespace sensel
