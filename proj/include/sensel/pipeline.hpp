#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sensel/calibrate.hpp"
#include "sensel/perturb.hpp"
#include "sensel/report.hpp"
#include "sensel/scoring.hpp"
#include "sensel/select.hpp"
#include "sensel/task_data.hpp"

namespace sensel {

enum class BackendKind { None, Precomputed, Remote, Synthetic };

std::string_view to_string(BackendKind kind);
/// Accepts "none", "precomputed", "remote" and "synthetic".
BackendKind parse_backend_kind(std::string_view name);

struct RunConfig {
  std::filesystem::path task;
  std::filesystem::path train;
  std::filesystem::path test;
  std::size_t shots = 4;
  std::vector<std::uint64_t> fewshot_seeds{0, 1, 2, 3, 4};

  std::vector<PerturbKind> perturb{PerturbKind::InstHuman, PerturbKind::InstAuto, PerturbKind::ExOrder};
  double dropout_rate = 0.2;
  std::size_t n_dropout = 10;
  std::optional<std::filesystem::path> paraphrase_file;
  std::string paraphrase_url;  // fetched once into <out>/paraphrases.jsonl when no file is given
  std::size_t n_paraphrases = 10;
  std::size_t max_perms = 23;

  std::vector<CalibrationKind> calibration{CalibrationKind::Prototypical};
  std::vector<SelectionMethod> methods{SelectionMethod::SenSel, SelectionMethod::MaxProb};
  std::vector<std::string> content_free_inputs = default_content_free_inputs();

  BackendKind backend = BackendKind::None;
  std::string endpoint;
  std::optional<std::filesystem::path> score_file;
  std::vector<double> synthetic_bias;  // per-label log offsets for the synthetic backend
  std::size_t parallelism = 1;
  std::size_t max_attempts = 3;
  std::chrono::milliseconds retry_backoff{100};
  VerbalizerScoring verbalizer_scoring = VerbalizerScoring::Sum;

  std::filesystem::path out = "sensel_out";
  std::uint64_t seed = 0;
};

/// Throws ConfigError naming the offending field.
void validate_config(const RunConfig& config);

/// Pure: the same config and task always give the same manifest.
Manifest build_manifest(const RunConfig& config, const TaskSpec& spec);

/// Builds the manifest and writes it to <out>/manifest.json.
Manifest cmd_perturb(const RunConfig& config);

struct ScoreSummary {
  std::size_t requested = 0;
  std::size_t cached = 0;
  std::size_t backend_calls = 0;
};

/// Scores every (test example, variant) pair for every few-shot seed into
/// <out>/scores/seed<S>.jsonl, plus content-free probes into seed<S>.cf.jsonl when
/// contextual calibration is requested. Resumable.
ScoreSummary cmd_score(const RunConfig& config, std::ostream& progress);

/// Calibrates, predicts, measures sensitivity, ranks and evaluates for every seed,
/// then writes <out>/report.json and <out>/report.txt.
TaskReport cmd_run(const RunConfig& config, std::ostream& progress);

/// Merges task reports into <out>/summary.json and <out>/tables.txt.
std::string cmd_report(std::span<const std::filesystem::path> reports, const std::filesystem::path& out);

std::unique_ptr<Scorer> make_backend(const RunConfig& config, const TaskSpec& spec,
                                     std::span<const LabeledExample> test);

/// POST {url}/v1/paraphrase {"text", "n", "top_p"} -> {"paraphrases": [...]}.
std::vector<std::string> fetch_paraphrases(const std::string& url, const std::string& instruction, std::size_t n);

std::filesystem::path score_cache_path(const RunConfig& config, std::uint64_t seed);
std::filesystem::path content_free_cache_path(const RunConfig& config, std::uint64_t seed);

}  // namespace sensel
