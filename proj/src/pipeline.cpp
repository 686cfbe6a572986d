#include "sensel/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "sensel/error.hpp"
#include "sensel/eval.hpp"

namespace sensel {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::None: return "none";
    case BackendKind::Precomputed: return "precomputed";
    case BackendKind::Remote: return "remote";
    case BackendKind::Synthetic: return "synthetic";
  }
  return "none";
}

BackendKind parse_backend_kind(std::string_view name) {
  for (auto kind : {BackendKind::None, BackendKind::Precomputed, BackendKind::Remote, BackendKind::Synthetic}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("backend: unknown backend '" + std::string(name) +
                    "' (expected none, precomputed, remote or synthetic)");
}

void validate_config(const RunConfig& config) {
  const auto require_file = [](const fs::path& path, const char* field) {
    if (path.empty()) throw ConfigError(std::string(field) + ": path is required");
    if (!fs::exists(path)) throw ConfigError(std::string(field) + ": " + path.string() + " does not exist");
  };
  require_file(config.task, "task");
  require_file(config.train, "train");
  require_file(config.test, "test");
  if (config.shots < 1) throw ConfigError("shots: must be at least 1");
  if (config.fewshot_seeds.empty()) throw ConfigError("seeds: at least one few-shot seed is required");
  if (config.perturb.empty()) throw ConfigError("perturb: at least one perturbation kind is required");
  if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0)) {
    throw ConfigError("dropout-rate: must lie in [0, 1)");
  }
  if (config.paraphrase_file) require_file(*config.paraphrase_file, "paraphrase-file");
  if (config.max_perms < 1) throw ConfigError("max-perms: must be at least 1");
  if (config.calibration.empty()) throw ConfigError("calibration: at least one calibration kind is required");
  if (config.methods.empty()) throw ConfigError("methods: at least one selection method is required");
  if (config.parallelism < 1) throw ConfigError("parallelism: must be at least 1");
  const bool wants_cc = std::find(config.calibration.begin(), config.calibration.end(),
                                  CalibrationKind::Contextual) != config.calibration.end();
  if (wants_cc && config.content_free_inputs.empty()) {
    throw ConfigError("cf-inputs: contextual calibration needs at least one content-free input");
  }
  if (config.backend == BackendKind::Precomputed) {
    if (!config.score_file) throw ConfigError("score-file: required by the precomputed backend");
    require_file(*config.score_file, "score-file");
  }
  if (config.out.empty()) throw ConfigError("out: output directory is required");
}

fs::path score_cache_path(const RunConfig& config, std::uint64_t seed) {
  return config.out / "scores" / ("seed" + std::to_string(seed) + ".jsonl");
}

fs::path content_free_cache_path(const RunConfig& config, std::uint64_t seed) {
  return config.out / "scores" / ("seed" + std::to_string(seed) + ".cf.jsonl");
}

std::vector<std::string> fetch_paraphrases(const std::string& url, const std::string& instruction, std::size_t n) {
  std::string origin = url;
  std::string prefix;
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start != std::string::npos) {
    origin = url.substr(0, path_start);
    prefix = url.substr(path_start);
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  httplib::Client client(origin);
  const json body = {{"text", instruction}, {"n", n}, {"top_p", 0.9}};
  auto res = client.Post(prefix + "/v1/paraphrase", body.dump(), "application/json");
  if (!res) throw TransportError("paraphrase service at " + url + " unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw TransportError("paraphrase service returned HTTP " + std::to_string(res->status));
  try {
    return json::parse(res->body).at("paraphrases").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("paraphrase response: ") + e.what());
  }
}

namespace {

std::vector<std::string> resolve_paraphrases(const RunConfig& config, const TaskSpec& spec) {
  const bool wants_auto = std::find(config.perturb.begin(), config.perturb.end(), PerturbKind::InstAuto) !=
                          config.perturb.end();
  if (!wants_auto) return {};

  std::optional<fs::path> source = config.paraphrase_file;
  const fs::path fetched = config.out / "paraphrases.jsonl";
  if (!source && fs::exists(fetched)) source = fetched;
  if (!source && !config.paraphrase_url.empty()) {
    fs::create_directories(config.out);
    std::vector<Paraphrase> records;
    for (auto& text : fetch_paraphrases(config.paraphrase_url, spec.instructions[0], config.n_paraphrases)) {
      records.push_back(Paraphrase{0, std::move(text)});
    }
    write_paraphrases(fetched, records);
    source = fetched;
  }
  if (!source) return {};

  std::vector<std::string> out;
  for (auto& p : load_paraphrases(*source)) {
    if (p.instruction_index == 0) out.push_back(std::move(p.text));
  }
  return out;
}

Manifest manifest_with_paraphrases(const RunConfig& config, const TaskSpec& spec,
                                   std::span<const std::string> paraphrases) {
  Manifest m;
  m.task = spec.name;
  m.shots = config.shots;
  m.base = base_variant(spec, config.shots);
  for (auto kind : config.perturb) {
    if (m.find_set(kind)) continue;
    switch (kind) {
      case PerturbKind::InstHuman:
        m.sets.push_back(human_instruction_set(spec, config.shots));
        break;
      case PerturbKind::InstAuto:
        m.sets.push_back(build_inst_a(spec, config.shots, config.n_dropout, paraphrases, config.dropout_rate,
                                      config.seed));
        break;
      case PerturbKind::ExOrder:
        m.sets.push_back(example_order_perturbations(spec, config.shots, config.max_perms, config.seed));
        break;
    }
  }
  return m;
}

Manifest load_or_build_manifest(const RunConfig& config, const TaskSpec& spec) {
  const fs::path path = config.out / "manifest.json";
  if (fs::exists(path)) {
    Manifest m = load_manifest(path);
    if (m.task != spec.name || m.shots != config.shots) {
      throw ConfigError("manifest " + path.string() + " was built for a different task or shot count; rerun perturb");
    }
    return m;
  }
  fs::create_directories(config.out);
  Manifest m = manifest_with_paraphrases(config, spec, resolve_paraphrases(config, spec));
  write_manifest(path, m);
  return m;
}

std::vector<ScoreRequest> test_requests(const TaskSpec& spec, const FewShotSet& shots,
                                        std::span<const PromptVariant> variants,
                                        std::span<const LabeledExample> test) {
  std::vector<ScoreRequest> requests;
  requests.reserve(test.size() * variants.size());
  for (const auto& ex : test) {
    for (const auto& v : variants) {
      requests.push_back(ScoreRequest{ScoreKey{ex.id, v.variant_id}, shots.seed,
                                      assemble_prompt(spec, v.instruction, shots.examples, v.ordering, ex.text)});
    }
  }
  return requests;
}

std::vector<ScoreRequest> all_content_free_requests(const RunConfig& config, const TaskSpec& spec,
                                                    const FewShotSet& shots,
                                                    std::span<const PromptVariant> variants) {
  std::vector<ScoreRequest> requests;
  for (const auto& v : variants) {
    auto batch = content_free_requests(spec, shots, v, config.content_free_inputs);
    std::move(batch.begin(), batch.end(), std::back_inserter(requests));
  }
  return requests;
}

bool wants(const RunConfig& config, CalibrationKind kind) {
  return std::find(config.calibration.begin(), config.calibration.end(), kind) != config.calibration.end();
}

bool wants(const RunConfig& config, SelectionMethod method) {
  return std::find(config.methods.begin(), config.methods.end(), method) != config.methods.end();
}

// Scores through the backend when there is one, otherwise reads the cache and
// insists it is complete.
ScoreMatrix obtain_scores(const RunConfig& config, Scorer* backend, std::span<const ScoreRequest> requests,
                          const TaskSpec& spec, const fs::path& cache_path, BatchStats* stats) {
  fs::create_directories(cache_path.parent_path());
  ScoreCache cache(cache_path);
  if (backend) {
    BatchOptions options;
    options.parallelism = config.parallelism;
    options.max_attempts = config.max_attempts;
    options.backoff = config.retry_backoff;
    options.verbalizer_scoring = config.verbalizer_scoring;
    return batch_score(*backend, requests, spec.verbalizers, &cache, options, stats);
  }
  ScoreMatrix matrix;
  matrix.info.backend = "cache";
  std::size_t missing = 0;
  for (const auto& r : requests) {
    auto hit = cache.find(r.key);
    if (!hit || hit->size() != spec.verbalizers.size()) {
      ++missing;
      continue;
    }
    matrix.insert(r.key, LabelScores::from_log_scores(std::move(*hit)));
  }
  if (missing > 0) {
    throw ConfigError("backend: " + std::to_string(missing) + " of " + std::to_string(requests.size()) +
                      " scores missing from " + cache_path.string() +
                      "; run `sensel score` first or pass --backend");
  }
  if (stats) {
    stats->requested = requests.size();
    stats->cached = requests.size();
  }
  return matrix;
}

std::string method_file_name(std::optional<PerturbKind> set) {
  return set ? "sensel-" + std::string(to_string(*set)) + ".jsonl" : "maxprob.jsonl";
}

CalibrationResult evaluate_calibration(const RunConfig& config, CalibrationKind calibration, const Manifest& manifest,
                                       std::span<const LabeledExample> test, std::size_t num_labels,
                                       const std::map<std::string, std::vector<LabelScores>>& calibrated,
                                       const fs::path& records_dir) {
  CalibrationResult result;
  result.calibration = calibration;

  const std::size_t n = test.size();
  const auto& base_scores = calibrated.at(manifest.base.variant_id);
  std::vector<std::size_t> base_preds(n), golds(n);
  std::vector<bool> correct(n);
  for (std::size_t i = 0; i < n; ++i) {
    base_preds[i] = predict_label(base_scores[i]);
    golds[i] = test[i].label;
    correct[i] = base_preds[i] == golds[i];
  }
  result.f1_full = f1_macro(base_preds, golds, num_labels);

  fs::create_directories(records_dir);
  const auto evaluate = [&](std::vector<SelectionRecord>& records, std::optional<PerturbKind> set) {
    apply_threshold(records, -std::numeric_limits<double>::infinity());
    const auto curve = coverage_curve(records, num_labels);
    const std::string label = method_label(set);
    result.auc[label] = auc_f1_coverage(curve);
    result.coverage_at_f1[label] = coverage_at_f1_grid(curve);
    write_records(records_dir / method_file_name(set), records);
  };

  for (const auto& set : manifest.sets) {
    std::vector<double> sens(n);
    std::vector<SelectionRecord> records;
    records.reserve(n);
    std::vector<std::size_t> perturbed(set.variants.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t v = 0; v < set.variants.size(); ++v) {
        perturbed[v] = predict_label(calibrated.at(set.variants[v].variant_id)[i]);
      }
      records.push_back(make_record(test[i].id, golds[i], base_preds[i], base_scores[i], perturbed,
                                    SelectionMethod::SenSel));
      sens[i] = records.back().sensitivity;
    }
    double total = 0.0;
    for (double s : sens) total += s;
    result.sensitivity[set.kind] = total / static_cast<double>(n);
    result.correlation[set.kind] =
        n >= 3 ? sensitivity_accuracy_correlation(sens, correct) : PearsonResult{};
    if (wants(config, SelectionMethod::SenSel)) evaluate(records, set.kind);
  }

  if (wants(config, SelectionMethod::MaxProb)) {
    std::vector<SelectionRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      records.push_back(make_record(test[i].id, golds[i], base_preds[i], base_scores[i], {}, SelectionMethod::MaxProb));
    }
    evaluate(records, std::nullopt);
  }
  return result;
}

}  // namespace

Manifest build_manifest(const RunConfig& config, const TaskSpec& spec) {
  std::vector<std::string> paraphrases;
  if (config.paraphrase_file) {
    for (auto& p : load_paraphrases(*config.paraphrase_file)) {
      if (p.instruction_index == 0) paraphrases.push_back(std::move(p.text));
    }
  }
  return manifest_with_paraphrases(config, spec, paraphrases);
}

Manifest cmd_perturb(const RunConfig& config) {
  validate_config(config);
  const TaskSpec spec = load_task_spec(config.task);
  fs::create_directories(config.out);
  Manifest m = manifest_with_paraphrases(config, spec, resolve_paraphrases(config, spec));
  write_manifest(config.out / "manifest.json", m);
  return m;
}

std::unique_ptr<Scorer> make_backend(const RunConfig& config, const TaskSpec& spec,
                                     std::span<const LabeledExample> test) {
  switch (config.backend) {
    case BackendKind::None: return nullptr;
    case BackendKind::Precomputed:
      if (!config.score_file) throw ConfigError("score-file: required by the precomputed backend");
      return PrecomputedScorer::from_file(*config.score_file);
    case BackendKind::Remote: {
      std::string endpoint = config.endpoint;
      if (const char* env = std::getenv("SENSEL_SCORER_URL"); env && *env) endpoint = env;
      if (endpoint.empty()) throw ConfigError("endpoint: the remote backend needs --endpoint or SENSEL_SCORER_URL");
      return std::make_unique<RemoteScorer>(endpoint);
    }
    case BackendKind::Synthetic: {
      std::map<std::string, SyntheticExample> examples;
      for (const auto& ex : test) {
        examples.emplace(ex.id, SyntheticExample{ex.label, SyntheticScorer::default_difficulty(config.seed, ex.id)});
      }
      return std::make_unique<SyntheticScorer>(std::move(examples), spec.num_labels(), config.seed,
                                               config.synthetic_bias);
    }
  }
  return nullptr;
}

ScoreSummary cmd_score(const RunConfig& config, std::ostream& progress) {
  validate_config(config);
  const TaskSpec spec = load_task_spec(config.task);
  const auto train = load_dataset(config.train, spec.num_labels());
  const auto test = load_dataset(config.test, spec.num_labels());
  auto backend = make_backend(config, spec, test);
  if (!backend) throw ConfigError("backend: `score` needs a backend (--backend precomputed|remote|synthetic)");

  const Manifest manifest = load_or_build_manifest(config, spec);
  const auto variants = manifest.all_variants();
  ScoreSummary summary;
  for (std::uint64_t seed : config.fewshot_seeds) {
    const FewShotSet shots = sample_fewshot(train, config.shots, seed);
    BatchStats stats;
    const auto requests = test_requests(spec, shots, variants, test);
    obtain_scores(config, backend.get(), requests, spec, score_cache_path(config, seed), &stats);
    progress << "seed " << seed << ": " << test.size() << " examples x " << variants.size() << " prompts = "
             << stats.requested << " entries, " << stats.cached << " cached, " << stats.backend_calls
             << " new calls\n";
    summary.requested += stats.requested;
    summary.cached += stats.cached;
    summary.backend_calls += stats.backend_calls;

    if (wants(config, CalibrationKind::Contextual)) {
      BatchStats cf_stats;
      const auto cf = all_content_free_requests(config, spec, shots, variants);
      obtain_scores(config, backend.get(), cf, spec, content_free_cache_path(config, seed), &cf_stats);
      progress << "seed " << seed << ": " << cf_stats.requested << " content-free probes, " << cf_stats.cached
               << " cached, " << cf_stats.backend_calls << " new calls\n";
      summary.requested += cf_stats.requested;
      summary.cached += cf_stats.cached;
      summary.backend_calls += cf_stats.backend_calls;
    }
  }
  return summary;
}

TaskReport cmd_run(const RunConfig& config, std::ostream& progress) {
  validate_config(config);
  const TaskSpec spec = load_task_spec(config.task);
  const auto train = load_dataset(config.train, spec.num_labels());
  const auto test = load_dataset(config.test, spec.num_labels());
  if (test.empty()) throw ValidationError("test: dataset is empty");
  auto backend = make_backend(config, spec, test);
  const Manifest manifest = load_or_build_manifest(config, spec);
  const auto variants = manifest.all_variants();
  const std::size_t num_labels = spec.num_labels();

  TaskReport report;
  report.task = spec.name;
  report.num_test = test.size();
  report.shots = config.shots;

  for (std::uint64_t seed : config.fewshot_seeds) {
    const FewShotSet shots = sample_fewshot(train, config.shots, seed);
    const auto requests = test_requests(spec, shots, variants, test);
    BatchStats stats;
    const ScoreMatrix scores =
        obtain_scores(config, backend.get(), requests, spec, score_cache_path(config, seed), &stats);
    progress << "seed " << seed << ": " << stats.requested << " scores (" << stats.backend_calls
             << " new backend calls)\n";

    std::optional<ScoreMatrix> cf_scores;
    if (wants(config, CalibrationKind::Contextual)) {
      const auto cf = all_content_free_requests(config, spec, shots, variants);
      cf_scores = obtain_scores(config, backend.get(), cf, spec, content_free_cache_path(config, seed), nullptr);
    }

    SeedResult seed_result{seed, {}};
    for (auto calibration : config.calibration) {
      std::map<std::string, CalibrationModel> models;
      std::map<std::string, std::vector<LabelScores>> calibrated;
      for (const auto& v : variants) {
        std::vector<LabelScores> raw;
        raw.reserve(test.size());
        for (const auto& ex : test) raw.push_back(scores.at(ScoreKey{ex.id, v.variant_id}));

        CalibrationModel model = NoCalibration{};
        if (calibration == CalibrationKind::Contextual) {
          std::vector<LabelScores> probes;
          for (std::size_t i = 0; i < config.content_free_inputs.size(); ++i) {
            probes.push_back(cf_scores->at(ScoreKey{"__cf__" + std::to_string(i), v.variant_id}));
          }
          model = cc_from_distributions(probes);
        } else if (calibration == CalibrationKind::Prototypical) {
          GmmConfig gmm;
          gmm.seed = config.seed;
          model = fit_prototypical(raw, gmm);
        }
        auto& out = calibrated[v.variant_id];
        out.reserve(raw.size());
        for (const auto& r : raw) out.push_back(apply_calibration(model, r));
        models.emplace(v.variant_id, std::move(model));
      }

      const fs::path calib_dir = config.out / "calibration";
      fs::create_directories(calib_dir);
      write_calibration_models(calib_dir / ("seed" + std::to_string(seed) + "_" + std::string(to_string(calibration)) + ".json"),
                               models);
      const fs::path records_dir =
          config.out / "records" / ("seed" + std::to_string(seed)) / std::string(to_string(calibration));
      seed_result.results.push_back(
          evaluate_calibration(config, calibration, manifest, test, num_labels, calibrated, records_dir));
      progress << "seed " << seed << ", calibration " << to_string(calibration) << ": done\n";
    }
    report.per_seed.push_back(std::move(seed_result));
  }

  report.results = average_over_seeds(report.per_seed, report.num_test);

  {
    std::ofstream out(config.out / "report.json", std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + (config.out / "report.json").string());
    out << task_report_to_json(report);
  }
  {
    std::ofstream out(config.out / "report.txt", std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + (config.out / "report.txt").string());
    out << render_tables(std::span<const TaskReport>(&report, 1));
  }
  return report;
}

std::string cmd_report(std::span<const fs::path> reports, const fs::path& out) {
  if (reports.empty()) throw ConfigError("inputs: at least one report.json is required");
  std::vector<TaskReport> loaded;
  json merged = json::array();
  for (const auto& path : reports) {
    if (!fs::exists(path)) throw ConfigError("inputs: " + path.string() + " does not exist");
    loaded.push_back(load_task_report(path));
    merged.push_back(json::parse(task_report_to_json(loaded.back())));
  }
  const std::string tables = render_tables(loaded);
  fs::create_directories(out);
  {
    std::ofstream f(out / "summary.json", std::ios::binary | std::ios::trunc);
    f << json{{"tasks", merged}}.dump(2) << '\n';
  }
  {
    std::ofstream f(out / "tables.txt", std::ios::binary | std::ios::trunc);
    f << tables;
  }
  return tables;
}

}  // namespace sensel
