// sensel: perturb | score | run | report

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sensel/error.hpp"
#include "sensel/pipeline.hpp"

namespace {

struct RawOptions {
  std::string task, train, test, out = "sensel_out";
  std::size_t shots = 4;
  std::vector<std::uint64_t> fewshot_seeds{0, 1, 2, 3, 4};
  std::vector<std::string> perturb{"inst-h", "inst-a", "exord"};
  double dropout_rate = 0.2;
  std::size_t n_dropout = 10;
  std::string paraphrase_file, paraphrase_url;
  std::size_t n_paraphrases = 10;
  std::size_t max_perms = 23;
  std::vector<std::string> calibration{"pc"};
  std::vector<std::string> methods{"sensel", "maxprob"};
  std::vector<std::string> cf_inputs;
  bool cf_inputs_set = false;
  std::string backend = "none", endpoint, score_file;
  std::vector<double> synthetic_bias;
  std::size_t parallelism = 1, max_attempts = 3;
  long retry_backoff_ms = 100;
  std::string verbalizer_scoring = "sum";
  std::uint64_t seed = 0;
};

void add_run_options(CLI::App& cmd, RawOptions& o) {
  cmd.add_option("--task", o.task, "task spec (JSON)");
  cmd.add_option("--train", o.train, "training pool (JSONL)");
  cmd.add_option("--test", o.test, "test set (JSONL)");
  cmd.add_option("--shots", o.shots, "demonstrations per prompt")->capture_default_str();
  cmd.add_option("--fewshot-seeds", o.fewshot_seeds, "few-shot sampling seeds")->capture_default_str();
  cmd.add_option("--perturb", o.perturb, "inst-h, inst-a, exord")->capture_default_str();
  cmd.add_option("--dropout-rate", o.dropout_rate)->capture_default_str();
  cmd.add_option("--n-dropout", o.n_dropout)->capture_default_str();
  cmd.add_option("--paraphrase-file", o.paraphrase_file);
  cmd.add_option("--paraphrase-url", o.paraphrase_url);
  cmd.add_option("--n-paraphrases", o.n_paraphrases)->capture_default_str();
  cmd.add_option("--max-perms", o.max_perms)->capture_default_str();
  cmd.add_option("--calibration", o.calibration, "none, cc, pc")->capture_default_str();
  cmd.add_option("--methods", o.methods, "sensel, maxprob")->capture_default_str();
  cmd.add_option("--cf-inputs", o.cf_inputs, "content-free inputs for cc")->each([&o](const std::string&) {
    o.cf_inputs_set = true;
  });
  cmd.add_option("--backend", o.backend, "none, precomputed, remote, synthetic")->capture_default_str();
  cmd.add_option("--endpoint", o.endpoint, "scorer base URL (SENSEL_SCORER_URL overrides)");
  cmd.add_option("--score-file", o.score_file, "precomputed scores (JSONL)");
  cmd.add_option("--synthetic-bias", o.synthetic_bias, "per-label log offsets for the synthetic backend");
  cmd.add_option("--parallelism", o.parallelism)->capture_default_str();
  cmd.add_option("--max-attempts", o.max_attempts)->capture_default_str();
  cmd.add_option("--retry-backoff-ms", o.retry_backoff_ms)->capture_default_str();
  cmd.add_option("--verbalizer-scoring", o.verbalizer_scoring, "sum, mean")->capture_default_str();
  cmd.add_option("--out", o.out)->capture_default_str();
  cmd.add_option("--seed", o.seed, "global seed")->capture_default_str();
}

sensel::RunConfig to_config(const RawOptions& o) {
  sensel::RunConfig c;
  c.task = o.task;
  c.train = o.train;
  c.test = o.test;
  c.shots = o.shots;
  c.fewshot_seeds = o.fewshot_seeds;
  c.perturb.clear();
  for (const auto& p : o.perturb) c.perturb.push_back(sensel::parse_perturb_kind(p));
  c.dropout_rate = o.dropout_rate;
  c.n_dropout = o.n_dropout;
  if (!o.paraphrase_file.empty()) c.paraphrase_file = o.paraphrase_file;
  c.paraphrase_url = o.paraphrase_url;
  c.n_paraphrases = o.n_paraphrases;
  c.max_perms = o.max_perms;
  c.calibration.clear();
  for (const auto& k : o.calibration) c.calibration.push_back(sensel::parse_calibration_kind(k));
  c.methods.clear();
  for (const auto& m : o.methods) c.methods.push_back(sensel::parse_selection_method(m));
  if (o.cf_inputs_set) c.content_free_inputs = o.cf_inputs;
  c.backend = sensel::parse_backend_kind(o.backend);
  c.endpoint = o.endpoint;
  if (!o.score_file.empty()) c.score_file = o.score_file;
  c.synthetic_bias = o.synthetic_bias;
  c.parallelism = o.parallelism;
  c.max_attempts = o.max_attempts;
  c.retry_backoff = std::chrono::milliseconds(o.retry_backoff_ms);
  c.verbalizer_scoring = sensel::parse_verbalizer_scoring(o.verbalizer_scoring);
  c.out = o.out;
  c.seed = o.seed;
  return c;
}

int exit_code(sensel::ErrorKind kind) {
  switch (kind) {
    case sensel::ErrorKind::Config: return 2;
    case sensel::ErrorKind::Transport:
    case sensel::ErrorKind::Protocol: return 3;
    default: return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective prediction from prompt sensitivity"};
  app.set_config("--config", "", "TOML/INI file; put options under [perturb], [score], [run] or [report]");
  app.require_subcommand(1);

  RawOptions opts;
  auto* perturb = app.add_subcommand("perturb", "build the prompt variant manifest");
  auto* score = app.add_subcommand("score", "score every test example under every variant");
  auto* run = app.add_subcommand("run", "calibrate, select and evaluate");
  for (auto* cmd : {perturb, score, run}) {
    add_run_options(*cmd, opts);
    cmd->fallthrough();
  }

  std::vector<std::string> report_inputs;
  std::string report_out = "sensel_report";
  auto* report = app.add_subcommand("report", "merge task reports into tables");
  report->add_option("inputs", report_inputs, "report.json files")->required();
  report->add_option("--out", report_out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*report) {
      std::vector<std::filesystem::path> paths(report_inputs.begin(), report_inputs.end());
      std::cout << sensel::cmd_report(paths, report_out);
      return 0;
    }
    const sensel::RunConfig config = to_config(opts);
    if (*perturb) {
      const auto manifest = sensel::cmd_perturb(config);
      std::cout << "wrote " << (config.out / "manifest.json").string() << " (" << manifest.all_variants().size()
                << " prompts incl. base)\n";
    } else if (*score) {
      const auto summary = sensel::cmd_score(config, std::cerr);
      std::cout << summary.requested << " entries, " << summary.cached << " cached, " << summary.backend_calls
                << " new calls\n";
    } else if (*run) {
      sensel::cmd_run(config, std::cerr);
      std::cout << "wrote " << (config.out / "report.json").string() << " and "
                << (config.out / "report.txt").string() << '\n';
    }
  } catch (const sensel::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
