// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sensel/assignment.hpp"
#include "sensel/calibrate.hpp"
#include "sensel/eval.hpp"
#include "sensel/gmm.hpp"
#include "sensel/pipeline.hpp"
#include "sensel/rng.hpp"
#include "sensel/select.hpp"
#include "sensel/stats.hpp"

using namespace sensel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void check(const char* name, double time_limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (time_limit_s > 0 && elapsed >= time_limit_s) {
    out.ok = false;
    out.detail += " [over the " + std::to_string(time_limit_s) + " s limit]";
  }
  std::printf("%s  %-28s %s (%.3f s)\n", out.ok ? "PASS" : "FAIL", name, out.detail.c_str(), elapsed);
  std::fflush(stdout);
  failures += !out.ok;
}

std::string fmt(const char* pattern, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, value);
  return buf;
}

std::vector<double> simplex_point(Rng& rng, std::size_t dim) {
  std::vector<double> p(dim);
  double total = 0.0;
  for (auto& v : p) {
    v = -std::log(1.0 - rng.uniform());
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

std::vector<Point> noisy_clusters(Rng& rng, const std::vector<Point>& means, std::size_t total, double sd,
                                  std::vector<std::size_t>& source) {
  std::vector<Point> points;
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t c = i % means.size();
    Point p(means[c].size());
    double sum = 0.0;
    for (std::size_t d = 0; d < p.size(); ++d) {
      p[d] = std::max(1e-6, means[c][d] + sd * rng.normal());
      sum += p[d];
    }
    for (auto& v : p) v /= sum;
    points.push_back(std::move(p));
    source.push_back(c);
  }
  return points;
}

Outcome sensitivity_oracle() {
  Rng rng(101);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t L = 2 + rng.index(5);
    const std::size_t n = 1 + rng.index(24);
    const std::size_t base = rng.index(L);
    std::vector<std::size_t> preds(n);
    std::size_t disagree = 0;
    for (auto& p : preds) {
      p = rng.index(L);
      disagree += p != base;
    }
    if (sensitivity(base, preds) != static_cast<double>(disagree) / static_cast<double>(n)) {
      return {false, "mismatch on case " + std::to_string(i)};
    }
  }
  return {true, "1000 cases exact"};
}

Outcome cc_correctness() {
  Rng rng(7);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t L = 2 + rng.index(6);
    const auto raw = LabelScores::from_probs(simplex_point(rng, L));
    const auto out = apply_cc(CCModel{std::vector<double>(L, 1.0 / static_cast<double>(L))}, raw);
    for (std::size_t l = 0; l < L; ++l) worst = std::max(worst, std::abs(out.probs()[l] - raw.probs()[l]));
  }
  const auto flipped = apply_cc(CCModel{{0.8, 0.2}}, LabelScores::from_probs({0.5, 0.5}));
  const double err = std::max(std::abs(flipped.probs()[0] - 0.2), std::abs(flipped.probs()[1] - 0.8));
  return {worst <= 1e-12 && err <= 1e-12, "identity err " + fmt("%.1e", worst) + ", prior example err " + fmt("%.1e", err)};
}

Outcome em_monotonicity() {
  Rng rng(202);
  double worst_drop = 0.0;
  std::size_t runs = 0;
  for (int dataset = 0; dataset < 50; ++dataset) {
    const std::size_t L = 2 + static_cast<std::size_t>(dataset % 3);
    std::vector<Point> means;
    for (std::size_t c = 0; c < L; ++c) means.push_back(simplex_point(rng, L));
    std::vector<std::size_t> source;
    const auto points = noisy_clusters(rng, means, 500, 0.05 + 0.1 * rng.uniform(), source);
    GmmConfig config;
    config.seed = rng.next() % 1000;
    for (std::size_t r = 0; r < config.restarts; ++r) {
      const auto model = run_em(points, config, config.seed + r);
      ++runs;
      for (std::size_t i = 1; i < model.trace.size(); ++i) {
        worst_drop = std::max(worst_drop, model.trace[i - 1] - model.trace[i]);
      }
    }
  }
  return {worst_drop <= 1e-9, std::to_string(runs) + " EM runs, largest drop " + fmt("%.2e", worst_drop)};
}

Outcome pc_recovery() {
  // Pairwise infinity-distances: 0.5, 0.5, 0.55.
  const std::vector<Point> base_means{{0.6, 0.3, 0.1}, {0.1, 0.7, 0.2}, {0.25, 0.15, 0.6}};
  double worst_accuracy = 1.0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(300 + trial);
    // Shuffle which generative cluster carries which label.
    std::vector<std::size_t> perm{0, 1, 2};
    for (std::size_t i = 2; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    std::vector<Point> means(3);
    for (std::size_t c = 0; c < 3; ++c) means[perm[c]] = base_means[c];
    std::vector<std::size_t> source;
    const auto points = noisy_clusters(rng, means, 600, 0.05, source);
    std::vector<LabelScores> scores;
    for (const auto& p : points) scores.push_back(LabelScores::from_probs(p));
    GmmConfig config;
    config.seed = trial;
    const auto model = fit_prototypical(scores, config);

    // Generative label of a cluster = the label its mean puts most mass on.
    for (std::size_t j = 0; j < 3; ++j) {
      std::size_t nearest = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < 3; ++c) {
        double d = 0.0;
        for (std::size_t k = 0; k < 3; ++k) d = std::max(d, std::abs(model.gmm.means[j][k] - means[c][k]));
        if (d < best) best = d, nearest = c;
      }
      const auto label = static_cast<std::size_t>(
          std::max_element(means[nearest].begin(), means[nearest].end()) - means[nearest].begin());
      if (model.assignment[j] != label) return {false, "trial " + std::to_string(trial) + ": wrong cluster mapping"};
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& m = means[source[i]];
      const auto label = static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
      correct += predict_label(apply_pc(model, scores[i])) == label;
    }
    worst_accuracy = std::min(worst_accuracy, static_cast<double>(correct) / static_cast<double>(points.size()));
  }
  return {worst_accuracy >= 0.95, "10 datasets, mapping recovered, worst accuracy " + fmt("%.4f", worst_accuracy)};
}

Outcome hungarian_oracle() {
  Rng rng(404);
  for (std::size_t n = 2; n <= 6; ++n) {
    for (int trial = 0; trial < 200; ++trial) {
      WeightMatrix w(n, std::vector<double>(n));
      for (auto& row : w) {
        for (auto& x : row) x = rng.uniform();
      }
      std::vector<std::size_t> p(n);
      std::iota(p.begin(), p.end(), 0);
      double best = -1.0;
      do {
        best = std::max(best, assignment_weight(w, p));
      } while (std::next_permutation(p.begin(), p.end()));
      if (assignment_weight(w, max_weight_assignment(w)) != best) {
        return {false, "L=" + std::to_string(n) + " trial " + std::to_string(trial)};
      }
    }
  }
  return {true, "1000 matrices, L=2..6, exact"};
}

double macro_f1_by_counting(const std::vector<std::size_t>& p, const std::vector<std::size_t>& g, std::size_t L) {
  double total = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < L; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      tp += p[i] == c && g[i] == c;
      fp += p[i] == c && g[i] != c;
      fn += p[i] != c && g[i] == c;
    }
    if (tp + fp + fn == 0) continue;
    ++classes;
    total += 2 * tp / (2 * tp + fp + fn);
  }
  return classes ? total / classes : 0.0;
}

Outcome auc_oracle() {
  Rng rng(505);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t L = 2 + rng.index(4), n = 1 + rng.index(200);
    std::vector<SelectionRecord> records(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& r = records[i];
      r.example_id = "e" + std::to_string(rng.index(10000)) + "-" + std::to_string(i);
      r.gold = rng.index(L);
      r.base_prediction = rng.uniform() < 0.6 ? r.gold : rng.index(L);
      r.correct = r.base_prediction == r.gold;
      r.confidence = -static_cast<double>(rng.index(6)) / 5.0;
      r.maxprob = static_cast<double>(rng.index(4)) / 3.0;
    }
    // Independent ranking: sort copies with an explicit comparator.
    auto sorted = records;
    std::sort(sorted.begin(), sorted.end(), [](const SelectionRecord& a, const SelectionRecord& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      if (a.maxprob != b.maxprob) return a.maxprob > b.maxprob;
      return a.example_id < b.example_id;
    });
    std::vector<std::size_t> p, g;
    double sum = 0.0;
    for (const auto& r : sorted) {
      p.push_back(r.base_prediction);
      g.push_back(r.gold);
      sum += macro_f1_by_counting(p, g, L);
    }
    const auto curve = coverage_curve(records, L);
    worst = std::max(worst, std::abs(auc_f1_coverage(curve) - sum / static_cast<double>(n)));
    double last = 1.0;
    for (int t = 0; t <= 100; ++t) {
      const double c = coverage_at_f1(curve, t / 100.0);
      if (c > last) return {false, "coverage_at_f1 increased with the threshold"};
      last = c;
    }
  }
  return {worst <= 1e-12, "500 record sets, max error " + fmt("%.1e", worst) + ", coverage_at_f1 monotone"};
}

Outcome correlation_oracle() {
  Rng rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 3 + rng.index(300);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = 0.5 * x[i] + rng.normal();
    }
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    worst = std::max(worst, std::abs(pearson(x, y).r - sxy / std::sqrt(sxx * syy)));
  }
  const std::vector<double> constant(20, 0.0);
  std::vector<bool> correct(20);
  for (std::size_t i = 0; i < 20; ++i) correct[i] = i % 3 == 0;
  const bool undefined = !sensitivity_accuracy_correlation(constant, correct).defined;
  return {worst <= 1e-12 && undefined,
          "500 samples, max error " + fmt("%.1e", worst) + (undefined ? ", zero variance undefined" : ", zero variance DEFINED")};
}

// A 500-example synthetic task on disk.
RunConfig synthetic_config(const fs::path& dir) {
  fs::create_directories(dir);
  TaskSpec spec;
  spec.name = "synthetic";
  spec.labels = {"a", "b", "c"};
  spec.verbalizers = {"alpha", "beta", "gamma"};
  spec.instructions = {"Pick the category.", "Which category fits?", "Choose a, b or c.", "Label this input.",
                       "Assign the right class.", "Classify the text."};
  spec.prompt_template = "{instruction}\n{input}\nAnswer: {label}";
  {
    std::ofstream(dir / "task.json") << task_spec_to_json(spec);
  }
  Rng rng(2023);
  const auto make = [&](const std::string& prefix, std::size_t n) {
    std::vector<LabeledExample> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back({prefix + std::to_string(i), "input " + std::to_string(i), rng.index(3)});
    return rows;
  };
  write_dataset(dir / "train.jsonl", make("train-", 40));
  write_dataset(dir / "test.jsonl", make("test-", 500));

  RunConfig config;
  config.task = dir / "task.json";
  config.train = dir / "train.jsonl";
  config.test = dir / "test.jsonl";
  config.calibration = {CalibrationKind::None, CalibrationKind::Contextual, CalibrationKind::Prototypical};
  config.backend = BackendKind::Synthetic;
  config.synthetic_bias = {0.5, 0.0, -0.2};
  config.seed = 11;
  config.out = dir / "out";
  return config;
}

Outcome end_to_end(const fs::path& scratch) {
  const auto config = synthetic_config(scratch / "e2e");
  std::ostringstream log;
  const auto report = cmd_run(config, log);
  double worst_r = -1.0, worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& res : report.results) {
    for (const auto& [kind, corr] : res.correlation) {
      if (!corr.defined) return {false, "undefined correlation"};
      worst_r = std::max(worst_r, corr.r);
    }
    for (const auto& [label, auc] : res.auc) {
      if (label != "MaxProb") worst_margin = std::min(worst_margin, auc - res.auc.at("MaxProb"));
    }
  }
  return {worst_r <= -0.2 && worst_margin >= 0.0,
          "500 examples x 5 seeds x 3 calibrations: max r " + fmt("%.3f", worst_r) + ", min SenSel-MaxProb AUC gap " +
              fmt("%.3f", worst_margin)};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism(const fs::path& scratch) {
  auto a = synthetic_config(scratch / "det-a");
  a.fewshot_seeds = {0, 1};
  a.parallelism = 1;
  auto b = synthetic_config(scratch / "det-b");
  b.fewshot_seeds = {0, 1};
  b.parallelism = 8;
  std::ostringstream log;
  cmd_run(a, log);
  const auto first = slurp(a.out / "report.json");
  const auto first_txt = slurp(a.out / "report.txt");
  cmd_run(a, log);
  if (slurp(a.out / "report.json") != first || slurp(a.out / "report.txt") != first_txt) {
    return {false, "report changed between identical runs"};
  }
  cmd_run(b, log);
  for (std::uint64_t seed : a.fewshot_seeds) {
    if (slurp(score_cache_path(a, seed)) != slurp(score_cache_path(b, seed))) {
      return {false, "score cache differs between parallelism 1 and 8"};
    }
  }
  if (slurp(b.out / "report.json") != first) return {false, "report differs between parallelism 1 and 8"};
  return {true, "reports byte-identical across reruns; caches identical at parallelism 1 and 8"};
}

}  // namespace

int main() {
  const fs::path scratch = fs::temp_directory_path() / "sensel-acceptance";
  fs::remove_all(scratch);

  check("sensitivity-oracle", 1.0, sensitivity_oracle);
  check("cc-correctness", 0.0, cc_correctness);
  check("em-monotonicity", 30.0, em_monotonicity);
  check("pc-recovery", 10.0, pc_recovery);
  check("hungarian-oracle", 0.0, hungarian_oracle);
  check("auc-oracle", 0.0, auc_oracle);
  check("correlation-oracle", 0.0, correlation_oracle);
  check("end-to-end-synthetic", 30.0, [&] { return end_to_end(scratch); });
  check("determinism", 0.0, [&] { return determinism(scratch); });

  fs::remove_all(scratch);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures;
}
