#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "sensel/assignment.hpp"
#include "sensel/calibrate.hpp"
#include "sensel/error.hpp"
#include "sensel/gmm.hpp"
#include "support.hpp"

using namespace sensel;

namespace {

double brute_force_best(const WeightMatrix& w) {
  std::vector<std::size_t> p(w.size());
  std::iota(p.begin(), p.end(), 0);
  double best = -std::numeric_limits<double>::infinity();
  do {
    best = std::max(best, assignment_weight(w, p));
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

std::vector<std::size_t> brute_force_lexmin(const WeightMatrix& w) {
  const double best = brute_force_best(w);
  std::vector<std::size_t> p(w.size());
  std::iota(p.begin(), p.end(), 0);
  do {
    if (assignment_weight(w, p) == best) return p;
  } while (std::next_permutation(p.begin(), p.end()));
  return {};
}

void expect_distribution(const std::vector<double>& p) {
  double total = 0.0;
  for (double v : p) {
    EXPECT_GE(v, 0.0);
    total += v;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

// Points around the given simplex means with isotropic noise, clipped and renormalized.
std::vector<Point> cluster_points(Rng& rng, const std::vector<Point>& means, std::size_t per_cluster, double sd,
                                  std::vector<std::size_t>* labels = nullptr) {
  std::vector<Point> points;
  for (std::size_t c = 0; c < means.size(); ++c) {
    for (std::size_t i = 0; i < per_cluster; ++i) {
      Point p(means[c].size());
      double total = 0.0;
      for (std::size_t d = 0; d < p.size(); ++d) {
        p[d] = std::max(1e-4, means[c][d] + sd * rng.normal());
        total += p[d];
      }
      for (auto& v : p) v /= total;
      points.push_back(std::move(p));
      if (labels) labels->push_back(c);
    }
  }
  return points;
}

}  // namespace

TEST(ContextualCalibration, PriorIsMeanOfProbeDistributions) {
  const std::vector<LabelScores> probes{LabelScores::from_probs({0.9, 0.1}), LabelScores::from_probs({0.7, 0.3})};
  const auto model = cc_from_distributions(probes);
  EXPECT_NEAR(model.prior[0], 0.8, 1e-12);
  EXPECT_NEAR(model.prior[1], 0.2, 1e-12);
  const std::vector<LabelScores> uniform(3, LabelScores::from_probs({0.25, 0.25, 0.25, 0.25}));
  for (double p : cc_from_distributions(uniform).prior) EXPECT_NEAR(p, 0.25, 1e-15);
  EXPECT_EQ(default_content_free_inputs(), (std::vector<std::string>{"", "[MASK]", "N/A"}));
}

TEST(ContextualCalibration, PriorIsFlooredAndRenormalized) {
  const auto model = cc_from_distributions(std::vector<LabelScores>{LabelScores::from_probs({1.0, 0.0})});
  EXPECT_GT(model.prior[1], 0.0);
  EXPECT_NEAR(model.prior[1], 1e-6 / (1.0 + 1e-6), 1e-15);
  expect_distribution(model.prior);
}

TEST(ContextualCalibration, ApplyExamples) {
  const auto raw = LabelScores::from_probs({0.3, 0.2, 0.5});
  const auto same = apply_cc(CCModel{{1.0 / 3, 1.0 / 3, 1.0 / 3}}, raw);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(same.probs()[i], raw.probs()[i], 1e-12);

  const auto flipped = apply_cc(CCModel{{0.8, 0.2}}, LabelScores::from_probs({0.5, 0.5}));
  EXPECT_NEAR(flipped.probs()[0], 0.2, 1e-12);
  EXPECT_NEAR(flipped.probs()[1], 0.8, 1e-12);

  const auto model = cc_from_distributions(std::vector<LabelScores>{LabelScores::from_probs({0.0, 1.0})});
  EXPECT_EQ(predict_label(apply_cc(model, LabelScores::from_probs({1.0, 0.0}))), 0u);
}

TEST(ContextualCalibration, FitUsesTheVariantPromptContext) {
  struct Recorder : Scorer {
    std::vector<std::string> prompts;
    std::mutex mutex;
    std::vector<double> score(const ScoreRequest& r, std::span<const std::string>) override {
      std::lock_guard lock(mutex);
      prompts.push_back(r.prompt);
      return {0.0, 0.0};
    }
    std::string identity() const override { return "recorder"; }
  } backend;
  const auto spec = sensel::testing::demo_spec();
  FewShotSet shots{{{"s0", "first demo", 0}, {"s1", "second demo", 1}}, 0};
  const std::vector<std::size_t> ordering{1, 0};
  const auto model = fit_contextual(backend, spec, shots, ordering, "Custom.", default_content_free_inputs());
  EXPECT_NEAR(model.prior[0], 0.5, 1e-15);
  ASSERT_EQ(backend.prompts.size(), 3u);
  EXPECT_EQ(backend.prompts[2], assemble_prompt(spec, "Custom.", shots.examples, ordering, "N/A"));
}

TEST(ContextualCalibration, OutputsAreDistributionsAndScaleInvariant) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t L = 2 + rng.index(5);
    CCModel model{sensel::testing::random_simplex(rng, L)};
    auto raw = sensel::testing::random_simplex(rng, L);
    const auto out = apply_cc(model, LabelScores::from_probs(raw));
    expect_distribution(out.probs());
    std::vector<double> logs(L);
    for (std::size_t i = 0; i < L; ++i) logs[i] = std::log(raw[i]) + 5.0;  // scaled by e^5
    EXPECT_EQ(predict_label(apply_cc(model, LabelScores::from_log_scores(logs))), predict_label(out));
  }
}

TEST(Gmm, RejectsBadInputs) {
  GmmConfig config;
  std::vector<Point> one_dim(50, Point{1.0});
  EXPECT_THROW(fit_gmm(one_dim, config), ConfigError);
  std::vector<Point> few(19, Point{0.5, 0.5});
  EXPECT_THROW(fit_gmm(few, config), InsufficientDataError);
  std::vector<Point> off(40, Point{0.5, 0.6});
  EXPECT_THROW(fit_gmm(off, config), ValidationError);
}

TEST(Gmm, IdenticalPointsCollapseToTheFloor) {
  std::vector<Point> same(30, Point{0.2, 0.3, 0.5});
  GmmConfig config;
  const auto model = fit_gmm(same, config);
  for (const auto& mean : model.means) {
    for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(mean[d], same[0][d], 1e-9);
  }
  for (const auto& var : model.variances) {
    for (double v : var) EXPECT_DOUBLE_EQ(v, config.variance_floor);
  }
}

TEST(Gmm, RecoversWellSeparatedMeans) {
  Rng rng(21);
  const std::vector<Point> truth{{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}};
  const auto points = cluster_points(rng, truth, 200, 0.04);
  GmmConfig config;
  config.seed = 9;
  const auto model = fit_gmm(points, config);
  const auto assignment = match_clusters(model);
  for (std::size_t j = 0; j < 3; ++j) {
    const auto& mean = model.means[j];
    const auto& target = truth[assignment[j]];
    for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(mean[d], target[d], 0.05);
  }
  double wsum = 0.0;
  for (double w : model.weights) wsum += w;
  EXPECT_NEAR(wsum, 1.0, 1e-12);
}

TEST(Gmm, EmLogLikelihoodNeverDecreases) {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t L = 2 + rng.index(3);
    std::vector<Point> means;
    for (std::size_t c = 0; c < L; ++c) means.push_back(sensel::testing::random_simplex(rng, L));
    const auto points = cluster_points(rng, means, 300 / L, 0.08);
    GmmConfig config;
    const auto model = run_em(points, config, rng.next());
    for (std::size_t i = 1; i < model.trace.size(); ++i) EXPECT_GE(model.trace[i], model.trace[i - 1] - 1e-9);
    EXPECT_NEAR(model.log_likelihood, gmm_log_likelihood(model, points), 1e-6 * std::abs(model.log_likelihood));
  }
}

TEST(Gmm, RestartsAreReproducible) {
  Rng rng(5);
  const auto points = cluster_points(rng, {{0.7, 0.3}, {0.2, 0.8}}, 50, 0.1);
  GmmConfig config;
  config.seed = 42;
  const auto a = fit_gmm(points, config);
  const auto b = fit_gmm(points, config);
  EXPECT_EQ(a.means, b.means);
  EXPECT_EQ(a.log_likelihood, b.log_likelihood);
}

TEST(Hungarian, SmallExamples) {
  EXPECT_EQ(max_weight_assignment({{0.9, 0.1}, {0.2, 0.8}}), (std::vector<std::size_t>{0, 1}));
  EXPECT_NEAR(assignment_weight({{0.9, 0.1}, {0.2, 0.8}}, std::vector<std::size_t>{0, 1}), 1.7, 1e-15);
  EXPECT_EQ(max_weight_assignment({{0.1, 0.9}, {0.8, 0.2}}), (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(max_weight_assignment({{0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}),
            (std::vector<std::size_t>{2, 0, 1}));
  // All assignments tie: lexicographically smallest wins.
  EXPECT_EQ(max_weight_assignment({{1.0, 1.0}, {1.0, 1.0}}), (std::vector<std::size_t>{0, 1}));
}

TEST(Hungarian, MatchesBruteForceIncludingTieBreak) {
  Rng rng(1234);
  for (std::size_t n = 2; n <= 6; ++n) {
    for (int trial = 0; trial < 200; ++trial) {
      WeightMatrix w(n, std::vector<double>(n));
      const bool coarse = trial % 2 == 0;  // coarse grids force ties
      for (auto& row : w) {
        for (auto& x : row) x = coarse ? static_cast<double>(rng.index(4)) / 4.0 : rng.uniform();
      }
      const auto got = max_weight_assignment(w);
      EXPECT_EQ(assignment_weight(w, got), brute_force_best(w));
      EXPECT_EQ(got, brute_force_lexmin(w));
      std::vector<std::size_t> identity(n);
      std::iota(identity.begin(), identity.end(), 0);
      EXPECT_GE(assignment_weight(w, got), assignment_weight(w, identity));
    }
  }
}

TEST(MatchClusters, OneHotMeansGiveIdentity) {
  GmmModel model;
  model.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  model.means = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  model.variances.assign(3, {0.01, 0.01, 0.01});
  EXPECT_EQ(match_clusters(model), (std::vector<std::size_t>{0, 1, 2}));
}

namespace {

PCModel two_cluster_model() {
  PCModel model;
  model.gmm.weights = {0.5, 0.5};
  model.gmm.means = {{0.1, 0.9}, {0.9, 0.1}};
  model.gmm.variances = {{0.01, 0.01}, {0.01, 0.01}};
  model.assignment = {1, 0};
  return model;
}

}  // namespace

TEST(PrototypicalCalibration, PointAtMeanGoesToItsLabel) {
  const auto model = two_cluster_model();
  const auto out = apply_pc(model, LabelScores::from_probs({0.1, 0.9}));
  EXPECT_GT(out.probs()[1], 0.99);
  expect_distribution(out.probs());
}

TEST(PrototypicalCalibration, EquidistantPointIsSplitEvenly) {
  const auto out = apply_pc(two_cluster_model(), LabelScores::from_probs({0.5, 0.5}));
  EXPECT_NEAR(out.probs()[0], 0.5, 1e-12);
  EXPECT_NEAR(out.probs()[1], 0.5, 1e-12);
}

TEST(PrototypicalCalibration, RelabelingClustersChangesNothing) {
  Rng rng(17);
  const auto points = cluster_points(rng, {{0.7, 0.2, 0.1}, {0.2, 0.6, 0.2}, {0.1, 0.2, 0.7}}, 40, 0.05);
  std::vector<LabelScores> scores;
  for (const auto& p : points) scores.push_back(LabelScores::from_probs(p));
  const auto model = fit_prototypical(scores, GmmConfig{});
  PCModel permuted = model;
  const std::vector<std::size_t> perm{2, 0, 1};
  for (std::size_t j = 0; j < 3; ++j) {
    permuted.gmm.weights[perm[j]] = model.gmm.weights[j];
    permuted.gmm.means[perm[j]] = model.gmm.means[j];
    permuted.gmm.variances[perm[j]] = model.gmm.variances[j];
    permuted.assignment[perm[j]] = model.assignment[j];
  }
  for (const auto& s : scores) {
    const auto a = apply_pc(model, s).probs();
    const auto b = apply_pc(permuted, s).probs();
    for (std::size_t l = 0; l < 3; ++l) EXPECT_NEAR(a[l], b[l], 1e-12);
    expect_distribution(a);
  }
}

TEST(CalibrationModels, SerializeRoundTrip) {
  Rng rng(2);
  const auto points = cluster_points(rng, {{0.8, 0.2}, {0.3, 0.7}}, 30, 0.05);
  std::vector<LabelScores> scores;
  for (const auto& p : points) scores.push_back(LabelScores::from_probs(p));
  std::map<std::string, CalibrationModel> models;
  models["base"] = fit_prototypical(scores, GmmConfig{});
  models["inst-h/1"] = CCModel{{0.25, 0.75}};
  models["exord/1-0"] = NoCalibration{};
  const auto text = calibration_models_to_json(models);
  const auto back = parse_calibration_models(text);
  EXPECT_EQ(calibration_models_to_json(back), text);
  for (const auto& s : scores) {
    EXPECT_EQ(apply_calibration(back.at("base"), s), apply_calibration(models.at("base"), s));
  }
}
