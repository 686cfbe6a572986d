#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sensel {

using Point = std::vector<double>;

struct GmmConfig {
  std::size_t components = 0;  // 0: one component per dimension
  std::size_t restarts = 5;
  std::size_t max_iterations = 200;
  double tolerance = 1e-6;  // stop once the log-likelihood gain falls below this
  double variance_floor = 1e-6;
  std::uint64_t seed = 0;
};

/// Diagonal-covariance Gaussian mixture.
struct GmmModel {
  std::vector<double> weights;
  std::vector<Point> means;
  std::vector<Point> variances;
  double log_likelihood = 0.0;  // total over the training points
  std::size_t iterations = 0;
  std::vector<double> trace;  // log-likelihood after initialization and after every EM step

  std::size_t components() const { return weights.size(); }
  std::size_t dimension() const { return means.empty() ? 0 : means.front().size(); }
};

/// Fits the mixture to points on the probability simplex: each restart r uses
/// seed + r for k-means++ seeding of the means, uniform weights and the pooled
/// per-dimension variance; the restart with the highest final log-likelihood wins.
/// Requires dimension >= 2, at least 10 points per component and rows summing to 1.
GmmModel fit_gmm(std::span<const Point> points, const GmmConfig& config);

/// A single EM run from one k-means++ initialization.
GmmModel run_em(std::span<const Point> points, const GmmConfig& config, std::uint64_t seed);

/// Posterior responsibility of each component for x.
std::vector<double> gmm_posteriors(const GmmModel& model, std::span<const double> x);

double gmm_log_likelihood(const GmmModel& model, std::span<const Point> points);

}  // namespace sensel
