#include "sensel/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "sensel/error.hpp"
#include "sensel/rng.hpp"

namespace sensel {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> values) {
  double peak = kNegInf;
  for (double v : values) peak = std::max(peak, v);
  if (peak == kNegInf) return kNegInf;
  double total = 0.0;
  for (double v : values) total += std::exp(v - peak);
  return peak + std::log(total);
}

// Per-component terms that do not depend on the point: log(w_j) - 0.5 * sum_d log(2 pi var_jd)
// and the inverse variances.
struct Precomputed {
  std::vector<double> offset;
  std::vector<Point> inv_var;

  explicit Precomputed(const GmmModel& model) : offset(model.components()), inv_var(model.components()) {
    for (std::size_t j = 0; j < model.components(); ++j) {
      const auto& var = model.variances[j];
      double log_norm = 0.0;
      inv_var[j].resize(var.size());
      for (std::size_t d = 0; d < var.size(); ++d) {
        log_norm += std::log(2.0 * std::numbers::pi * var[d]);
        inv_var[j][d] = 1.0 / var[d];
      }
      offset[j] = model.weights[j] > 0.0 ? std::log(model.weights[j]) - 0.5 * log_norm : kNegInf;
    }
  }
};

// Joint log-probabilities log(w_j) + log N(x | j) for every component.
void joint_log_probs(const GmmModel& model, const Precomputed& pre, std::span<const double> x,
                     std::vector<double>& out) {
  out.resize(model.components());
  for (std::size_t j = 0; j < model.components(); ++j) {
    if (pre.offset[j] == kNegInf) {
      out[j] = kNegInf;
      continue;
    }
    const auto& mean = model.means[j];
    const auto& inv = pre.inv_var[j];
    double mahalanobis = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double diff = x[d] - mean[d];
      mahalanobis += diff * diff * inv[d];
    }
    out[j] = pre.offset[j] - 0.5 * mahalanobis;
  }
}

// E-step: fills responsibilities and returns the total log-likelihood.
double expectation(const GmmModel& model, std::span<const Point> points, std::vector<Point>& resp) {
  const Precomputed pre(model);
  std::vector<double> joint;
  double total = 0.0;
  resp.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    joint_log_probs(model, pre, points[i], joint);
    const double norm = log_sum_exp(joint);
    total += norm;
    resp[i].resize(joint.size());
    for (std::size_t j = 0; j < joint.size(); ++j) resp[i][j] = std::exp(joint[j] - norm);
  }
  return total;
}

void maximization(GmmModel& model, std::span<const Point> points, const std::vector<Point>& resp, double floor) {
  const std::size_t n = points.size();
  const std::size_t dim = model.dimension();
  for (std::size_t j = 0; j < model.components(); ++j) {
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) mass += resp[i][j];
    model.weights[j] = mass / static_cast<double>(n);
    if (mass <= 0.0) continue;  // dead component; parameters irrelevant to the likelihood

    Point mean(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < dim; ++d) mean[d] += resp[i][j] * points[i][d];
    }
    for (double& m : mean) m /= mass;

    Point var(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = points[i][d] - mean[d];
        var[d] += resp[i][j] * diff * diff;
      }
    }
    for (double& v : var) v = std::max(v / mass, floor);

    model.means[j] = std::move(mean);
    model.variances[j] = std::move(var);
  }
}

std::vector<Point> kmeans_plus_plus(std::span<const Point> points, std::size_t k, Rng& rng) {
  std::vector<Point> centers;
  centers.push_back(points[rng.index(points.size())]);
  std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    const Point& latest = centers.back();
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double dist = 0.0;
      for (std::size_t d = 0; d < latest.size(); ++d) {
        const double diff = points[i][d] - latest[d];
        dist += diff * diff;
      }
      nearest[i] = std::min(nearest[i], dist);
      total += nearest[i];
    }
    if (!(total > 0.0)) {
      centers.push_back(points[rng.index(points.size())]);
      continue;
    }
    const double target = rng.uniform() * total;
    double running = 0.0;
    std::size_t pick = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      running += nearest[i];
      if (running > target && nearest[i] > 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(points[pick]);
  }
  return centers;
}

void check_points(std::span<const Point> points, std::size_t components) {
  if (points.empty()) throw InsufficientDataError("gmm: no points");
  const std::size_t dim = points.front().size();
  if (dim < 2) throw ConfigError("gmm: points must have at least 2 dimensions (L >= 2)");
  if (components < 2) throw ConfigError("gmm: at least 2 components required");
  if (points.size() < 10 * components) {
    throw InsufficientDataError("gmm: need at least " + std::to_string(10 * components) + " points for " +
                                std::to_string(components) + " components, got " + std::to_string(points.size()));
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != dim) throw ValidationError("gmm: point " + std::to_string(i) + " has wrong dimension");
    double sum = 0.0;
    for (double v : points[i]) {
      if (!std::isfinite(v)) throw ValidationError("gmm: point " + std::to_string(i) + " is not finite");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ValidationError("gmm: point " + std::to_string(i) + " does not sum to 1");
    }
  }
}

}  // namespace

GmmModel run_em(std::span<const Point> points, const GmmConfig& config, std::uint64_t seed) {
  const std::size_t dim = points.empty() ? 0 : points.front().size();
  const std::size_t k = config.components == 0 ? dim : config.components;
  check_points(points, k);

  const double n = static_cast<double>(points.size());
  Point pooled_mean(dim, 0.0);
  for (const auto& p : points) {
    for (std::size_t d = 0; d < dim; ++d) pooled_mean[d] += p[d];
  }
  for (double& m : pooled_mean) m /= n;
  Point pooled_var(dim, 0.0);
  for (const auto& p : points) {
    for (std::size_t d = 0; d < dim; ++d) pooled_var[d] += (p[d] - pooled_mean[d]) * (p[d] - pooled_mean[d]);
  }
  for (double& v : pooled_var) v = std::max(v / n, config.variance_floor);

  Rng rng(seed);
  GmmModel model;
  model.means = kmeans_plus_plus(points, k, rng);
  model.weights.assign(k, 1.0 / static_cast<double>(k));
  model.variances.assign(k, pooled_var);

  std::vector<Point> resp;
  double ll = expectation(model, points, resp);
  model.trace.push_back(ll);
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    maximization(model, points, resp, config.variance_floor);
    const double next = expectation(model, points, resp);
    model.trace.push_back(next);
    model.iterations = it + 1;
    const double gain = next - ll;
    ll = next;
    if (gain < config.tolerance) break;
  }
  model.log_likelihood = ll;
  return model;
}

GmmModel fit_gmm(std::span<const Point> points, const GmmConfig& config) {
  const std::size_t restarts = std::max<std::size_t>(config.restarts, 1);
  GmmModel best;
  bool have_best = false;
  for (std::size_t r = 0; r < restarts; ++r) {
    GmmModel candidate = run_em(points, config, config.seed + r);
    if (!have_best || candidate.log_likelihood > best.log_likelihood) {
      best = std::move(candidate);
      have_best = true;
    }
  }
  return best;
}

std::vector<double> gmm_posteriors(const GmmModel& model, std::span<const double> x) {
  if (x.size() != model.dimension()) throw ValidationError("gmm: input has wrong dimension");
  std::vector<double> joint;
  joint_log_probs(model, Precomputed(model), x, joint);
  const double norm = log_sum_exp(joint);
  std::vector<double> out(joint.size());
  if (norm == kNegInf) {
    // Every component assigns zero density; fall back to the mixture weights.
    return model.weights;
  }
  for (std::size_t j = 0; j < joint.size(); ++j) out[j] = std::exp(joint[j] - norm);
  return out;
}

double gmm_log_likelihood(const GmmModel& model, std::span<const Point> points) {
  const Precomputed pre(model);
  std::vector<double> joint;
  double total = 0.0;
  for (const auto& p : points) {
    joint_log_probs(model, pre, p, joint);
    total += log_sum_exp(joint);
  }
  return total;
}

}  // namespace sensel
