#include "sensel/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sensel/error.hpp"

namespace sensel {

namespace {

// Minimum-cost assignment on a square cost matrix; potentials formulation.
std::vector<std::size_t> hungarian_min_cost(const WeightMatrix& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);  // match[col] = row, 1-based; 0 = free

  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<double> min_slack(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col0] = true;
      const std::size_t row0 = match[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double reduced = cost[row0 - 1][col - 1] - u[row0] - v[col];
        if (reduced < min_slack[col]) {
          min_slack[col] = reduced;
          way[col] = col0;
        }
        if (min_slack[col] < delta) {
          delta = min_slack[col];
          col1 = col;
        }
      }
      for (std::size_t col = 0; col <= n; ++col) {
        if (used[col]) {
          u[match[col]] += delta;
          v[col] -= delta;
        } else {
          min_slack[col] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t col = 1; col <= n; ++col) {
    if (match[col] != 0) assignment[match[col] - 1] = col - 1;
  }
  return assignment;
}

double best_total(const WeightMatrix& weights) {
  if (weights.empty()) return 0.0;
  WeightMatrix cost(weights.size(), std::vector<double>(weights.size()));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    for (std::size_t j = 0; j < weights.size(); ++j) cost[i][j] = -weights[i][j];
  }
  return assignment_weight(weights, hungarian_min_cost(cost));
}

}  // namespace

double assignment_weight(const WeightMatrix& weights, std::span<const std::size_t> assignment) {
  double total = 0.0;
  for (std::size_t row = 0; row < assignment.size(); ++row) total += weights[row][assignment[row]];
  return total;
}

std::vector<std::size_t> max_weight_assignment(const WeightMatrix& weights) {
  const std::size_t n = weights.size();
  for (const auto& row : weights) {
    if (row.size() != n) throw ValidationError("assignment: weight matrix must be square");
    for (double w : row) {
      if (!std::isfinite(w)) throw ValidationError("assignment: weights must be finite");
    }
  }
  if (n == 0) return {};

  const double optimum = best_total(weights);
  double scale = 1.0;
  for (const auto& row : weights) {
    for (double w : row) scale = std::max(scale, std::abs(w));
  }
  const double tolerance = 1e-12 * scale * static_cast<double>(n);

  // Fix rows one at a time to the smallest column that still admits an optimal completion.
  std::vector<std::size_t> result(n);
  std::vector<bool> col_used(n, false);
  double fixed = 0.0;
  for (std::size_t row = 0; row < n; ++row) {
    bool placed = false;
    for (std::size_t col = 0; col < n && !placed; ++col) {
      if (col_used[col]) continue;
      std::vector<std::size_t> free_cols;
      for (std::size_t c = 0; c < n; ++c) {
        if (!col_used[c] && c != col) free_cols.push_back(c);
      }
      WeightMatrix sub(n - row - 1, std::vector<double>(free_cols.size()));
      for (std::size_t r = row + 1; r < n; ++r) {
        for (std::size_t c = 0; c < free_cols.size(); ++c) sub[r - row - 1][c] = weights[r][free_cols[c]];
      }
      const double candidate = fixed + weights[row][col] + best_total(sub);
      if (candidate >= optimum - tolerance) {
        result[row] = col;
        col_used[col] = true;
        fixed += weights[row][col];
        placed = true;
      }
    }
    if (!placed) throw ValidationError("assignment: failed to reconstruct an optimal assignment");
  }
  return result;
}

}  // namespace sensel
