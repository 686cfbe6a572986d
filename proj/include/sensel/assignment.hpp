#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sensel {

using WeightMatrix = std::vector<std::vector<double>>;

/// Square assignment maximizing total weight (Hungarian method, O(n^3)).
/// Among maximizers the lexicographically smallest row->column vector is returned.
/// result[row] = column.
std::vector<std::size_t> max_weight_assignment(const WeightMatrix& weights);

/// Sum of weights[row][assignment[row]], accumulated in row order.
double assignment_weight(const WeightMatrix& weights, std::span<const std::size_t> assignment);

}  // namespace sensel
