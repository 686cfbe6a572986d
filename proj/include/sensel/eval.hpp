#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "sensel/select.hpp"
#include "sensel/stats.hpp"

namespace sensel {

/// Unweighted mean of per-class F1 over the L classes. A class that appears
/// neither in preds nor in golds is skipped.
double f1_macro(std::span<const std::size_t> preds, std::span<const std::size_t> golds, std::size_t num_labels);

struct CoveragePoint {
  double coverage = 0.0;  // n / N
  double f1 = 0.0;        // macro F1 on the n most confident records
};

struct CoverageCurve {
  std::vector<CoveragePoint> points;
};

/// Ranks records by confidence (see ranks_before) and scores every prefix.
CoverageCurve coverage_curve(std::span<const SelectionRecord> records, std::size_t num_labels);

/// Mean of the per-prefix F1 values (unit steps over n = 1..N).
double auc_f1_coverage(const CoverageCurve& curve);

/// Largest coverage whose prefix F1 reaches the threshold; 0 when none does.
double coverage_at_f1(const CoverageCurve& curve, double threshold);

/// The F1 thresholds reported as C@10 .. C@90.
inline constexpr std::array<double, 9> kCoverageThresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

std::vector<double> coverage_at_f1_grid(const CoverageCurve& curve);

/// Pearson correlation between per-example sensitivity and correctness (0/1).
PearsonResult sensitivity_accuracy_correlation(std::span<const double> sensitivities, const std::vector<bool>& correct);

}  // namespace sensel
