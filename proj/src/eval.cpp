#include "sensel/eval.hpp"

#include <string>

#include "sensel/error.hpp"

namespace sensel {

namespace {

struct ClassCounts {
  std::vector<std::size_t> tp, fp, fn;

  explicit ClassCounts(std::size_t labels) : tp(labels, 0), fp(labels, 0), fn(labels, 0) {}

  void add(std::size_t pred, std::size_t gold) {
    if (pred == gold) {
      ++tp[pred];
    } else {
      ++fp[pred];
      ++fn[gold];
    }
  }

  double macro_f1() const {
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t l = 0; l < tp.size(); ++l) {
      const std::size_t denom = 2 * tp[l] + fp[l] + fn[l];
      if (denom == 0) continue;
      total += 2.0 * static_cast<double>(tp[l]) / static_cast<double>(denom);
      ++counted;
    }
    return counted == 0 ? 0.0 : total / static_cast<double>(counted);
  }
};

void check_label(std::size_t label, std::size_t num_labels) {
  if (label >= num_labels) {
    throw ValidationError("label " + std::to_string(label) + " outside [0, " + std::to_string(num_labels) + ")");
  }
}

}  // namespace

double f1_macro(std::span<const std::size_t> preds, std::span<const std::size_t> golds, std::size_t num_labels) {
  if (preds.size() != golds.size()) throw ValidationError("f1: predictions and golds differ in length");
  if (preds.empty()) throw ValidationError("f1: no predictions");
  ClassCounts counts(num_labels);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    check_label(preds[i], num_labels);
    check_label(golds[i], num_labels);
    counts.add(preds[i], golds[i]);
  }
  return counts.macro_f1();
}

CoverageCurve coverage_curve(std::span<const SelectionRecord> records, std::size_t num_labels) {
  CoverageCurve curve;
  if (records.empty()) return curve;
  const auto order = rank_order(records);
  const double total = static_cast<double>(records.size());
  ClassCounts counts(num_labels);
  curve.points.reserve(records.size());
  for (std::size_t n = 0; n < order.size(); ++n) {
    const auto& r = records[order[n]];
    check_label(r.base_prediction, num_labels);
    check_label(r.gold, num_labels);
    counts.add(r.base_prediction, r.gold);
    curve.points.push_back(CoveragePoint{static_cast<double>(n + 1) / total, counts.macro_f1()});
  }
  return curve;
}

double auc_f1_coverage(const CoverageCurve& curve) {
  if (curve.points.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : curve.points) total += p.f1;
  return total / static_cast<double>(curve.points.size());
}

double coverage_at_f1(const CoverageCurve& curve, double threshold) {
  double best = 0.0;
  for (const auto& p : curve.points) {
    if (p.f1 >= threshold) best = p.coverage;
  }
  return best;
}

std::vector<double> coverage_at_f1_grid(const CoverageCurve& curve) {
  std::vector<double> out;
  for (double t : kCoverageThresholds) out.push_back(coverage_at_f1(curve, t));
  return out;
}

PearsonResult sensitivity_accuracy_correlation(std::span<const double> sensitivities, const std::vector<bool>& correct) {
  if (sensitivities.size() != correct.size()) throw ValidationError("correlation: inputs differ in length");
  std::vector<double> indicator(correct.size());
  for (std::size_t i = 0; i < correct.size(); ++i) indicator[i] = correct[i] ? 1.0 : 0.0;
  return pearson(sensitivities, indicator);
}

}  // namespace sensel
