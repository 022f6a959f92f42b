#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace perfgat::train {

// Confusion-matrix metrics with ROC points and trapezoidal AUC. The positive
// class is the minority (label 1). AUC is absent when the labels are
// single-class.
struct MetricsReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double acc = 0.0;
  double balanced_acc = 0.0;
  double spec = 0.0;
  double sens = 0.0;
  double f1 = 0.0;
  std::vector<std::pair<double, double>> roc_points;  // (fpr, tpr), by falling threshold
  std::optional<double> auc;
};

// Confusion counts at `threshold` (score >= threshold predicts positive) and
// a ROC built from all distinct score thresholds (midpoints plus +-inf
// endpoints). Ratios with an empty denominator report as 0.
MetricsReport compute_metrics(const std::vector<int>& labels,
                              const std::vector<double>& scores, double threshold);

}  // namespace perfgat::train
