#include "perfgat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "perfgat/errors.hpp"

namespace perfgat::train {

namespace {

std::pair<double, double> roc_point(const std::vector<int>& labels,
                                    const std::vector<double>& scores, double threshold,
                                    std::size_t pos, std::size_t neg) {
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (scores[i] >= threshold) {
      if (labels[i] == 1) {
        ++tp;
      } else {
        ++fp;
      }
    }
  }
  const double tpr = pos == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pos);
  const double fpr = neg == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(neg);
  return {fpr, tpr};
}

}  // namespace

MetricsReport compute_metrics(const std::vector<int>& labels,
                              const std::vector<double>& scores, double threshold) {
  if (labels.size() != scores.size()) {
    throw DimensionError("compute_metrics: " + std::to_string(labels.size()) +
                         " labels vs " + std::to_string(scores.size()) + " scores");
  }
  if (labels.empty()) throw DomainError("compute_metrics of empty input");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
      throw DomainError("compute_metrics: score " + std::to_string(i) +
                        " outside [0,1]");
    }
    if (labels[i] != 0 && labels[i] != 1) {
      throw DomainError("compute_metrics: label " + std::to_string(i) + " not binary");
    }
  }

  MetricsReport r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool positive = scores[i] >= threshold;
    if (labels[i] == 1) {
      positive ? ++r.tp : ++r.fn;
    } else {
      positive ? ++r.fp : ++r.tn;
    }
  }
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  r.acc = ratio(r.tp + r.tn, labels.size());
  r.sens = ratio(r.tp, r.tp + r.fn);
  r.spec = ratio(r.tn, r.tn + r.fp);
  r.balanced_acc = (r.sens + r.spec) / 2.0;
  r.f1 = ratio(2 * r.tp, 2 * r.tp + r.fp + r.fn);

  // ROC over all distinct score thresholds: +inf, midpoints, -inf.
  const std::size_t pos = r.tp + r.fn;
  const std::size_t neg = r.tn + r.fp;
  std::vector<double> distinct = scores;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> thresholds;
  thresholds.push_back(std::numeric_limits<double>::infinity());
  for (std::size_t i = distinct.size(); i-- > 1;) {
    thresholds.push_back(0.5 * (distinct[i - 1] + distinct[i]));
  }
  thresholds.push_back(-std::numeric_limits<double>::infinity());

  for (double th : thresholds) r.roc_points.push_back(roc_point(labels, scores, th, pos, neg));

  if (pos > 0 && neg > 0) {
    double auc = 0.0;
    for (std::size_t i = 0; i + 1 < r.roc_points.size(); ++i) {
      const auto& [fpr0, tpr0] = r.roc_points[i];
      const auto& [fpr1, tpr1] = r.roc_points[i + 1];
      auc += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0;
    }
    r.auc = auc;
  }
  return r;
}

}  // namespace perfgat::train
