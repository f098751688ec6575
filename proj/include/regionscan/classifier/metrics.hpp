#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "regionscan/classifier/matrix.hpp"
#include "regionscan/classifier/network.hpp"
#include "regionscan/classifier/scaler.hpp"
#include "regionscan/error.hpp"

namespace regionscan::nn {

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  double fpr = 0.0;
  double loss = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

namespace detail {
inline double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace detail

/// Area under the ROC curve by trapezoidal integration, with tied scores
/// forming a single ROC step. Zero when a class is missing.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc_auc: length mismatch");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) return 0.0;
  double area = 0.0, tp = 0.0, fp = 0.0;
  for (std::size_t k = 0; k < idx.size();) {
    double dtp = 0.0, dfp = 0.0;
    const double s = scores[idx[k]];
    for (; k < idx.size() && scores[idx[k]] == s; ++k) (labels[idx[k]] ? dtp : dfp) += 1.0;
    area += (dfp / neg) * ((tp + (tp + dtp)) / 2.0 / pos);
    tp += dtp;
    fp += dfp;
  }
  return area;
}

/// Confusion-matrix metrics at `threshold` (score >= threshold is positive),
/// AUC and mean BCE loss.
inline Metrics compute_metrics(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
  if (scores.size() != labels.size()) throw ShapeError("metrics: length mismatch");
  Metrics m;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const bool predicted = scores[k] >= threshold;
    if (labels[k]) {
      predicted ? ++m.tp : ++m.fn;
    } else {
      predicted ? ++m.fp : ++m.tn;
    }
  }
  const auto tp = static_cast<double>(m.tp), fp = static_cast<double>(m.fp);
  const auto tn = static_cast<double>(m.tn), fn = static_cast<double>(m.fn);
  m.accuracy = detail::ratio(tp + tn, tp + tn + fp + fn);
  m.precision = detail::ratio(tp, tp + fp);
  m.recall = detail::ratio(tp, tp + fn);
  m.f1 = detail::ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  m.fpr = detail::ratio(fp, fp + tn);
  m.auc = roc_auc(scores, labels);
  m.loss = bce_loss(scores, labels);
  return m;
}

inline Metrics evaluate(const ModelParams& params, const ScalerParams& scaler, const Matrix& features,
                        std::span<const int> labels, double threshold = 0.5) {
  if (features.rows == 0) throw EmptyDatasetError("evaluate: no samples");
  const auto scores = predict(scaler.transform(features), params);
  return compute_metrics(scores, labels, threshold);
}

}  // namespace regionscan::nn
