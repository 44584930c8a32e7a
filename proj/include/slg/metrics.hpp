#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace slg::metrics {

struct Metric {
  double value = 0.0;
  bool flagged = false;  // undefined on this input; value is 0 (or 0.5 for AUC)
};

/// Mann-Whitney statistic; tied scores earn half credit.
Metric roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Step-wise AP over descending score thresholds with tied scores grouped.
/// Optional weights (e.g. amounts) give the dollar-wise variant.
Metric average_precision(const std::vector<double>& scores, const std::vector<int>& labels,
                         const std::vector<double>* weights = nullptr);

/// Largest precision among thresholds whose recall is at least r.
Metric precision_at_recall(const std::vector<double>& scores, const std::vector<int>& labels, double r,
                           const std::vector<double>* weights = nullptr);

struct CurvePoint {
  double recall = 0.0;
  double precision = 0.0;
};

/// Precision envelope sampled at recall 0, 0.01, ..., 1.
std::vector<CurvePoint> pr_curve(const std::vector<double>& scores, const std::vector<int>& labels,
                                 std::size_t points = 101);

inline const std::vector<double> kRecallPoints = {0.27, 0.35};

struct SegmentMetrics {
  std::string name;
  std::size_t n = 0;
  std::size_t positives = 0;
  double positive_amount = 0.0;
  bool empty = false;  // reported as n/a
  Metric ap, auc, dollar_ap;
  std::map<double, Metric> p_at_r;
  std::vector<CurvePoint> curve;
};

struct EvalReport {
  std::vector<SegmentMetrics> segments;
  const SegmentMetrics* find(const std::string& name) const;
};

struct SegmentSpec {
  std::string name;
  std::vector<bool> member;  // aligned with scores
};

EvalReport segment_report(const std::vector<double>& scores, const std::vector<int>& labels,
                          const std::vector<double>& amounts, const std::vector<SegmentSpec>& segments,
                          const std::vector<double>& recall_points = kRecallPoints);

}  // namespace slg::metrics
