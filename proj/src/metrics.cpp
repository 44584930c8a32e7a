#include "slg/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>

#include "slg/error.hpp"

namespace slg::metrics {

namespace {

void check_sizes(const std::vector<double>& s, const std::vector<int>& y, const std::vector<double>* w) {
  if (s.size() != y.size() || (w && w->size() != s.size()))
    throw ContractViolation("metrics: scores, labels and weights must be aligned");
}

std::vector<std::size_t> descending(const std::vector<double>& s) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  return order;
}

struct SweepPoint {
  double recall;
  double precision;
};

// One point per distinct score, highest threshold first.
std::vector<SweepPoint> sweep(const std::vector<double>& s, const std::vector<int>& y, const std::vector<double>* w,
                              double* total_pos) {
  const auto order = descending(s);
  double pos = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (y[i]) pos += w ? (*w)[i] : 1.0;
  *total_pos = pos;
  std::vector<SweepPoint> pts;
  if (!(pos > 0.0)) return pts;
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && s[order[j]] == s[order[i]]) {
      const std::size_t r = order[j];
      const double wt = w ? (*w)[r] : 1.0;
      (y[r] ? tp : fp) += wt;
      ++j;
    }
    if (tp + fp > 0.0) pts.push_back({tp / pos, tp / (tp + fp)});
    i = j;
  }
  return pts;
}

}  // namespace

Metric roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_sizes(scores, labels, nullptr);
  std::uint64_t p = 0, n = 0;
  for (int v : labels) (v ? p : n) += 1;
  if (p == 0 || n == 0) return {0.5, true};
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the Mann-Whitney count keeps half credits integral.
  std::uint64_t credit2 = 0, neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t gp = 0, gn = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? gp : gn) += 1;
      ++j;
    }
    credit2 += gp * (2 * neg_below + gn);
    neg_below += gn;
    i = j;
  }
  return {static_cast<double>(credit2) / (2.0 * static_cast<double>(p) * static_cast<double>(n)), false};
}

Metric average_precision(const std::vector<double>& scores, const std::vector<int>& labels,
                         const std::vector<double>* weights) {
  check_sizes(scores, labels, weights);
  double pos = 0.0;
  const auto pts = sweep(scores, labels, weights, &pos);
  if (pts.empty()) return {0.0, true};
  double ap = 0.0, prev = 0.0;
  for (const auto& pt : pts) {
    ap += (pt.recall - prev) * pt.precision;
    prev = pt.recall;
  }
  return {std::clamp(ap, 0.0, 1.0), false};
}

Metric precision_at_recall(const std::vector<double>& scores, const std::vector<int>& labels, double r,
                           const std::vector<double>* weights) {
  check_sizes(scores, labels, weights);
  if (!(r > 0.0 && r <= 1.0)) throw ContractViolation("precision_at_recall: r must lie in (0, 1]");
  double pos = 0.0;
  const auto pts = sweep(scores, labels, weights, &pos);
  bool found = false;
  double best = 0.0;
  for (const auto& pt : pts)
    if (pt.recall >= r) {
      best = found ? std::max(best, pt.precision) : pt.precision;
      found = true;
    }
  return {best, !found};
}

std::vector<CurvePoint> pr_curve(const std::vector<double>& scores, const std::vector<int>& labels,
                                 std::size_t points) {
  check_sizes(scores, labels, nullptr);
  double pos = 0.0;
  const auto pts = sweep(scores, labels, nullptr, &pos);
  std::vector<CurvePoint> out;
  if (pts.empty() || points < 2) return out;
  std::vector<double> suffix(pts.size());
  double m = 0.0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    m = std::max(m, pts[i].precision);
    suffix[i] = m;
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < points; ++i) {
    const double r = static_cast<double>(i) / static_cast<double>(points - 1);
    while (k < pts.size() && pts[k].recall < r) ++k;
    out.push_back({r, k < pts.size() ? suffix[k] : 0.0});
  }
  return out;
}

const SegmentMetrics* EvalReport::find(const std::string& name) const {
  for (const auto& s : segments)
    if (s.name == name) return &s;
  return nullptr;
}

EvalReport segment_report(const std::vector<double>& scores, const std::vector<int>& labels,
                          const std::vector<double>& amounts, const std::vector<SegmentSpec>& segments,
                          const std::vector<double>& recall_points) {
  check_sizes(scores, labels, &amounts);
  EvalReport report;
  for (const auto& seg : segments) {
    if (seg.member.size() != scores.size()) throw ContractViolation("segment_report: membership not aligned");
    SegmentMetrics m;
    m.name = seg.name;
    std::vector<double> s, a;
    std::vector<int> y;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!seg.member[i]) continue;
      s.push_back(scores[i]);
      y.push_back(labels[i]);
      a.push_back(amounts[i]);
      if (labels[i]) {
        ++m.positives;
        m.positive_amount += amounts[i];
      }
    }
    m.n = s.size();
    if (m.n == 0) {
      m.empty = true;
      m.ap = m.dollar_ap = {0.0, true};
      m.auc = {0.5, true};
      for (double r : recall_points) m.p_at_r[r] = {0.0, true};
      report.segments.push_back(std::move(m));
      continue;
    }
    m.ap = average_precision(s, y);
    m.auc = roc_auc(s, y);
    m.dollar_ap = average_precision(s, y, &a);
    for (double r : recall_points) m.p_at_r[r] = precision_at_recall(s, y, r);
    m.curve = pr_curve(s, y);
    report.segments.push_back(std::move(m));
  }
  return report;
}

}  // namespace slg::metrics
