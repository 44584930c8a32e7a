#pragma once

// Quadratic reference metrics: every threshold and every pair recounted from scratch.

#include <algorithm>
#include <set>
#include <vector>

namespace oracle {

inline double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double credit = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      if (s[i] > s[j]) credit += 1.0;
      else if (s[i] == s[j]) credit += 0.5;
    }
  }
  return pairs > 0 ? credit / pairs : 0.5;
}

struct Op {
  double recall, precision;
};

// (recall, precision) when flagging everything with score >= t, for each distinct t descending.
inline std::vector<Op> brute_points(const std::vector<double>& s, const std::vector<int>& y,
                                    const std::vector<double>* w) {
  std::set<double, std::greater<>> ts(s.begin(), s.end());
  double pos = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (y[i]) pos += w ? (*w)[i] : 1.0;
  std::vector<Op> out;
  for (double t : ts) {
    double tp = 0.0, all = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] < t) continue;
      const double wt = w ? (*w)[i] : 1.0;
      all += wt;
      if (y[i]) tp += wt;
    }
    if (all > 0) out.push_back({tp / pos, tp / all});
  }
  return out;
}

inline double brute_ap(const std::vector<double>& s, const std::vector<int>& y, const std::vector<double>* w) {
  const auto pts = brute_points(s, y, w);
  double ap = 0.0, prev = 0.0;
  for (const auto& p : pts) {
    ap += (p.recall - prev) * p.precision;
    prev = p.recall;
  }
  return ap;
}

inline double brute_p_at_r(const std::vector<double>& s, const std::vector<int>& y, double r,
                           const std::vector<double>* w) {
  double best = 0.0;
  for (const auto& p : brute_points(s, y, w))
    if (p.recall >= r) best = std::max(best, p.precision);
  return best;
}

}  // namespace oracle
