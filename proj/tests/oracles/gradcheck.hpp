#pragma once

// Central finite differences against an analytic gradient, one tensor at a time.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "slg/types.hpp"

namespace oracle {

struct TensorCheck {
  std::string name;
  double rel_err = 0.0;
  std::size_t entries = 0;
};

/// rel_err = ||analytic - numeric|| / max(||analytic|| + ||numeric||, 1e-12)
inline TensorCheck check_tensor(const std::string& name, slg::Matrix& param, const slg::Matrix& analytic,
                                const std::function<double()>& loss, double eps = 1e-5) {
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (Eigen::Index i = 0; i < param.rows(); ++i)
    for (Eigen::Index j = 0; j < param.cols(); ++j) {
      const double keep = param(i, j);
      param(i, j) = keep + eps;
      const double up = loss();
      param(i, j) = keep - eps;
      const double down = loss();
      param(i, j) = keep;
      const double num = (up - down) / (2.0 * eps);
      const double an = analytic(i, j);
      diff2 += (an - num) * (an - num);
      a2 += an * an;
      n2 += num * num;
    }
  TensorCheck r;
  r.name = name;
  r.entries = std::size_t(param.size());
  r.rel_err = std::sqrt(diff2) / std::max(std::sqrt(a2) + std::sqrt(n2), 1e-12);
  return r;
}

}  // namespace oracle
