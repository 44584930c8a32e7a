#pragma once

#include <vector>

#include "slg/rng.hpp"
#include "slg/types.hpp"

// Gaussian blobs plus uniform background; sometimes duplicated points.
inline slg::Matrix random_blobs(slg::Rng& r, std::size_t n, std::size_t d) {
  const std::size_t blobs = 1 + r.below(4);
  std::vector<std::vector<double>> centers(blobs, std::vector<double>(d));
  for (auto& c : centers)
    for (auto& v : c) v = r.uniform(-10, 10);
  slg::Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && r.bernoulli(0.05)) {
      x.row(Eigen::Index(i)) = x.row(Eigen::Index(r.below(i)));
      continue;
    }
    const bool bg = r.bernoulli(0.15);
    const auto& c = centers[r.below(blobs)];
    for (std::size_t k = 0; k < d; ++k)
      x(Eigen::Index(i), Eigen::Index(k)) = bg ? r.uniform(-12, 12) : c[k] + r.normal() * r.uniform(0.3, 1.5);
  }
  return x;
}
