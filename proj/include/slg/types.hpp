#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace slg {

using TxnId = std::int64_t;

/// Row-major dense matrix; rows are observations.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace slg
