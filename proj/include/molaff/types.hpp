#pragma once

#include <Eigen/Dense>

namespace molaff {

// Row-major so that per-node rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace molaff
