#pragma once

#include <Eigen/Dense>

namespace hyperdet {

// Row-major dense matrix used for node/edge feature blocks and parameters.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace hyperdet
