#pragma once

#include <Eigen/Dense>

namespace impact {

using Eigen::ArrayXd;
using Eigen::Index;
using Eigen::VectorXd;

// Surfaces are indexed (time row, space column); rows are touched
// sequentially during the backward sweep, so keep them contiguous.
using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXf =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXu8 =
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace impact
