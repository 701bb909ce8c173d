#pragma once

#include <Eigen/Dense>

namespace vnegnn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Point sets are stored one point per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;

}  // namespace vnegnn
