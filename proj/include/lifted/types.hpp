#pragma once

#include <Eigen/Core>

namespace lifted {

// Dense aliases used throughout the library. Row i of a PointsT matrix is
// one surface vertex / landmark / observation.
template <typename Scalar>
using PointsT = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;
template <typename Scalar>
using Points2T = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;

using Points3 = PointsT<double>;
using Points2 = Points2T<double>;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using VecX = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;

// Planar image channel, indexed (row, col) = (y, x).
using Channel = Eigen::ArrayXXd;
using Mask = Eigen::Array<unsigned char, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace lifted
