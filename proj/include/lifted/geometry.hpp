#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Geometry>

#include "lifted/model.hpp"
#include "lifted/types.hpp"

namespace lifted {

struct Triangle {
  int a, b, c;
};

/// Unit-quaternion (w,x,y,z) to rotation matrix, acting on column vectors
/// from the left. The input is normalized first; q and -q map to the same
/// matrix.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> quat_to_rotmat(const Eigen::Matrix<Scalar, 4, 1>& q) {
  const Scalar n = q.norm();
  if (!(n > Scalar(0)))
    throw std::invalid_argument("quat_to_rotmat: zero quaternion");
  const Scalar w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  Eigen::Matrix<Scalar, 3, 3> R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

/// Partial derivatives of quat_to_rotmat with respect to the raw (not yet
/// normalized) quaternion entries, chained through the normalization. Because
/// the normalized map is scale invariant, the returned gradients are
/// orthogonal to q at unit norm.
std::array<Mat3, 4> quat_to_rotmat_jacobian(const Vec4& q);

/// Scaled orthographic projection of Eq-4 form: x = sigma * (R p)_{xy} + t.
template <typename Scalar>
Points2T<Scalar> project(const PointsT<Scalar>& points, const CameraPoseT<Scalar>& camera) {
  const Eigen::Matrix<Scalar, 3, 3> R = quat_to_rotmat<Scalar>(camera.q);
  Points2T<Scalar> out = camera.sigma * (points * R.transpose()).template leftCols<2>();
  out.rowwise() += camera.t.transpose();
  return out;
}

/// Depth of each point toward the camera (smaller = closer). The camera looks
/// down -z after rotation, so depth is the negated rotated z coordinate.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> camera_depth(const PointsT<Scalar>& points,
                                                      const CameraPoseT<Scalar>& camera) {
  const Eigen::Matrix<Scalar, 3, 3> R = quat_to_rotmat<Scalar>(camera.q);
  return -(points * R.transpose()).col(2);
}

/// Splits every grid quad along its lower-left to upper-right diagonal.
/// 2 n^2 triangles, counter-clockwise in (u,v).
std::vector<Triangle> triangulate(const UvGrid& grid);

/// Area-weighted vertex normals. Throws if a vertex accumulates a zero
/// normal, listing the vertex index.
Points3 vertex_normals(const Points3& points, const std::vector<Triangle>& triangles);

struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Points3 apply(const Points3& pts) const {
    Points3 out = scale * (pts * rotation.transpose());
    out.rowwise() += translation.transpose();
    return out;
  }
};

struct ProcrustesResult {
  SimilarityTransform transform;  // maps Y onto X
  Points3 aligned;                // transform applied to Y
  double residual = 0.0;          // ||X - aligned||_F
};

/// Least-squares similarity alignment of Y onto X. Reflections are excluded;
/// with_rotation=false keeps R = I and fits scale and translation only.
ProcrustesResult procrustes_align(const Points3& X, const Points3& Y, bool with_rotation);

/// Unit-quaternion spherical interpolation; falls back to linear blending for
/// nearly parallel inputs. Endpoints are reproduced exactly.
Vec4 slerp(const Vec4& a, const Vec4& b, double t);

/// Quaternion for a rotation of `angle_rad` about a unit axis.
Vec4 axis_angle_quat(const Vec3& axis, double angle_rad);

/// Hamilton product a*b (both (w,x,y,z)); composes rotations R(a)R(b).
Vec4 quat_multiply(const Vec4& a, const Vec4& b);

/// Y-axis Euler angle of R in the ZYX convention, radians in [-pi/2, pi/2].
double yaw_angle(const Mat3& R);

}  // namespace lifted
