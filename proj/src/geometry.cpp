#include "lifted/geometry.hpp"

#include <cmath>

#include <Eigen/SVD>

namespace lifted {

std::array<Mat3, 4> quat_to_rotmat_jacobian(const Vec4& q) {
  const double n = q.norm();
  if (!(n > 0.0))
    throw std::invalid_argument("quat_to_rotmat_jacobian: zero quaternion");
  const Vec4 u = q / n;
  const double w = u[0], x = u[1], y = u[2], z = u[3];

  // dR/du for the unit-quaternion polynomial map.
  std::array<Mat3, 4> dRdu;
  dRdu[0] << 0, -z, y,
             z, 0, -x,
             -y, x, 0;
  dRdu[0] *= 2.0;
  dRdu[1] << 0, y, z,
             y, -2 * x, -w,
             z, w, -2 * x;
  dRdu[1] *= 2.0;
  dRdu[2] << -2 * y, x, w,
             x, 0, z,
             -w, z, -2 * y;
  dRdu[2] *= 2.0;
  dRdu[3] << -2 * z, -w, x,
             w, -2 * z, y,
             x, y, 0;
  dRdu[3] *= 2.0;

  // Chain through u = q/|q|: du_j/dq_k = (delta_jk - u_j u_k)/|q|.
  std::array<Mat3, 4> dRdq;
  for (int k = 0; k < 4; ++k) {
    Mat3 acc = Mat3::Zero();
    for (int j = 0; j < 4; ++j) {
      const double duj_dqk = ((j == k ? 1.0 : 0.0) - u[j] * u[k]) / n;
      acc += dRdu[j] * duj_dqk;
    }
    dRdq[k] = acc;
  }
  return dRdq;
}

std::vector<Triangle> triangulate(const UvGrid& grid) {
  if (grid.n < 1)
    throw std::invalid_argument("triangulate: grid subdivision must be >= 1");
  std::vector<Triangle> tris;
  tris.reserve(2 * grid.n * grid.n);
  for (int iv = 0; iv < grid.n; ++iv) {
    for (int iu = 0; iu < grid.n; ++iu) {
      const int a = grid.index(iu, iv);
      const int b = grid.index(iu + 1, iv);
      const int c = grid.index(iu + 1, iv + 1);
      const int d = grid.index(iu, iv + 1);
      tris.push_back({a, b, c});
      tris.push_back({a, c, d});
    }
  }
  return tris;
}

Points3 vertex_normals(const Points3& points, const std::vector<Triangle>& triangles) {
  Points3 acc = Points3::Zero(points.rows(), 3);
  for (const Triangle& tri : triangles) {
    const Vec3 a = points.row(tri.a);
    const Vec3 e1 = Vec3(points.row(tri.b)) - a;
    const Vec3 e2 = Vec3(points.row(tri.c)) - a;
    const Vec3 fn = e1.cross(e2);  // magnitude = 2 * face area
    acc.row(tri.a) += fn.transpose();
    acc.row(tri.b) += fn.transpose();
    acc.row(tri.c) += fn.transpose();
  }
  for (Eigen::Index i = 0; i < acc.rows(); ++i) {
    const double len = acc.row(i).norm();
    if (!(len > 1e-300))
      throw std::runtime_error("vertex_normals: zero accumulated normal at vertex " +
                               std::to_string(i));
    acc.row(i) /= len;
  }
  return acc;
}

ProcrustesResult procrustes_align(const Points3& X, const Points3& Y, bool with_rotation) {
  if (X.rows() != Y.rows())
    throw std::invalid_argument("procrustes_align: point counts differ");
  if (X.rows() < 3)
    throw std::invalid_argument("procrustes_align: need at least 3 points");
  if (!X.allFinite() || !Y.allFinite())
    throw std::invalid_argument("procrustes_align: non-finite input");

  const Vec3 cx = X.colwise().mean();
  const Vec3 cy = Y.colwise().mean();
  const Points3 Xc = X.rowwise() - cx.transpose();
  const Points3 Yc = Y.rowwise() - cy.transpose();

  const double ny2 = Yc.squaredNorm();
  const double nx2 = Xc.squaredNorm();
  if (ny2 < 1e-24 || nx2 < 1e-24)
    throw std::invalid_argument("procrustes_align: degenerate (coincident) point set");

  SimilarityTransform tf;
  if (with_rotation) {
    const Mat3 C = Xc.transpose() * Yc;  // sum of x_m y_m^T outer products
    Eigen::JacobiSVD<Mat3> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 d(1, 1, 1);
    // Exclude reflections: flip the smallest singular direction if needed.
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d[2] = -1;
    tf.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
    tf.scale = svd.singularValues().dot(d) / ny2;
  } else {
    tf.rotation = Mat3::Identity();
    tf.scale = (Xc.array() * Yc.array()).sum() / ny2;
  }
  if (!(tf.scale > 0)) tf.scale = 1e-12;  // anti-correlated degenerate case
  tf.translation = cx - tf.scale * (tf.rotation * cy);

  ProcrustesResult res;
  res.transform = tf;
  res.aligned = tf.apply(Y);
  res.residual = (X - res.aligned).norm();
  return res;
}

Vec4 slerp(const Vec4& a, const Vec4& b, double t) {
  Vec4 bb = b;
  double dot = a.dot(b);
  if (dot < 0) {  // take the short arc
    bb = -b;
    dot = -dot;
  }
  if (dot > 1.0 - 1e-10) {
    Vec4 out = (1.0 - t) * a + t * bb;
    return out.normalized();
  }
  const double omega = std::acos(std::min(dot, 1.0));
  const double so = std::sin(omega);
  const double wa = std::sin((1.0 - t) * omega) / so;
  const double wb = std::sin(t * omega) / so;
  return wa * a + wb * bb;
}

Vec4 axis_angle_quat(const Vec3& axis, double angle_rad) {
  const Vec3 u = axis.normalized();
  const double h = 0.5 * angle_rad;
  return Vec4(std::cos(h), u.x() * std::sin(h), u.y() * std::sin(h), u.z() * std::sin(h));
}

Vec4 quat_multiply(const Vec4& a, const Vec4& b) {
  const double aw = a[0], ax = a[1], ay = a[2], az = a[3];
  const double bw = b[0], bx = b[1], by = b[2], bz = b[3];
  return Vec4(aw * bw - ax * bx - ay * by - az * bz,
              aw * bx + ax * bw + ay * bz - az * by,
              aw * by - ax * bz + ay * bw + az * bx,
              aw * bz + ax * by - ay * bx + az * bw);
}

double yaw_angle(const Mat3& R) {
  // R = Rz(a) Ry(b) Rx(c) has R(2,0) = -sin(b).
  return std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
}

}  // namespace lifted
