#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lifted/types.hpp"

namespace lifted {

/// Regular (n+1)x(n+1) lattice over the unit UV square. Vertex i lives at
/// uv(i) with i = iv*(n+1) + iu, u varying fastest (row-major).
struct UvGrid {
  int n = 0;

  int side() const { return n + 1; }
  int vertex_count() const { return (n + 1) * (n + 1); }

  int index(int iu, int iv) const { return iv * (n + 1) + iu; }

  Vec2 uv(int i) const {
    const int iu = i % (n + 1);
    const int iv = i / (n + 1);
    return Vec2(double(iu) / n, double(iv) / n);
  }
};

/// Low-rank surface model: mean shape plus separate identity and expression
/// deformation bases. Either basis may be empty.
template <typename Scalar>
struct ShapeModelT {
  UvGrid grid;
  PointsT<Scalar> mean;                          // N x 3
  std::vector<PointsT<Scalar>> identity_basis;   // I entries, each N x 3
  std::vector<PointsT<Scalar>> expression_basis; // E entries, each N x 3

  int vertex_count() const { return grid.vertex_count(); }
  int identity_dim() const { return int(identity_basis.size()); }
  int expression_dim() const { return int(expression_basis.size()); }
};
using ShapeModel = ShapeModelT<double>;

/// Scaled orthographic camera: rotate by unit quaternion q = (w,x,y,z),
/// keep (x,y), scale by sigma, shift by t.
template <typename Scalar>
struct CameraPoseT {
  Eigen::Matrix<Scalar, 4, 1> q{Scalar(1), Scalar(0), Scalar(0), Scalar(0)};
  Eigen::Matrix<Scalar, 2, 1> t{Scalar(0), Scalar(0)};
  Scalar sigma = Scalar(1);
};
using CameraPose = CameraPoseT<double>;

struct InstanceLabels {
  std::string identity_id;
  std::string expression_id;
  std::string pose_id;
};

/// One image's worth of data: sparse 2D observations with a visibility mask
/// plus the free variables fitted for that image (codes and camera).
struct InstanceRecord {
  std::string id;
  Points2 observations;               // N x 2; rows with visibility 0 are ignored
  std::vector<std::uint8_t> visibility;
  VecX code_identity;                 // length I
  VecX code_expression;               // length E
  CameraPose camera;
  std::optional<InstanceLabels> labels;

  int visible_count() const {
    int c = 0;
    for (auto v : visibility) c += v != 0;
    return c;
  }
};

struct Dataset {
  ShapeModel model;
  std::vector<InstanceRecord> instances;

  int size() const { return int(instances.size()); }
};

/// B0 + sum_s sI_s * BI_s + sum_s sE_s * BE_s, per vertex.
template <typename Scalar>
PointsT<Scalar> instance_shape(const ShapeModelT<Scalar>& model,
                               const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& code_identity,
                               const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& code_expression) {
  if (code_identity.size() != model.identity_dim())
    throw std::invalid_argument("instance_shape: identity code length " +
                                std::to_string(code_identity.size()) + " does not match basis count I=" +
                                std::to_string(model.identity_dim()));
  if (code_expression.size() != model.expression_dim())
    throw std::invalid_argument("instance_shape: expression code length " +
                                std::to_string(code_expression.size()) + " does not match basis count E=" +
                                std::to_string(model.expression_dim()));
  PointsT<Scalar> shape = model.mean;
  for (int s = 0; s < model.identity_dim(); ++s)
    shape.noalias() += code_identity[s] * model.identity_basis[s];
  for (int s = 0; s < model.expression_dim(); ++s)
    shape.noalias() += code_expression[s] * model.expression_basis[s];
  return shape;
}

inline Points3 instance_shape(const ShapeModel& model, const InstanceRecord& inst) {
  return instance_shape(model, inst.code_identity, inst.code_expression);
}

/// Non-rigid deviation from the mean shape for one instance.
inline Points3 instance_deviation(const ShapeModel& model, const InstanceRecord& inst) {
  Points3 dev = Points3::Zero(model.vertex_count(), 3);
  for (int s = 0; s < model.identity_dim(); ++s)
    dev.noalias() += inst.code_identity[s] * model.identity_basis[s];
  for (int s = 0; s < model.expression_dim(); ++s)
    dev.noalias() += inst.code_expression[s] * model.expression_basis[s];
  return dev;
}

/// Throws std::runtime_error naming the first violated invariant.
void validate(const ShapeModel& model);
void validate(const Dataset& dataset);

}  // namespace lifted
