#pragma once

#include <cstdint>
#include <vector>

#include "lifted/model.hpp"
#include "lifted/types.hpp"

namespace lifted {

struct LossWeights {
  double lambda_3d = 50.0;
  double lambda_disentangle = 1.0;
  double lambda_scale = 0.01;
  double lambda_shape = 0.1;
  double triplet_margin = 1.0;
};

void validate(const LossWeights& weights);

/// Gradient of one instance's free variables.
struct InstanceGrad {
  Vec4 q = Vec4::Zero();
  Vec2 t = Vec2::Zero();
  double sigma = 0.0;
  VecX code_identity;
  VecX code_expression;
};

/// Gradient of the shared model variables.
struct ModelGrad {
  Points3 mean;
  std::vector<Points3> identity_basis;
  std::vector<Points3> expression_basis;
};

struct GradientPack {
  ModelGrad model;
  std::vector<InstanceGrad> instances;

  void zero(const Dataset& dataset);
};

/// Smoothing constant of the unsquared reprojection distance.
inline constexpr double kReprojEps = 1e-8;

/// L = sum_i nu_i sqrt(||proj_i - obs_i||^2 + eps^2). If shape_grad is given
/// it receives dL/dS (N x 3, this instance's vertices); inst_grad receives
/// camera gradients. Both are accumulated, scaled by `weight`.
double reprojection_loss(const ShapeModel& model, const InstanceRecord& inst,
                         double weight = 1.0, Points3* shape_grad = nullptr,
                         InstanceGrad* inst_grad = nullptr);

/// Distributes a per-vertex shape gradient onto mean, bases, and codes.
void scatter_shape_gradient(const ShapeModel& model, const InstanceRecord& inst,
                            const Points3& shape_grad, ModelGrad& model_grad,
                            InstanceGrad& inst_grad);

/// Sum of reprojection_loss over instances listed in `subset` (all when
/// empty). Basis gradients accumulate across instances. Throws on an empty
/// dataset.
double dataset_loss_3d(const Dataset& dataset, double weight = 1.0,
                       GradientPack* grad = nullptr,
                       const std::vector<int>* subset = nullptr);

struct RegTerms {
  double scale = 0.0;  // sum_k sigma_k^2
  double shape = 0.0;  // sum_k ||deviation_k||_F^2
};

/// Raw regularizer sums; gradients are accumulated pre-weighted by
/// weights.lambda_scale / lambda_shape.
RegTerms regularization_loss(const Dataset& dataset, const LossWeights& weights,
                             GradientPack* grad = nullptr,
                             const std::vector<int>* subset = nullptr);

struct Triplet {
  int anchor, positive, negative;
};

/// One triplet list per disentangled factor.
struct TripletSet {
  std::vector<Triplet> expression;
  std::vector<Triplet> identity;
  std::vector<Triplet> pose;

  bool empty() const { return expression.empty() && identity.empty() && pose.empty(); }
};

/// One triplet per labeled anchor and factor, resampled per call. Positive:
/// shares the factor label, differs in another. Negative: differs in the
/// factor label and shares the rest when such an instance exists. `subset`
/// restricts anchors and partners (all instances when empty).
TripletSet sample_triplets(const Dataset& dataset, std::uint64_t seed,
                           const std::vector<int>* subset = nullptr);

/// Pose factor embedding: sign-canonicalized quaternion (w >= 0), then t and
/// sigma.
Eigen::Matrix<double, 7, 1> pose_embedding(const CameraPose& camera);

struct TripletTerms {
  double expression = 0.0;
  double identity = 0.0;
  double pose = 0.0;

  double total() const { return expression + identity + pose; }
};

/// Per factor: sum over triplets of ||f(a)-f(p)||^2 + hinge(margin +
/// ||f(a)-f(p)||^2 - ||f(a)-f(n)||^2). Gradients scaled by `weight`.
TripletTerms triplet_losses(const Dataset& dataset, const TripletSet& triplets,
                            const LossWeights& weights, double weight = 1.0,
                            GradientPack* grad = nullptr);

struct LossReport {
  double total = 0.0;
  double reproj = 0.0;              // raw L_3D
  double triplet_expression = 0.0;  // raw factor terms
  double triplet_identity = 0.0;
  double triplet_pose = 0.0;
  double reg_scale = 0.0;           // raw sum sigma^2
  double reg_shape = 0.0;           // raw sum ||deviation||_F^2
  double lux = 0.0;                 // externally supplied, already weighted

  double disentangle() const { return triplet_expression + triplet_identity + triplet_pose; }
};

/// Weighted total of all terms. Triplet terms are skipped when `triplets` is
/// null. `lux_total` is added verbatim (illumination losses do not share
/// variables with the geometry). Throws if any term is non-finite.
LossReport total_loss(const Dataset& dataset, const LossWeights& weights,
                      const TripletSet* triplets = nullptr, GradientPack* grad = nullptr,
                      const std::vector<int>* subset = nullptr, double lux_total = 0.0);

}  // namespace lifted
