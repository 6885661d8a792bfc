#include "lifted/objective.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "lifted/geometry.hpp"
#include "lifted/parallel.hpp"

namespace lifted {

void validate(const LossWeights& weights) {
  auto check = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::runtime_error(std::string("loss weight '") + name + "' must be finite and >= 0");
  };
  check(weights.lambda_3d, "lambda_3d");
  check(weights.lambda_disentangle, "lambda_disentangle");
  check(weights.lambda_scale, "lambda_scale");
  check(weights.lambda_shape, "lambda_shape");
  check(weights.triplet_margin, "triplet_margin");
}

void GradientPack::zero(const Dataset& dataset) {
  const int n = dataset.model.vertex_count();
  const bool shaped = model.mean.rows() == n &&
                      int(model.identity_basis.size()) == dataset.model.identity_dim() &&
                      int(model.expression_basis.size()) == dataset.model.expression_dim() &&
                      int(instances.size()) == dataset.size();
  if (!shaped) {
    model.mean = Points3::Zero(n, 3);
    model.identity_basis.assign(dataset.model.identity_dim(), Points3::Zero(n, 3));
    model.expression_basis.assign(dataset.model.expression_dim(), Points3::Zero(n, 3));
    instances.assign(dataset.size(), InstanceGrad{});
    for (InstanceGrad& g : instances) {
      g.code_identity = VecX::Zero(dataset.model.identity_dim());
      g.code_expression = VecX::Zero(dataset.model.expression_dim());
    }
    return;
  }
  model.mean.setZero();
  for (Points3& b : model.identity_basis) b.setZero();
  for (Points3& b : model.expression_basis) b.setZero();
  for (InstanceGrad& g : instances) {
    g.q.setZero();
    g.t.setZero();
    g.sigma = 0.0;
    g.code_identity.setZero();
    g.code_expression.setZero();
  }
}

double reprojection_loss(const ShapeModel& model, const InstanceRecord& inst,
                         double weight, Points3* shape_grad, InstanceGrad* inst_grad) {
  const Points3 S = instance_shape(model, inst);
  const Mat3 R = quat_to_rotmat(inst.camera.q);
  const Eigen::Matrix<double, 2, 3> P2 = R.topRows<2>();
  const Points2 rotated_xy = S * P2.transpose();
  Points2 proj = inst.camera.sigma * rotated_xy;
  proj.rowwise() += inst.camera.t.transpose();

  const bool need_grad = shape_grad || inst_grad;
  Points2 G;
  if (need_grad) G = Points2::Zero(S.rows(), 2);

  double loss = 0.0;
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    if (!inst.visibility[i]) continue;
    const Vec2 e = proj.row(i) - inst.observations.row(i);
    const double rho = std::sqrt(e.squaredNorm() + kReprojEps * kReprojEps);
    loss += rho;
    if (need_grad) G.row(i) = (weight / rho) * e;
  }

  if (inst_grad) {
    inst_grad->t += G.colwise().sum();
    inst_grad->sigma += (G.array() * rotated_xy.array()).sum();
    const Eigen::Matrix<double, 2, 3> M2 = inst.camera.sigma * (G.transpose() * S);
    const std::array<Mat3, 4> J = quat_to_rotmat_jacobian(inst.camera.q);
    for (int k = 0; k < 4; ++k)
      inst_grad->q[k] += (M2.array() * J[k].topRows<2>().array()).sum();
  }
  if (shape_grad) shape_grad->noalias() += inst.camera.sigma * (G * P2);
  return loss;
}

void scatter_shape_gradient(const ShapeModel& model, const InstanceRecord& inst,
                            const Points3& shape_grad, ModelGrad& model_grad,
                            InstanceGrad& inst_grad) {
  model_grad.mean += shape_grad;
  for (int s = 0; s < model.identity_dim(); ++s) {
    inst_grad.code_identity[s] += (shape_grad.array() * model.identity_basis[s].array()).sum();
    model_grad.identity_basis[s] += inst.code_identity[s] * shape_grad;
  }
  for (int s = 0; s < model.expression_dim(); ++s) {
    inst_grad.code_expression[s] += (shape_grad.array() * model.expression_basis[s].array()).sum();
    model_grad.expression_basis[s] += inst.code_expression[s] * shape_grad;
  }
}

double dataset_loss_3d(const Dataset& dataset, double weight, GradientPack* grad,
                       const std::vector<int>* subset) {
  if (dataset.instances.empty())
    throw std::runtime_error("dataset_loss_3d: empty dataset");
  std::vector<int> all;
  if (!subset) {
    all.resize(dataset.size());
    for (int k = 0; k < dataset.size(); ++k) all[k] = k;
  }
  const std::vector<int>& indices = subset ? *subset : all;

  const int count = int(indices.size());
  std::vector<double> losses(count, 0.0);
  if (!grad) {
    parallel_for(0, count, [&](int j) {
      losses[j] = reprojection_loss(dataset.model, dataset.instances[indices[j]]);
    });
  } else {
    std::vector<Points3> shape_grads(count);
    const int n = dataset.model.vertex_count();
    parallel_for(0, count, [&](int j) {
      const int k = indices[j];
      shape_grads[j] = Points3::Zero(n, 3);
      losses[j] = reprojection_loss(dataset.model, dataset.instances[k], weight,
                                    &shape_grads[j], &grad->instances[k]);
    });
    // Shared-model accumulation stays in index order so results do not
    // depend on the thread count.
    for (int j = 0; j < count; ++j)
      scatter_shape_gradient(dataset.model, dataset.instances[indices[j]], shape_grads[j],
                             grad->model, grad->instances[indices[j]]);
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total;
}

RegTerms regularization_loss(const Dataset& dataset, const LossWeights& weights,
                             GradientPack* grad, const std::vector<int>* subset) {
  RegTerms terms;
  const int count = subset ? int(subset->size()) : dataset.size();
  for (int j = 0; j < count; ++j) {
    const int k = subset ? (*subset)[j] : j;
    const InstanceRecord& inst = dataset.instances[k];
    terms.scale += inst.camera.sigma * inst.camera.sigma;
    const Points3 dev = instance_deviation(dataset.model, inst);
    terms.shape += dev.squaredNorm();
    if (grad) {
      grad->instances[k].sigma += 2.0 * weights.lambda_scale * inst.camera.sigma;
      const Points3 ddev = (2.0 * weights.lambda_shape) * dev;
      for (int s = 0; s < dataset.model.identity_dim(); ++s) {
        grad->instances[k].code_identity[s] +=
            (ddev.array() * dataset.model.identity_basis[s].array()).sum();
        grad->model.identity_basis[s] += inst.code_identity[s] * ddev;
      }
      for (int s = 0; s < dataset.model.expression_dim(); ++s) {
        grad->instances[k].code_expression[s] +=
            (ddev.array() * dataset.model.expression_basis[s].array()).sum();
        grad->model.expression_basis[s] += inst.code_expression[s] * ddev;
      }
    }
  }
  return terms;
}

namespace {

enum class Factor { kExpression, kIdentity, kPose };

const std::string& factor_label(const InstanceLabels& l, Factor f) {
  switch (f) {
    case Factor::kExpression: return l.expression_id;
    case Factor::kIdentity: return l.identity_id;
    default: return l.pose_id;
  }
}

std::vector<Triplet> sample_factor(const Dataset& dataset, const std::vector<int>& labeled,
                                   Factor f, std::mt19937_64& rng) {
  std::vector<Triplet> out;
  std::vector<int> positives, strict, relaxed;
  for (int a : labeled) {
    const InstanceLabels& la = *dataset.instances[a].labels;
    positives.clear();
    strict.clear();
    relaxed.clear();
    for (int k : labeled) {
      if (k == a) continue;
      const InstanceLabels& lk = *dataset.instances[k].labels;
      const bool same_f = factor_label(lk, f) == factor_label(la, f);
      int shared_others = 0, total_others = 0;
      for (Factor other : {Factor::kExpression, Factor::kIdentity, Factor::kPose}) {
        if (other == f) continue;
        ++total_others;
        if (factor_label(lk, other) == factor_label(la, other)) ++shared_others;
      }
      if (same_f) {
        if (shared_others < total_others) positives.push_back(k);
      } else {
        relaxed.push_back(k);
        if (shared_others == total_others) strict.push_back(k);
      }
    }
    if (positives.empty() || relaxed.empty()) continue;
    const std::vector<int>& negatives = strict.empty() ? relaxed : strict;
    Triplet t;
    t.anchor = a;
    t.positive = positives[rng() % positives.size()];
    t.negative = negatives[rng() % negatives.size()];
    out.push_back(t);
  }
  return out;
}

}  // namespace

TripletSet sample_triplets(const Dataset& dataset, std::uint64_t seed,
                           const std::vector<int>* subset) {
  std::vector<int> labeled;
  const int count = subset ? int(subset->size()) : dataset.size();
  for (int j = 0; j < count; ++j) {
    const int k = subset ? (*subset)[j] : j;
    if (dataset.instances[k].labels) labeled.push_back(k);
  }
  std::mt19937_64 rng(seed);
  TripletSet set;
  set.expression = sample_factor(dataset, labeled, Factor::kExpression, rng);
  set.identity = sample_factor(dataset, labeled, Factor::kIdentity, rng);
  set.pose = sample_factor(dataset, labeled, Factor::kPose, rng);
  return set;
}

Eigen::Matrix<double, 7, 1> pose_embedding(const CameraPose& camera) {
  Eigen::Matrix<double, 7, 1> f;
  const double sign = camera.q[0] < 0.0 ? -1.0 : 1.0;
  f.head<4>() = sign * camera.q;
  f.segment<2>(4) = camera.t;
  f[6] = camera.sigma;
  return f;
}

namespace {

VecX factor_embedding(const InstanceRecord& inst, Factor f) {
  switch (f) {
    case Factor::kExpression: return inst.code_expression;
    case Factor::kIdentity: return inst.code_identity;
    default: return pose_embedding(inst.camera);
  }
}

void scatter_factor_gradient(GradientPack& pack, const Dataset& dataset, int k, Factor f,
                             const VecX& g) {
  InstanceGrad& ig = pack.instances[k];
  switch (f) {
    case Factor::kExpression:
      ig.code_expression += g;
      return;
    case Factor::kIdentity:
      ig.code_identity += g;
      return;
    default: {
      const double sign = dataset.instances[k].camera.q[0] < 0.0 ? -1.0 : 1.0;
      ig.q += sign * g.head<4>();
      ig.t += g.segment<2>(4);
      ig.sigma += g[6];
    }
  }
}

double factor_loss(const Dataset& dataset, const std::vector<Triplet>& triplets, Factor f,
                   double margin, double weight, GradientPack* grad) {
  double loss = 0.0;
  for (const Triplet& t : triplets) {
    const VecX fa = factor_embedding(dataset.instances[t.anchor], f);
    const VecX fp = factor_embedding(dataset.instances[t.positive], f);
    const VecX fn = factor_embedding(dataset.instances[t.negative], f);
    const VecX dap = fa - fp;
    const VecX dan = fa - fn;
    const double d_ap = dap.squaredNorm();
    const double d_an = dan.squaredNorm();
    const bool active = margin + d_ap - d_an > 0.0;
    loss += d_ap + (active ? margin + d_ap - d_an : 0.0);
    if (grad) {
      const double c_ap = weight * 2.0 * (active ? 2.0 : 1.0);
      scatter_factor_gradient(*grad, dataset, t.anchor, f, c_ap * dap);
      scatter_factor_gradient(*grad, dataset, t.positive, f, -c_ap * dap);
      if (active) {
        const VecX gn = weight * 2.0 * dan;
        scatter_factor_gradient(*grad, dataset, t.anchor, f, -gn);
        scatter_factor_gradient(*grad, dataset, t.negative, f, gn);
      }
    }
  }
  return loss;
}

}  // namespace

TripletTerms triplet_losses(const Dataset& dataset, const TripletSet& triplets,
                            const LossWeights& weights, double weight, GradientPack* grad) {
  TripletTerms terms;
  terms.expression = factor_loss(dataset, triplets.expression, Factor::kExpression,
                                 weights.triplet_margin, weight, grad);
  terms.identity = factor_loss(dataset, triplets.identity, Factor::kIdentity,
                               weights.triplet_margin, weight, grad);
  terms.pose = factor_loss(dataset, triplets.pose, Factor::kPose,
                           weights.triplet_margin, weight, grad);
  return terms;
}

LossReport total_loss(const Dataset& dataset, const LossWeights& weights,
                      const TripletSet* triplets, GradientPack* grad,
                      const std::vector<int>* subset, double lux_total) {
  validate(weights);
  LossReport report;
  report.reproj = dataset_loss_3d(dataset, weights.lambda_3d, grad, subset);
  if (triplets) {
    const TripletTerms tt =
        triplet_losses(dataset, *triplets, weights, weights.lambda_disentangle, grad);
    report.triplet_expression = tt.expression;
    report.triplet_identity = tt.identity;
    report.triplet_pose = tt.pose;
  }
  const RegTerms reg = regularization_loss(dataset, weights, grad, subset);
  report.reg_scale = reg.scale;
  report.reg_shape = reg.shape;
  report.lux = lux_total;
  report.total = weights.lambda_3d * report.reproj +
                 weights.lambda_disentangle * report.disentangle() +
                 weights.lambda_scale * report.reg_scale +
                 weights.lambda_shape * report.reg_shape + lux_total;
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v))
      throw std::runtime_error(std::string("loss term '") + name + "' is not finite");
  };
  check(report.reproj, "reprojection");
  check(report.disentangle(), "disentangle");
  check(report.reg_scale, "reg_scale");
  check(report.reg_shape, "reg_shape");
  check(report.total, "total");
  return report;
}

}  // namespace lifted
