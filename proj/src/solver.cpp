#include "lifted/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "lifted/geometry.hpp"

namespace lifted {

void validate(const SolverConfig& config) {
  if (!(config.lr > 0)) throw std::runtime_error("solver config: lr must be > 0");
  if (!(config.decay_factor > 0 && config.decay_factor <= 1))
    throw std::runtime_error("solver config: decay_factor must be in (0, 1]");
  if (config.decay_every_epochs < 1)
    throw std::runtime_error("solver config: decay_every_epochs must be >= 1");
  if (config.epochs < 1) throw std::runtime_error("solver config: epochs must be >= 1");
  if (config.batch_size < 1) throw std::runtime_error("solver config: batch_size must be >= 1");
  if (!(config.adam_beta1 >= 0 && config.adam_beta1 < 1) ||
      !(config.adam_beta2 >= 0 && config.adam_beta2 < 1))
    throw std::runtime_error("solver config: Adam betas must be in [0, 1)");
  if (!(config.adam_eps > 0)) throw std::runtime_error("solver config: adam_eps must be > 0");
  if (!(config.sigma_min > 0)) throw std::runtime_error("solver config: sigma_min must be > 0");
  validate(config.weights);
}

void initialize(Dataset& dataset, const SolverConfig& config) {
  ShapeModel& model = dataset.model;
  const int n_vertices = model.vertex_count();
  model.mean.resize(n_vertices, 3);
  for (int i = 0; i < n_vertices; ++i) {
    const Vec2 uv = model.grid.uv(i);
    const double du = uv[0] - 0.5, dv = uv[1] - 0.5;
    model.mean(i, 0) = du;
    model.mean(i, 1) = dv;
    model.mean(i, 2) = 0.3 * std::exp(-(du * du + dv * dv) / (2.0 * 0.15 * 0.15));
  }
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1e-3);
  for (Points3& basis : model.identity_basis) {
    basis.resize(n_vertices, 3);
    for (int i = 0; i < n_vertices; ++i)
      for (int c = 0; c < 3; ++c) basis(i, c) = noise(rng);
  }
  for (Points3& basis : model.expression_basis) {
    basis.resize(n_vertices, 3);
    for (int i = 0; i < n_vertices; ++i)
      for (int c = 0; c < 3; ++c) basis(i, c) = noise(rng);
  }

  const double shape_diag = (model.mean.colwise().maxCoeff() - model.mean.colwise().minCoeff()).norm();
  for (InstanceRecord& inst : dataset.instances) {
    inst.code_identity = VecX::Zero(model.identity_dim());
    inst.code_expression = VecX::Zero(model.expression_dim());
    inst.camera = CameraPose{};
    Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
    Vec2 hi = -lo;
    Vec2 sum = Vec2::Zero();
    int visible = 0;
    for (Eigen::Index i = 0; i < inst.observations.rows(); ++i) {
      if (!inst.visibility[i]) continue;
      const Vec2 p = inst.observations.row(i);
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
      sum += p;
      ++visible;
    }
    if (visible == 0) continue;
    inst.camera.t = sum / visible;
    const double obs_diag = (hi - lo).norm();
    if (obs_diag > 0 && shape_diag > 0) inst.camera.sigma = obs_diag / shape_diag;
  }
}

namespace {

struct AdamScale {
  double lr, b1, b2, bias1, bias2, eps;
};

template <typename T>
void adam_step(T& param, const T& g, T& m, T& v, const AdamScale& s) {
  m = s.b1 * m + (1.0 - s.b1) * g;
  v = s.b2 * v + (1.0 - s.b2) * g.cwiseProduct(g);
  param.array() -= s.lr * (m.array() / s.bias1) / ((v.array() / s.bias2).sqrt() + s.eps);
}

void adam_step(double& param, double g, double& m, double& v, const AdamScale& s) {
  m = s.b1 * m + (1.0 - s.b1) * g;
  v = s.b2 * v + (1.0 - s.b2) * g * g;
  param -= s.lr * (m / s.bias1) / (std::sqrt(v / s.bias2) + s.eps);
}

void check_finite_pack(const GradientPack& pack) {
  if (!pack.model.mean.allFinite())
    throw std::runtime_error("non-finite gradient in the mean shape");
  for (std::size_t s = 0; s < pack.model.identity_basis.size(); ++s)
    if (!pack.model.identity_basis[s].allFinite())
      throw std::runtime_error("non-finite gradient in identity basis " + std::to_string(s));
  for (std::size_t s = 0; s < pack.model.expression_basis.size(); ++s)
    if (!pack.model.expression_basis[s].allFinite())
      throw std::runtime_error("non-finite gradient in expression basis " + std::to_string(s));
  for (std::size_t k = 0; k < pack.instances.size(); ++k) {
    const InstanceGrad& g = pack.instances[k];
    if (!g.q.allFinite() || !g.t.allFinite() || !std::isfinite(g.sigma) ||
        !g.code_identity.allFinite() || !g.code_expression.allFinite())
      throw std::runtime_error("non-finite gradient in instance " + std::to_string(k));
  }
}

}  // namespace

FitResult fit(Dataset& dataset, const SolverConfig& config) {
  validate(config);
  FitResult result;
  std::vector<int> active;
  for (int k = 0; k < dataset.size(); ++k) {
    if (dataset.instances[k].visible_count() >= 4) active.push_back(k);
    else result.excluded.push_back(k);
  }
  if (active.empty()) throw std::runtime_error("fit: no instance has >= 4 visible points");

  GradientPack pack, m, v;
  pack.zero(dataset);
  m.zero(dataset);
  v.zero(dataset);
  std::vector<char> in_batch(dataset.size(), 0);
  long long step_count = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr_epoch =
        config.lr * std::pow(config.decay_factor, epoch / config.decay_every_epochs);
    TripletSet epoch_triplets;
    if (config.use_triplets)
      epoch_triplets = sample_triplets(dataset, config.seed + std::uint64_t(epoch), &active);

    LossReport epoch_report;
    for (std::size_t begin = 0; begin < active.size(); begin += config.batch_size) {
      const std::size_t end = std::min(active.size(), begin + config.batch_size);
      const std::vector<int> batch(active.begin() + begin, active.begin() + end);
      std::fill(in_batch.begin(), in_batch.end(), 0);
      for (int k : batch) in_batch[k] = 1;

      TripletSet batch_triplets;
      if (config.use_triplets) {
        auto keep = [&](const std::vector<Triplet>& in, std::vector<Triplet>& out) {
          for (const Triplet& t : in)
            if (in_batch[t.anchor]) out.push_back(t);
        };
        keep(epoch_triplets.expression, batch_triplets.expression);
        keep(epoch_triplets.identity, batch_triplets.identity);
        keep(epoch_triplets.pose, batch_triplets.pose);
      }

      pack.zero(dataset);
      const LossReport report =
          total_loss(dataset, config.weights, config.use_triplets ? &batch_triplets : nullptr,
                     &pack, &batch);
      check_finite_pack(pack);

      ++step_count;
      AdamScale scale;
      scale.lr = lr_epoch;
      scale.b1 = config.adam_beta1;
      scale.b2 = config.adam_beta2;
      scale.bias1 = 1.0 - std::pow(config.adam_beta1, double(step_count));
      scale.bias2 = 1.0 - std::pow(config.adam_beta2, double(step_count));
      scale.eps = config.adam_eps;

      adam_step(dataset.model.mean, pack.model.mean, m.model.mean, v.model.mean, scale);
      for (int s = 0; s < dataset.model.identity_dim(); ++s)
        adam_step(dataset.model.identity_basis[s], pack.model.identity_basis[s],
                  m.model.identity_basis[s], v.model.identity_basis[s], scale);
      for (int s = 0; s < dataset.model.expression_dim(); ++s)
        adam_step(dataset.model.expression_basis[s], pack.model.expression_basis[s],
                  m.model.expression_basis[s], v.model.expression_basis[s], scale);

      for (int k : batch) {
        InstanceRecord& inst = dataset.instances[k];
        InstanceGrad& g = pack.instances[k];
        if (g.code_identity.size() > 0)
          adam_step(inst.code_identity, g.code_identity, m.instances[k].code_identity,
                    v.instances[k].code_identity, scale);
        if (g.code_expression.size() > 0)
          adam_step(inst.code_expression, g.code_expression, m.instances[k].code_expression,
                    v.instances[k].code_expression, scale);
        // Tangent projection keeps the moment history orthogonal to q.
        const Vec4 qn = inst.camera.q.normalized();
        g.q -= g.q.dot(qn) * qn;
        adam_step(inst.camera.q, g.q, m.instances[k].q, v.instances[k].q, scale);
        inst.camera.q.normalize();
        adam_step(inst.camera.t, g.t, m.instances[k].t, v.instances[k].t, scale);
        adam_step(inst.camera.sigma, g.sigma, m.instances[k].sigma, v.instances[k].sigma, scale);
        inst.camera.sigma = std::max(inst.camera.sigma, config.sigma_min);
      }

      epoch_report.reproj += report.reproj;
      epoch_report.triplet_expression += report.triplet_expression;
      epoch_report.triplet_identity += report.triplet_identity;
      epoch_report.triplet_pose += report.triplet_pose;
      epoch_report.reg_scale += report.reg_scale;
      epoch_report.reg_shape += report.reg_shape;
      epoch_report.total += report.total;
    }
    result.history.push_back(epoch_report);
  }
  return result;
}

namespace {

struct CoordRef {
  std::string name;
  double* value;
  double analytic;
};

/// Flattened view of every free parameter alongside its analytic gradient.
std::vector<CoordRef> coordinate_table(Dataset& dataset, const GradientPack& pack) {
  std::vector<CoordRef> coords;
  auto add_points = [&](Points3& p, const Points3& g, const std::string& base) {
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index c = 0; c < 3; ++c)
        coords.push_back({base + "(" + std::to_string(i) + "," + std::to_string(c) + ")",
                          &p(i, c), g(i, c)});
  };
  add_points(dataset.model.mean, pack.model.mean, "mean");
  for (int s = 0; s < dataset.model.identity_dim(); ++s)
    add_points(dataset.model.identity_basis[s], pack.model.identity_basis[s],
               "identity_basis[" + std::to_string(s) + "]");
  for (int s = 0; s < dataset.model.expression_dim(); ++s)
    add_points(dataset.model.expression_basis[s], pack.model.expression_basis[s],
               "expression_basis[" + std::to_string(s) + "]");
  for (int k = 0; k < dataset.size(); ++k) {
    InstanceRecord& inst = dataset.instances[k];
    const InstanceGrad& g = pack.instances[k];
    const std::string base = "instance " + std::to_string(k) + " ";
    for (int s = 0; s < g.code_identity.size(); ++s)
      coords.push_back({base + "code_identity[" + std::to_string(s) + "]",
                        &inst.code_identity[s], g.code_identity[s]});
    for (int s = 0; s < g.code_expression.size(); ++s)
      coords.push_back({base + "code_expression[" + std::to_string(s) + "]",
                        &inst.code_expression[s], g.code_expression[s]});
    for (int c = 0; c < 4; ++c)
      coords.push_back({base + "q[" + std::to_string(c) + "]", &inst.camera.q[c], g.q[c]});
    for (int c = 0; c < 2; ++c)
      coords.push_back({base + "t[" + std::to_string(c) + "]", &inst.camera.t[c], g.t[c]});
    coords.push_back({base + "sigma", &inst.camera.sigma, g.sigma});
  }
  return coords;
}

}  // namespace

GradCheckReport gradient_check(const Dataset& dataset, const SolverConfig& config,
                               int samples, std::uint64_t seed) {
  Dataset work = dataset;
  TripletSet triplets;
  if (config.use_triplets) triplets = sample_triplets(work, config.seed, nullptr);
  const TripletSet* tp = config.use_triplets ? &triplets : nullptr;

  GradientPack pack;
  pack.zero(work);
  total_loss(work, config.weights, tp, &pack);
  std::vector<CoordRef> coords = coordinate_table(work, pack);

  GradCheckReport report;
  std::mt19937_64 rng(seed);
  const double h = 1e-5;
  for (int s = 0; s < samples; ++s) {
    CoordRef& coord = coords[rng() % coords.size()];
    const double original = *coord.value;
    *coord.value = original + h;
    const double f_plus = total_loss(work, config.weights, tp).total;
    *coord.value = original - h;
    const double f_minus = total_loss(work, config.weights, tp).total;
    *coord.value = original;
    const double fd = (f_plus - f_minus) / (2.0 * h);
    const double denom = std::max({std::abs(coord.analytic), std::abs(fd), 1e-6});
    const double rel = std::abs(coord.analytic - fd) / denom;
    ++report.samples;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst = coord.name;
    }
  }
  return report;
}

}  // namespace lifted
