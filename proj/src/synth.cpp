#include "lifted/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>

#include "lifted/geometry.hpp"
#include "lifted/render.hpp"

namespace lifted {

void validate(const SynthConfig& config) {
  if (config.n < 1) throw std::runtime_error("synth config: n must be >= 1");
  if (config.identity_dims < 0 || config.expression_dims < 0)
    throw std::runtime_error("synth config: negative basis count");
  if (config.instance_count < 1) throw std::runtime_error("synth config: K must be >= 1");
  if (!(config.yaw_min_deg <= config.yaw_max_deg) ||
      !(config.pitch_min_deg <= config.pitch_max_deg) ||
      !(config.roll_min_deg <= config.roll_max_deg))
    throw std::runtime_error("synth config: angle range not well ordered");
  if (!(config.sigma_min > 0) || !(config.sigma_min <= config.sigma_max))
    throw std::runtime_error("synth config: sigma range not well ordered");
  if (!(config.occlusion_rate >= 0 && config.occlusion_rate < 1))
    throw std::runtime_error("synth config: occlusion_rate must be in [0, 1)");
  if (!(config.noise_std >= 0)) throw std::runtime_error("synth config: noise_std must be >= 0");
  if (config.identity_groups < 1 || config.expression_groups < 1 || config.pose_groups < 1)
    throw std::runtime_error("synth config: group counts must be >= 1");
  if (config.with_lux && config.texture_size < 2)
    throw std::runtime_error("synth config: texture_size must be >= 2");
}

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg(double d) { return d * kPi / 180.0; }

/// Gram-Schmidt over flattened N x 3 blocks; every output has unit Frobenius
/// norm and pairwise zero inner product.
std::vector<Points3> orthonormal_bases(int count, int n_vertices, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Points3> bases;
  for (int s = 0; s < count; ++s) {
    Points3 b(n_vertices, 3);
    for (int i = 0; i < n_vertices; ++i)
      for (int c = 0; c < 3; ++c) b(i, c) = gauss(rng);
    for (const Points3& prev : bases) b -= (b.array() * prev.array()).sum() * prev;
    const double norm = b.norm();
    if (norm < 1e-8) throw std::runtime_error("degenerate random basis draw");
    bases.push_back(b / norm);
  }
  return bases;
}

int nearest_grid_index(const UvGrid& grid, double u, double v) {
  const int iu = int(std::lround(u * grid.n));
  const int iv = int(std::lround(v * grid.n));
  return grid.index(std::min(grid.n, std::max(0, iu)), std::min(grid.n, std::max(0, iv)));
}

}  // namespace

SynthOutput generate(const SynthConfig& config) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform_in = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SynthOutput out;
  ShapeModel& model = out.dataset.model;
  model.grid.n = config.n;
  const int n_vertices = model.vertex_count();

  // Smooth ground-truth surface: Gaussian bump plus low-frequency ripples.
  std::array<double, 4> ripple;
  for (double& a : ripple) a = uniform_in(-0.03, 0.03);
  model.mean.resize(n_vertices, 3);
  for (int i = 0; i < n_vertices; ++i) {
    const Vec2 uv = model.grid.uv(i);
    const double du = uv[0] - 0.5, dv = uv[1] - 0.5;
    double z = 0.3 * std::exp(-(du * du + dv * dv) / (2.0 * 0.15 * 0.15));
    int r = 0;
    for (int k = 1; k <= 2; ++k)
      for (int l = 1; l <= 2; ++l)
        z += ripple[r++] * std::sin(kPi * k * uv[0]) * std::sin(kPi * l * uv[1]);
    model.mean(i, 0) = du;
    model.mean(i, 1) = dv;
    model.mean(i, 2) = z;
  }
  const double diameter =
      (model.mean.colwise().maxCoeff() - model.mean.colwise().minCoeff()).norm();

  const int total_dims = config.identity_dims + config.expression_dims;
  std::vector<Points3> bases = orthonormal_bases(total_dims, n_vertices, rng);
  const double basis_scale =
      total_dims > 0 ? 0.05 * diameter * std::sqrt(double(n_vertices) / total_dims) : 0.0;
  for (Points3& b : bases) b *= basis_scale;
  model.identity_basis.assign(bases.begin(), bases.begin() + config.identity_dims);
  model.expression_basis.assign(bases.begin() + config.identity_dims, bases.end());

  // Group-shared factors.
  std::vector<VecX> identity_codes(config.identity_groups);
  for (VecX& c : identity_codes) {
    c.resize(config.identity_dims);
    for (int s = 0; s < config.identity_dims; ++s) c[s] = gauss(rng);
  }
  std::vector<VecX> expression_codes(config.expression_groups);
  for (VecX& c : expression_codes) {
    c.resize(config.expression_dims);
    for (int s = 0; s < config.expression_dims; ++s) c[s] = gauss(rng);
  }
  struct PoseGroup {
    CameraPose camera;
    double yaw_deg;
  };
  std::vector<PoseGroup> poses(config.pose_groups);
  for (PoseGroup& p : poses) {
    p.yaw_deg = uniform_in(config.yaw_min_deg, config.yaw_max_deg);
    const double pitch = uniform_in(config.pitch_min_deg, config.pitch_max_deg);
    const double roll = uniform_in(config.roll_min_deg, config.roll_max_deg);
    const Vec4 qz = axis_angle_quat(Vec3::UnitZ(), deg(roll));
    const Vec4 qy = axis_angle_quat(Vec3::UnitY(), deg(p.yaw_deg));
    const Vec4 qx = axis_angle_quat(Vec3::UnitX(), deg(pitch));
    p.camera.q = quat_multiply(quat_multiply(qz, qy), qx);
    p.camera.t = Vec2(uniform_in(-config.t_range, config.t_range),
                      uniform_in(-config.t_range, config.t_range));
    p.camera.sigma = uniform_in(config.sigma_min, config.sigma_max);
  }

  // Landmark spec: five single-vertex landmarks at fixed surface positions.
  const std::array<std::pair<double, double>, 5> landmark_uv = {
      {{0.3, 0.4}, {0.7, 0.4}, {0.5, 0.55}, {0.35, 0.75}, {0.65, 0.75}}};
  for (const auto& [u, v] : landmark_uv) {
    LandmarkSpec::Landmark lm;
    lm.terms.emplace_back(nearest_grid_index(model.grid, u, v), 1.0);
    out.landmark_spec.landmarks.push_back(lm);
  }
  out.landmark_spec.left_eye = 0;
  out.landmark_spec.right_eye = 1;

  for (int k = 0; k < config.instance_count; ++k) {
    InstanceRecord inst;
    char buf[32];
    std::snprintf(buf, sizeof buf, "inst%04d", k);
    inst.id = buf;
    const int ig = int(rng() % std::uint64_t(config.identity_groups));
    const int eg = int(rng() % std::uint64_t(config.expression_groups));
    const int pg = int(rng() % std::uint64_t(config.pose_groups));
    inst.labels = InstanceLabels{"id" + std::to_string(ig), "exp" + std::to_string(eg),
                                 "pose" + std::to_string(pg)};
    inst.code_identity = identity_codes[ig];
    inst.code_expression = expression_codes[eg];
    inst.camera = poses[pg].camera;

    const Points3 shape = instance_shape(model, inst);
    Points2 proj = project(shape, inst.camera);
    if (config.noise_std > 0) {
      for (Eigen::Index i = 0; i < proj.rows(); ++i)
        for (int c = 0; c < 2; ++c) proj(i, c) += config.noise_std * gauss(rng);
    }
    inst.visibility.resize(n_vertices);
    for (int i = 0; i < n_vertices; ++i)
      inst.visibility[i] = unit(rng) >= config.occlusion_rate ? 1 : 0;
    inst.observations = Points2::Zero(n_vertices, 2);
    for (int i = 0; i < n_vertices; ++i)
      if (inst.visibility[i]) inst.observations.row(i) = proj.row(i);

    LandmarkFrame f2, f3;
    f2.id = inst.id;
    f3.id = inst.id;
    f2.left_eye = f3.left_eye = 0;
    f2.right_eye = f3.right_eye = 1;
    f2.has_yaw = f3.has_yaw = true;
    f2.yaw_deg = f3.yaw_deg = poses[pg].yaw_deg;
    const int m_count = int(out.landmark_spec.landmarks.size());
    f2.landmarks.resize(m_count, 2);
    f3.landmarks.resize(m_count, 3);
    for (int m = 0; m < m_count; ++m) {
      const int idx = out.landmark_spec.landmarks[m].terms[0].first;
      f2.landmarks.row(m) = proj.row(idx);
      f3.landmarks.row(m) = shape.row(idx);
    }
    out.landmarks_2d.push_back(std::move(f2));
    out.landmarks_3d.push_back(std::move(f3));
    out.dataset.instances.push_back(std::move(inst));
  }

  if (config.with_lux) {
    LuxGroundTruth lux;
    const int size = config.texture_size;
    lux.normals =
        render_normal_map_uv(model, out.dataset.instances[0], size, size);
    // Piecewise-constant albedo pinwheel, rescaled to mask mean exactly 0.5.
    // Sector frequency stays clear of the low-order lighting harmonics so the
    // pattern is not mistaken for shading.
    lux.albedo = Channel::Zero(size, size);
    double mean_a = 0.0;
    int count = 0;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        if (!lux.normals.defined(y, x)) continue;
        const double u = double(x) / (size - 1) - 0.5;
        const double v = double(y) / (size - 1) - 0.5;
        lux.albedo(y, x) = std::cos(8.0 * std::atan2(v, u)) >= 0.0 ? 0.4 : 0.6;
        mean_a += lux.albedo(y, x);
        ++count;
      }
    if (count < 9) throw std::runtime_error("lux synthesis: normal map nearly empty");
    mean_a /= count;
    lux.albedo *= 0.5 / mean_a;

    lux.L[0] = 0.3 * gauss(rng);
    for (int s = 1; s < 9; ++s) lux.L[s] = 0.15 * gauss(rng);
    // Raise the ambient term until shading stays in the linear regime.
    double min_shade = std::numeric_limits<double>::infinity();
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        if (!lux.normals.defined(y, x)) continue;
        const Vec3 n(lux.normals.nx(y, x), lux.normals.ny(y, x), lux.normals.nz(y, x));
        min_shade = std::min(min_shade, lux.L.dot(sh_basis(n)));
      }
    if (min_shade < 0.15) lux.L[0] += 0.15 - min_shade;
    lux.texture = render_shading(lux.normals, lux.L) * lux.albedo;
    out.lux = std::move(lux);
  }

  validate(out.dataset);
  return out;
}

}  // namespace lifted
