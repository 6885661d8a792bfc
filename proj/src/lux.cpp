#include "lifted/lux.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lifted {

namespace {

void check_map(const NormalMap& normals) {
  const auto h = normals.defined.rows(), w = normals.defined.cols();
  if (int(h) != normals.height || int(w) != normals.width ||
      normals.nx.rows() != h || normals.nx.cols() != w || normals.ny.rows() != h ||
      normals.ny.cols() != w || normals.nz.rows() != h || normals.nz.cols() != w)
    throw std::runtime_error("normal map: inconsistent channel shapes");
}

Vec3 normal_at(const NormalMap& normals, int y, int x) {
  return Vec3(normals.nx(y, x), normals.ny(y, x), normals.nz(y, x));
}

}  // namespace

Vec9 sh_basis(const Vec3& normal) {
  if (std::abs(normal.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("sh_basis: normal must be unit length");
  const double x = normal[0], y = normal[1], z = normal[2];
  Vec9 h;
  h << 1.0, x, y, z, x * y, x * z, y * z, x * x - y * y, 3.0 * z * z - 1.0;
  return h;
}

Channel render_shading(const NormalMap& normals, const Vec9& L) {
  check_map(normals);
  Channel out = Channel::Zero(normals.height, normals.width);
  for (int y = 0; y < normals.height; ++y)
    for (int x = 0; x < normals.width; ++x) {
      if (!normals.defined(y, x)) continue;
      out(y, x) = std::max(0.0, L.dot(sh_basis(normal_at(normals, y, x))));
    }
  return out;
}

Vec9 estimate_illumination(const Channel& texture, const NormalMap& normals) {
  check_map(normals);
  if (texture.rows() != normals.height || texture.cols() != normals.width)
    throw std::runtime_error("estimate_illumination: texture shape mismatch");
  int count = 0;
  for (int y = 0; y < normals.height; ++y)
    for (int x = 0; x < normals.width; ++x) count += normals.defined(y, x) ? 1 : 0;
  Eigen::MatrixXd design(count, 9);
  VecX rhs(count);
  int row = 0;
  for (int y = 0; y < normals.height; ++y)
    for (int x = 0; x < normals.width; ++x) {
      if (!normals.defined(y, x)) continue;
      design.row(row) = sh_basis(normal_at(normals, y, x)).transpose();
      rhs[row] = texture(y, x) / 0.5;
      ++row;
    }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()[0];
  const double smin = count >= 9 ? svd.singularValues()[8] : 0.0;
  if (!(smin > 0) || smax / smin > 1e12) {
    const double cond = smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
    throw std::runtime_error("estimate_illumination: rank-deficient normal system, condition " +
                             std::to_string(cond));
  }
  return svd.solve(rhs);
}

LuxTerms lux_losses(const ShMapState& state, const Channel& texture, const Vec9& L_hat,
                    const LuxWeights& weights, Vec9* grad_L, Channel* grad_albedo,
                    Channel* grad_shading) {
  check_map(state.normals);
  const int h = state.normals.height, w = state.normals.width;
  const Mask& mask = state.normals.defined;
  LuxTerms terms;

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      const double s = state.shading_adapted(y, x);
      const double a = state.albedo(y, x);
      const double r = texture(y, x) - s * a;
      terms.recon += r * r;
      if (grad_albedo) (*grad_albedo)(y, x) += -2.0 * r * s;
      if (grad_shading) (*grad_shading)(y, x) += -2.0 * r * a;

      const Vec9 basis = sh_basis(normal_at(state.normals, y, x));
      const double dot = state.L.dot(basis);
      const double rendered = std::max(0.0, dot);
      const double rc = s - rendered;
      const double delta = weights.huber_delta;
      if (std::abs(rc) <= delta) {
        terms.consistency += 0.5 * rc * rc;
        if (grad_shading) (*grad_shading)(y, x) += rc;
        if (grad_L && dot > 0.0) *grad_L += -rc * basis;
      } else {
        terms.consistency += delta * (std::abs(rc) - 0.5 * delta);
        const double sign = rc > 0 ? 1.0 : -1.0;
        if (grad_shading) (*grad_shading)(y, x) += delta * sign;
        if (grad_L && dot > 0.0) *grad_L += -delta * sign * basis;
      }
    }

  // Forward differences; pairs with an undefined neighbor contribute zero.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      if (x + 1 < w && mask(y, x + 1)) {
        const double ds = state.shading_adapted(y, x + 1) - state.shading_adapted(y, x);
        terms.shade_smooth += weights.lambda_shade * ds * ds;
        if (grad_shading) {
          (*grad_shading)(y, x + 1) += 2.0 * weights.lambda_shade * ds;
          (*grad_shading)(y, x) -= 2.0 * weights.lambda_shade * ds;
        }
        const double da = state.albedo(y, x + 1) - state.albedo(y, x);
        terms.albedo_smooth += weights.lambda_albedo * std::abs(da);
        if (grad_albedo && da != 0.0) {
          const double sign = da > 0 ? 1.0 : -1.0;
          (*grad_albedo)(y, x + 1) += weights.lambda_albedo * sign;
          (*grad_albedo)(y, x) -= weights.lambda_albedo * sign;
        }
      }
      if (y + 1 < h && mask(y + 1, x)) {
        const double ds = state.shading_adapted(y + 1, x) - state.shading_adapted(y, x);
        terms.shade_smooth += weights.lambda_shade * ds * ds;
        if (grad_shading) {
          (*grad_shading)(y + 1, x) += 2.0 * weights.lambda_shade * ds;
          (*grad_shading)(y, x) -= 2.0 * weights.lambda_shade * ds;
        }
        const double da = state.albedo(y + 1, x) - state.albedo(y, x);
        terms.albedo_smooth += weights.lambda_albedo * std::abs(da);
        if (grad_albedo && da != 0.0) {
          const double sign = da > 0 ? 1.0 : -1.0;
          (*grad_albedo)(y + 1, x) += weights.lambda_albedo * sign;
          (*grad_albedo)(y, x) -= weights.lambda_albedo * sign;
        }
      }
    }

  const Vec9 dl = state.L - L_hat;
  terms.prior = dl.squaredNorm();
  if (grad_L) *grad_L += 2.0 * dl;
  return terms;
}

ShMapState decompose(const Channel& texture, const NormalMap& normals, const LuxConfig& config) {
  check_map(normals);
  const int h = normals.height, w = normals.width;
  const Vec9 L_hat = estimate_illumination(texture, normals);

  ShMapState state;
  state.normals = normals;
  state.L = L_hat;
  state.albedo = Channel::Zero(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (normals.defined(y, x)) state.albedo(y, x) = 0.5;
  state.shading_adapted = render_shading(normals, state.L);

  Vec9 mL = Vec9::Zero(), vL = Vec9::Zero(), gL;
  Channel mA = Channel::Zero(h, w), vA = Channel::Zero(h, w), gA(h, w);
  Channel mS = Channel::Zero(h, w), vS = Channel::Zero(h, w), gS(h, w);

  for (int it = 1; it <= config.iterations; ++it) {
    gL.setZero();
    gA.setZero();
    gS.setZero();
    lux_losses(state, texture, L_hat, config.weights, &gL, &gA, &gS);
    const double bias1 = 1.0 - std::pow(config.adam_beta1, double(it));
    const double bias2 = 1.0 - std::pow(config.adam_beta2, double(it));
    auto step = [&](auto& p, const auto& g, auto& m, auto& v) {
      m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * g;
      v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * g * g;
      p -= config.lr * (m / bias1) / ((v / bias2).sqrt() + config.adam_eps);
    };
    mL = config.adam_beta1 * mL + (1.0 - config.adam_beta1) * gL;
    vL = config.adam_beta2 * vL + (1.0 - config.adam_beta2) * gL.cwiseProduct(gL);
    state.L.array() -=
        config.lr * (mL.array() / bias1) / ((vL.array() / bias2).sqrt() + config.adam_eps);
    step(state.albedo, gA, mA, vA);
    step(state.shading_adapted, gS, mS, vS);
    state.albedo = state.albedo.min(1.0).max(0.0);
    state.shading_adapted = state.shading_adapted.max(0.0);
  }

  // Scale gauge: (A, S) -> (cA, S/c) leaves T = S .* A unchanged; anchor the
  // mean albedo at 0.5.
  double mean_a = 0.0;
  int count = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (normals.defined(y, x)) {
        mean_a += state.albedo(y, x);
        ++count;
      }
  mean_a /= count;
  if (mean_a > 0) {
    const double c = 0.5 / mean_a;
    state.albedo = (state.albedo * c).min(1.0).max(0.0);
    state.shading_adapted /= c;
    state.L /= c;
  }
  return state;
}

double reconstruction_residual(const ShMapState& state, const Channel& texture) {
  double sum = 0.0;
  int count = 0;
  for (int y = 0; y < state.normals.height; ++y)
    for (int x = 0; x < state.normals.width; ++x) {
      if (!state.normals.defined(y, x)) continue;
      const double r = texture(y, x) - state.shading_adapted(y, x) * state.albedo(y, x);
      sum += r * r;
      ++count;
    }
  return count ? sum / count : 0.0;
}

}  // namespace lifted
