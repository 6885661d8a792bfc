#pragma once

#include <cstdint>

#include "lifted/types.hpp"

namespace lifted {

/// Per-texel unit normals with a defined-region mask.
struct NormalMap {
  int width = 0;
  int height = 0;
  Channel nx, ny, nz;  // (y, x)
  Mask defined;
};

/// Order-2 real spherical-harmonics monomials; normalization constants live
/// in the coefficient vector. Throws unless the input is unit length within
/// 1e-6.
Vec9 sh_basis(const Vec3& normal);

/// Per-pixel <L, H(n)>, clamped at 0; undefined pixels render 0.
Channel render_shading(const NormalMap& normals, const Vec9& L);

/// Least-squares illumination under the constant-albedo assumption A = 0.5:
/// fits L to T / 0.5 over defined pixels. Throws on a rank-deficient normal
/// system, reporting its condition number.
Vec9 estimate_illumination(const Channel& texture, const NormalMap& normals);

struct LuxWeights {
  double lambda_shade = 1e-4;
  double lambda_albedo = 2e-6;
  double huber_delta = 1.0;
};

struct ShMapState {
  Vec9 L = Vec9::Zero();
  Channel albedo;           // clamped to [0, 1]
  Channel shading_adapted;  // clamped to >= 0
  NormalMap normals;
};

struct LuxTerms {
  double recon = 0.0;          // ||T - S_adapted .* A||^2
  double shade_smooth = 0.0;   // lambda_shade ||grad S_adapted||^2
  double albedo_smooth = 0.0;  // lambda_albedo ||grad A||_1
  double prior = 0.0;          // ||L - L_hat||^2
  double consistency = 0.0;    // Huber(S_adapted - S_rendered)

  double total() const { return recon + shade_smooth + albedo_smooth + prior + consistency; }
};

/// All loss terms over the defined mask; gradient outputs (accumulated) are
/// optional. Spatial gradients are forward differences, contributing only
/// where both pixels are defined.
LuxTerms lux_losses(const ShMapState& state, const Channel& texture, const Vec9& L_hat,
                    const LuxWeights& weights, Vec9* grad_L = nullptr,
                    Channel* grad_albedo = nullptr, Channel* grad_shading = nullptr);

struct LuxConfig {
  int iterations = 1500;
  double lr = 5e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  LuxWeights weights;
};

/// Joint Adam on (L, albedo, adapted shading) starting from L = L_hat,
/// A = 0.5, S = rendered shading. Clamps after every step; the result is
/// gauge-fixed so mean albedo over the mask is 0.5.
ShMapState decompose(const Channel& texture, const NormalMap& normals, const LuxConfig& config);

/// Mean squared reconstruction residual per defined pixel.
double reconstruction_residual(const ShMapState& state, const Channel& texture);

}  // namespace lifted
