#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lifted/model.hpp"
#include "lifted/objective.hpp"

namespace lifted {

struct SolverConfig {
  double lr = 1e-4;
  double decay_factor = 0.5;
  int decay_every_epochs = 50;
  int epochs = 100;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double sigma_min = 1e-6;
  bool use_triplets = true;
  LossWeights weights;
};

void validate(const SolverConfig& config);

/// Sets the mean to a Gaussian surface facing +z over the centered unit
/// grid, bases to small Gaussian noise, codes to zero, and cameras from the
/// visible observations (t = centroid, sigma = bbox diagonal ratio).
void initialize(Dataset& dataset, const SolverConfig& config);

struct FitResult {
  // history[e] sums the raw per-batch terms of epoch e; entry 0 is the loss
  // at the initial parameters when a single batch covers the dataset.
  std::vector<LossReport> history;
  std::vector<int> excluded;  // instances with < 4 visible points
};

/// Adam on all free variables. Quaternion gradients are projected to the
/// tangent space before the moment update; q is renormalized and sigma
/// clamped after every step. Deterministic for a fixed seed.
FitResult fit(Dataset& dataset, const SolverConfig& config);

struct GradCheckReport {
  double max_rel_err = 0.0;
  int samples = 0;
  std::string worst;  // coordinate with the largest relative error
};

/// Central finite differences (step 1e-5) against the analytic gradient on
/// `samples` random coordinates spanning every parameter block.
GradCheckReport gradient_check(const Dataset& dataset, const SolverConfig& config,
                               int samples, std::uint64_t seed);

}  // namespace lifted
