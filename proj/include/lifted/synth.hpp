#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lifted/evalkit.hpp"
#include "lifted/io.hpp"
#include "lifted/lux.hpp"
#include "lifted/model.hpp"

namespace lifted {

struct SynthConfig {
  int n = 16;
  int identity_dims = 4;
  int expression_dims = 3;
  int instance_count = 150;
  double yaw_min_deg = -45.0, yaw_max_deg = 45.0;
  double pitch_min_deg = -10.0, pitch_max_deg = 10.0;
  double roll_min_deg = -5.0, roll_max_deg = 5.0;
  double sigma_min = 0.8, sigma_max = 1.2;
  double t_range = 0.15;
  double noise_std = 0.0;
  double occlusion_rate = 0.0;
  int identity_groups = 5;
  int expression_groups = 4;
  int pose_groups = 6;
  std::uint64_t seed = 0;
  bool with_lux = false;
  int texture_size = 128;
};

void validate(const SynthConfig& config);

struct LuxGroundTruth {
  Channel texture;
  NormalMap normals;
  Channel albedo;
  Vec9 L;
};

struct SynthOutput {
  Dataset dataset;  // ground-truth codes, cameras, and labels included
  std::vector<LandmarkFrame> landmarks_2d;
  std::vector<LandmarkFrame> landmarks_3d;
  LandmarkSpec landmark_spec;
  std::optional<LuxGroundTruth> lux;  // built from instance 0 when requested
};

/// Samples a smooth ground-truth model with orthonormal bases (scaled so the
/// generated deviations sit near 5% of the shape diameter), group-shared
/// codes and cameras, and exact projections plus optional noise/occlusion.
/// Instances sharing a label share that factor's parameters exactly.
SynthOutput generate(const SynthConfig& config);

}  // namespace lifted
