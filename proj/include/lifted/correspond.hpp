#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lifted/model.hpp"
#include "lifted/types.hpp"

namespace lifted {

/// Dense per-pixel (u,v) predictions with a foreground mask. Foreground
/// entries lie in [0,1]^2; background pixels carry no prediction.
struct UvMap {
  int width = 0;
  int height = 0;
  Channel u;        // (y, x)
  Channel v;
  Mask foreground;  // nonzero = predicted
};

void validate(const UvMap& map);

// Stored as 3-channel PFM (u, v, mask), mask > 0.5 meaning foreground.
UvMap load_uv_map(const std::string& path);
void save_uv_map(const std::string& path, const UvMap& map);

/// Half a grid cell in UV units, the default match threshold.
inline double default_tau(const UvGrid& grid) { return 1.0 / (2.0 * grid.n); }

/// For every grid vertex, the foreground pixel whose UV prediction is nearest
/// to the vertex's (u,v). Observations are pixel coordinates (x, y); the
/// vertex is visible iff the nearest prediction is within tau. Ties go to the
/// smallest row-major pixel index.
std::pair<Points2, std::vector<std::uint8_t>> extract_observations(const UvMap& map,
                                                                   const UvGrid& grid,
                                                                   double tau);

}  // namespace lifted
