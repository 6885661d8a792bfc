#include "lifted/correspond.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lifted/io.hpp"
#include "lifted/parallel.hpp"

namespace lifted {

void validate(const UvMap& map) {
  if (map.width < 0 || map.height < 0)
    throw std::runtime_error("uv map: negative dimensions");
  auto check_shape = [&](const auto& ch, const char* name) {
    if (int(ch.rows()) != map.height || int(ch.cols()) != map.width)
      throw std::runtime_error(std::string("uv map: channel '") + name + "' shape mismatch");
  };
  check_shape(map.u, "u");
  check_shape(map.v, "v");
  check_shape(map.foreground, "mask");
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      if (map.foreground(y, x)) {
        const double u = map.u(y, x), v = map.v(y, x);
        if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0))
          throw std::runtime_error("uv map: foreground pixel (" + std::to_string(x) + ", " +
                                   std::to_string(y) + ") outside the unit square");
      }
}

UvMap load_uv_map(const std::string& path) {
  const PfmImage image = read_pfm(path);
  if (image.channels != 3)
    throw std::runtime_error("uv map '" + path + "': expected 3 channels, got " +
                             std::to_string(image.channels));
  UvMap map;
  map.width = image.width;
  map.height = image.height;
  map.u = unpack_channel(image, 0);
  map.v = unpack_channel(image, 1);
  map.foreground = Mask::Zero(map.height, map.width);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      map.foreground(y, x) = image.at(x, y, 2) > 0.5f ? 1 : 0;
  validate(map);
  return map;
}

void save_uv_map(const std::string& path, const UvMap& map) {
  Channel mask(map.height, map.width);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) mask(y, x) = map.foreground(y, x) ? 1.0 : 0.0;
  write_pfm(path, pack_pfm(map.u, map.v, mask));
}

std::pair<Points2, std::vector<std::uint8_t>> extract_observations(const UvMap& map,
                                                                   const UvGrid& grid,
                                                                   double tau) {
  if (!(tau > 0)) throw std::invalid_argument("extract_observations: tau must be > 0");
  const int n_vertices = grid.vertex_count();
  Points2 observations = Points2::Zero(n_vertices, 2);
  std::vector<std::uint8_t> visibility(n_vertices, 0);
  const double tau2 = tau * tau;
  parallel_for(0, n_vertices, [&](int i) {
    const Vec2 target = grid.uv(i);
    double best = std::numeric_limits<double>::infinity();
    int best_x = 0, best_y = 0;
    for (int y = 0; y < map.height; ++y)
      for (int x = 0; x < map.width; ++x) {
        if (!map.foreground(y, x)) continue;
        const double du = map.u(y, x) - target[0];
        const double dv = map.v(y, x) - target[1];
        const double d2 = du * du + dv * dv;
        if (d2 < best) {
          best = d2;
          best_x = x;
          best_y = y;
        }
      }
    if (best <= tau2) {
      observations(i, 0) = best_x;
      observations(i, 1) = best_y;
      visibility[i] = 1;
    }
  });
  return {std::move(observations), std::move(visibility)};
}

}  // namespace lifted
