#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lifted/model.hpp"
#include "lifted/types.hpp"

namespace lifted {

/// Landmarks as convex combinations of mesh vertices.
struct LandmarkSpec {
  struct Landmark {
    std::vector<std::pair<int, double>> terms;  // (vertex index, weight)
  };
  std::vector<Landmark> landmarks;
  int left_eye = -1;   // indices into `landmarks`
  int right_eye = -1;
};

/// Weights must be >= 0 and sum to 1 within 1e-9; indices < n_vertices.
void validate(const LandmarkSpec& spec, int n_vertices);

LandmarkSpec load_landmark_spec(const std::string& path);
void save_landmark_spec(const std::string& path, const LandmarkSpec& spec);

/// M x 3 weighted vertex positions, or their M x 2 projections.
Eigen::MatrixXd predict_landmarks(const ShapeModel& model, const InstanceRecord& inst,
                                  const LandmarkSpec& spec, bool project_2d);

/// Mean landmark error normalized by the ground-truth inter-ocular distance.
double nme_2d(const Points2& pred, const Points2& gt, int left_eye, int right_eye);

/// Procrustes-aligns pred onto gt (similarity, no reflection; rotation
/// optional), then mean error as percent of the gt bounding-box diagonal.
double nme_3d(const Points3& pred, const Points3& gt, bool with_rotation);

struct YawBinStat {
  double lo_deg = 0.0, hi_deg = 0.0;  // absolute yaw, (lo, hi] with [0, hi] first
  int count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

/// Groups per-instance scores by absolute yaw. `edges` are ascending bin
/// boundaries starting at 0 (e.g. {0, 30, 60, 90}). Empty bins are omitted;
/// a final row covers all instances.
std::vector<YawBinStat> report_by_yaw(const std::vector<double>& scores,
                                      const std::vector<double>& yaw_deg,
                                      const std::vector<double>& edges);

std::string yaw_report_csv(const std::vector<YawBinStat>& rows);

}  // namespace lifted
