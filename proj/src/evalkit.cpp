#include "lifted/evalkit.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lifted/geometry.hpp"
#include "lifted/io.hpp"

namespace lifted {

void validate(const LandmarkSpec& spec, int n_vertices) {
  for (std::size_t m = 0; m < spec.landmarks.size(); ++m) {
    const auto& lm = spec.landmarks[m];
    if (lm.terms.empty())
      throw std::runtime_error("landmark " + std::to_string(m) + " has no terms");
    double sum = 0.0;
    for (const auto& [idx, w] : lm.terms) {
      if (idx < 0 || idx >= n_vertices)
        throw std::runtime_error("landmark " + std::to_string(m) + " references vertex " +
                                 std::to_string(idx) + " outside [0, " +
                                 std::to_string(n_vertices) + ")");
      if (!(w >= 0.0))
        throw std::runtime_error("landmark " + std::to_string(m) + " has a negative weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::runtime_error("landmark " + std::to_string(m) + " weights sum to " +
                               std::to_string(sum) + ", expected 1");
  }
  const int m_count = int(spec.landmarks.size());
  if (spec.left_eye < 0 || spec.left_eye >= m_count || spec.right_eye < 0 ||
      spec.right_eye >= m_count)
    throw std::runtime_error("landmark spec: eye indices outside the landmark list");
}

LandmarkSpec load_landmark_spec(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("landmark spec '" + path + "': " + e.what());
  }
  LandmarkSpec spec;
  for (const auto& lm : j.at("landmarks")) {
    LandmarkSpec::Landmark out;
    for (const auto& term : lm.at("terms"))
      out.terms.emplace_back(term.at(0).get<int>(), term.at(1).get<double>());
    spec.landmarks.push_back(std::move(out));
  }
  spec.left_eye = j.at("left_eye").get<int>();
  spec.right_eye = j.at("right_eye").get<int>();
  return spec;
}

void save_landmark_spec(const std::string& path, const LandmarkSpec& spec) {
  nlohmann::json j;
  nlohmann::json landmarks = nlohmann::json::array();
  for (const auto& lm : spec.landmarks) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [idx, w] : lm.terms) terms.push_back({idx, w});
    landmarks.push_back({{"terms", terms}});
  }
  j["landmarks"] = landmarks;
  j["left_eye"] = spec.left_eye;
  j["right_eye"] = spec.right_eye;
  write_text_file(path, j.dump() + "\n");
}

Eigen::MatrixXd predict_landmarks(const ShapeModel& model, const InstanceRecord& inst,
                                  const LandmarkSpec& spec, bool project_2d) {
  validate(spec, model.vertex_count());
  const Points3 shape = instance_shape(model, inst);
  const int m_count = int(spec.landmarks.size());
  if (project_2d) {
    const Points2 projected = project(shape, inst.camera);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m_count, 2);
    for (int m = 0; m < m_count; ++m)
      for (const auto& [idx, w] : spec.landmarks[m].terms)
        out.row(m) += w * projected.row(idx);
    return out;
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m_count, 3);
  for (int m = 0; m < m_count; ++m)
    for (const auto& [idx, w] : spec.landmarks[m].terms)
      out.row(m) += w * shape.row(idx);
  return out;
}

double nme_2d(const Points2& pred, const Points2& gt, int left_eye, int right_eye) {
  if (pred.rows() != gt.rows() || pred.rows() == 0)
    throw std::invalid_argument("nme_2d: prediction and ground truth sizes differ");
  if (left_eye < 0 || left_eye >= gt.rows() || right_eye < 0 || right_eye >= gt.rows())
    throw std::invalid_argument("nme_2d: eye index out of range");
  const double iod = (gt.row(left_eye) - gt.row(right_eye)).norm();
  if (!(iod > 0)) throw std::invalid_argument("nme_2d: coincident eye landmarks");
  double sum = 0.0;
  for (Eigen::Index m = 0; m < pred.rows(); ++m) sum += (pred.row(m) - gt.row(m)).norm();
  return sum / (double(pred.rows()) * iod);
}

double nme_3d(const Points3& pred, const Points3& gt, bool with_rotation) {
  if (pred.rows() != gt.rows() || pred.rows() < 3)
    throw std::invalid_argument("nme_3d: need matching landmark sets with >= 3 points");
  const Vec3 extent = gt.colwise().maxCoeff() - gt.colwise().minCoeff();
  const double diag = extent.norm();
  if (!(diag > 0)) throw std::invalid_argument("nme_3d: degenerate ground-truth bounding box");
  const ProcrustesResult aligned = procrustes_align(gt, pred, with_rotation);
  double sum = 0.0;
  for (Eigen::Index m = 0; m < pred.rows(); ++m)
    sum += (aligned.aligned.row(m) - gt.row(m)).norm();
  return 100.0 * sum / (double(pred.rows()) * diag);
}

std::vector<YawBinStat> report_by_yaw(const std::vector<double>& scores,
                                      const std::vector<double>& yaw_deg,
                                      const std::vector<double>& edges) {
  if (scores.size() != yaw_deg.size())
    throw std::invalid_argument("report_by_yaw: scores and yaw lists differ in size");
  if (edges.size() < 2) throw std::invalid_argument("report_by_yaw: need at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      throw std::invalid_argument("report_by_yaw: bin edges must ascend");

  auto stat_of = [](const std::vector<double>& values, double lo, double hi) {
    YawBinStat s;
    s.lo_deg = lo;
    s.hi_deg = hi;
    s.count = int(values.size());
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= values.size();
    for (double v : values) s.stddev += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(s.stddev / values.size());
    return s;
  };

  std::vector<YawBinStat> rows;
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    std::vector<double> in_bin;
    for (std::size_t k = 0; k < scores.size(); ++k) {
      const double a = std::abs(yaw_deg[k]);
      const bool inside = b == 0 ? (a >= edges[0] && a <= edges[1])
                                 : (a > edges[b] && a <= edges[b + 1]);
      if (inside) in_bin.push_back(scores[k]);
    }
    if (in_bin.empty()) continue;
    rows.push_back(stat_of(in_bin, edges[b], edges[b + 1]));
  }
  rows.push_back(stat_of(scores, edges.front(), edges.back()));
  return rows;
}

std::string yaw_report_csv(const std::vector<YawBinStat>& rows) {
  std::ostringstream out;
  out << "bin_lo_deg,bin_hi_deg,count,mean,std\n";
  for (const YawBinStat& r : rows)
    out << format_double(r.lo_deg) << "," << format_double(r.hi_deg) << "," << r.count << ","
        << format_double(r.mean) << "," << format_double(r.stddev) << "\n";
  return out.str();
}

}  // namespace lifted
