#include "lifted/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lifted {

using json = nlohmann::json;

namespace {

json points_to_json(const Points3& pts) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    rows.push_back({pts(i, 0), pts(i, 1), pts(i, 2)});
  return rows;
}

Points3 points_from_json(const json& rows, int expected_rows, const std::string& what) {
  if (!rows.is_array())
    throw std::runtime_error("model file: " + what + " is not an array");
  Points3 pts(rows.size(), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const json& r = rows[i];
    if (!r.is_array() || r.size() != 3)
      throw std::runtime_error("model file: " + what + " row " + std::to_string(i) +
                               " is not a 3-vector");
    for (int c = 0; c < 3; ++c) {
      if (!r[c].is_number())
        throw std::runtime_error("model file: " + what + " row " + std::to_string(i) +
                                 " holds a non-numeric entry");
      pts(i, c) = r[c].get<double>();
    }
  }
  if (expected_rows >= 0 && int(pts.rows()) != expected_rows)
    throw std::runtime_error("model file: " + what + " has " + std::to_string(pts.rows()) +
                             " rows, expected " + std::to_string(expected_rows));
  return pts;
}

}  // namespace

void save_model(const std::string& path, const ShapeModel& model) {
  json j;
  j["n"] = model.grid.n;
  j["I"] = model.identity_dim();
  j["E"] = model.expression_dim();
  j["mean"] = points_to_json(model.mean);
  json bi = json::array(), be = json::array();
  for (const Points3& b : model.identity_basis) bi.push_back(points_to_json(b));
  for (const Points3& b : model.expression_basis) be.push_back(points_to_json(b));
  j["identity_basis"] = bi;
  j["expression_basis"] = be;
  write_text_file(path, j.dump() + "\n");
}

ShapeModel load_model(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error("model file '" + path + "': " + e.what());
  }
  ShapeModel model;
  for (const char* key : {"n", "I", "E", "mean", "identity_basis", "expression_basis"})
    if (!j.contains(key))
      throw std::runtime_error("model file '" + path + "': missing field '" + key + "'");
  model.grid.n = j["n"].get<int>();
  const int dim_i = j["I"].get<int>();
  const int dim_e = j["E"].get<int>();
  if (model.grid.n < 1)
    throw std::runtime_error("model file '" + path + "': n must be >= 1");
  if (dim_i < 0 || dim_e < 0)
    throw std::runtime_error("model file '" + path + "': negative basis count");
  const int n_vertices = model.grid.vertex_count();
  model.mean = points_from_json(j["mean"], n_vertices, "mean");
  for (int s = 0; s < dim_i; ++s)
    model.identity_basis.push_back(
        points_from_json(j["identity_basis"].at(s), n_vertices, "identity_basis[" + std::to_string(s) + "]"));
  for (int s = 0; s < dim_e; ++s)
    model.expression_basis.push_back(
        points_from_json(j["expression_basis"].at(s), n_vertices, "expression_basis[" + std::to_string(s) + "]"));
  validate(model);
  return model;
}

namespace {

json instance_to_json(const InstanceRecord& inst, bool with_state) {
  json j;
  j["id"] = inst.id;
  if (inst.labels) {
    j["labels"] = {{"identity_id", inst.labels->identity_id},
                   {"expression_id", inst.labels->expression_id},
                   {"pose_id", inst.labels->pose_id}};
  }
  json points = json::array();
  for (Eigen::Index i = 0; i < inst.observations.rows(); ++i) {
    if (!inst.visibility[i]) continue;
    points.push_back({{"i", int(i)}, {"x", inst.observations(i, 0)}, {"y", inst.observations(i, 1)}});
  }
  j["points"] = points;
  if (with_state) {
    j["codes"] = {{"identity", std::vector<double>(inst.code_identity.begin(), inst.code_identity.end())},
                  {"expression", std::vector<double>(inst.code_expression.begin(), inst.code_expression.end())}};
    j["camera"] = {{"q", {inst.camera.q[0], inst.camera.q[1], inst.camera.q[2], inst.camera.q[3]}},
                   {"t", {inst.camera.t[0], inst.camera.t[1]}},
                   {"sigma", inst.camera.sigma}};
  }
  return j;
}

InstanceRecord instance_from_json(const json& j, const ShapeModel& model, int line_no) {
  const std::string where = "dataset line " + std::to_string(line_no);
  InstanceRecord inst;
  if (!j.contains("id") || !j["id"].is_string())
    throw std::runtime_error(where + ": missing string field 'id'");
  inst.id = j["id"].get<std::string>();
  const int n_vertices = model.vertex_count();
  inst.observations = Points2::Zero(n_vertices, 2);
  inst.visibility.assign(n_vertices, 0);
  if (!j.contains("points") || !j["points"].is_array())
    throw std::runtime_error(where + ": missing array field 'points'");
  for (const json& p : j["points"]) {
    const int i = p.at("i").get<int>();
    if (i < 0 || i >= n_vertices)
      throw std::runtime_error(where + ": point index " + std::to_string(i) +
                               " outside [0, " + std::to_string(n_vertices) + ")");
    inst.observations(i, 0) = p.at("x").get<double>();
    inst.observations(i, 1) = p.at("y").get<double>();
    inst.visibility[i] = 1;
  }
  if (j.contains("labels")) {
    InstanceLabels labels;
    labels.identity_id = j["labels"].value("identity_id", "");
    labels.expression_id = j["labels"].value("expression_id", "");
    labels.pose_id = j["labels"].value("pose_id", "");
    inst.labels = labels;
  }
  if (j.contains("codes")) {
    const auto si = j["codes"].at("identity").get<std::vector<double>>();
    const auto se = j["codes"].at("expression").get<std::vector<double>>();
    inst.code_identity = Eigen::Map<const VecX>(si.data(), si.size());
    inst.code_expression = Eigen::Map<const VecX>(se.data(), se.size());
  } else {
    inst.code_identity = VecX::Zero(model.identity_dim());
    inst.code_expression = VecX::Zero(model.expression_dim());
  }
  if (j.contains("camera")) {
    const json& c = j["camera"];
    for (int k = 0; k < 4; ++k) inst.camera.q[k] = c.at("q").at(k).get<double>();
    for (int k = 0; k < 2; ++k) inst.camera.t[k] = c.at("t").at(k).get<double>();
    inst.camera.sigma = c.at("sigma").get<double>();
  }
  return inst;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& dataset) {
  std::ostringstream out;
  for (const InstanceRecord& inst : dataset.instances)
    out << instance_to_json(inst, true).dump() << "\n";
  write_text_file(path, out.str());
}

void save_observations(const std::string& path, const Dataset& dataset) {
  std::ostringstream out;
  for (const InstanceRecord& inst : dataset.instances)
    out << instance_to_json(inst, false).dump() << "\n";
  write_text_file(path, out.str());
}

std::vector<InstanceRecord> load_instances(const std::string& path, const ShapeModel& model) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");
  std::vector<InstanceRecord> instances;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    instances.push_back(instance_from_json(j, model, line_no));
  }
  return instances;
}

Dataset load_dataset(const std::string& model_path, const std::string& instances_path) {
  Dataset dataset;
  dataset.model = load_model(model_path);
  dataset.instances = load_instances(instances_path, dataset.model);
  validate(dataset);
  return dataset;
}

// ---- PFM -------------------------------------------------------------------

void write_pfm(const std::string& path, const PfmImage& image) {
  if (image.channels != 1 && image.channels != 3)
    throw std::invalid_argument("write_pfm: channels must be 1 or 3");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << (image.channels == 3 ? "PF" : "Pf") << "\n"
      << image.width << " " << image.height << "\n"
      << "-1.0\n";
  // PFM stores rows bottom to top.
  const std::size_t row_floats = std::size_t(image.width) * image.channels;
  for (int y = image.height - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char*>(image.data.data() + std::size_t(y) * row_floats),
              std::streamsize(row_floats * sizeof(float)));
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

PfmImage read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open PFM file '" + path + "'");
  std::string magic;
  in >> magic;
  PfmImage image;
  if (magic == "PF") image.channels = 3;
  else if (magic == "Pf") image.channels = 1;
  else throw std::runtime_error("PFM file '" + path + "': bad magic '" + magic + "'");
  double scale = 0.0;
  in >> image.width >> image.height >> scale;
  if (!in || image.width <= 0 || image.height <= 0)
    throw std::runtime_error("PFM file '" + path + "': bad header");
  in.get();  // single whitespace after the scale line
  if (scale > 0)
    throw std::runtime_error("PFM file '" + path + "': big-endian data unsupported");
  const std::size_t row_floats = std::size_t(image.width) * image.channels;
  image.data.resize(row_floats * image.height);
  for (int y = image.height - 1; y >= 0; --y)
    in.read(reinterpret_cast<char*>(image.data.data() + std::size_t(y) * row_floats),
            std::streamsize(row_floats * sizeof(float)));
  if (!in) throw std::runtime_error("PFM file '" + path + "': truncated pixel data");
  const float s = float(-scale);
  if (s != 1.0f)
    for (float& v : image.data) v *= s;
  return image;
}

PfmImage pack_pfm(const Channel& gray) {
  PfmImage image;
  image.width = int(gray.cols());
  image.height = int(gray.rows());
  image.channels = 1;
  image.data.resize(std::size_t(image.width) * image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      image.at(x, y, 0) = float(gray(y, x));
  return image;
}

PfmImage pack_pfm(const Channel& c0, const Channel& c1, const Channel& c2) {
  PfmImage image;
  image.width = int(c0.cols());
  image.height = int(c0.rows());
  image.channels = 3;
  image.data.resize(std::size_t(image.width) * image.height * 3);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      image.at(x, y, 0) = float(c0(y, x));
      image.at(x, y, 1) = float(c1(y, x));
      image.at(x, y, 2) = float(c2(y, x));
    }
  return image;
}

Channel unpack_channel(const PfmImage& image, int channel) {
  if (channel < 0 || channel >= image.channels)
    throw std::invalid_argument("unpack_channel: channel out of range");
  Channel out(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      out(y, x) = image.at(x, y, channel);
  return out;
}

void write_ppm(const std::string& path, const Channel& r, const Channel& g, const Channel& b) {
  const int h = int(r.rows()), w = int(r.cols());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(std::size_t(w) * 3);
  auto to_byte = [](double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[3 * x + 0] = to_byte(r(y, x));
      row[3 * x + 1] = to_byte(g(y, x));
      row[3 * x + 2] = to_byte(b(y, x));
    }
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
  }
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

// ---- landmark files --------------------------------------------------------

void save_landmark_frames(const std::string& path, const std::vector<LandmarkFrame>& frames) {
  std::ostringstream out;
  for (const LandmarkFrame& f : frames) {
    json j;
    j["id"] = f.id;
    json rows = json::array();
    for (Eigen::Index i = 0; i < f.landmarks.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index c = 0; c < f.landmarks.cols(); ++c) row.push_back(f.landmarks(i, c));
      rows.push_back(row);
    }
    j["landmarks"] = rows;
    j["left_eye"] = f.left_eye;
    j["right_eye"] = f.right_eye;
    if (f.has_yaw) j["yaw"] = f.yaw_deg;
    out << j.dump() << "\n";
  }
  write_text_file(path, out.str());
}

std::vector<LandmarkFrame> load_landmark_frames(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open landmark file '" + path + "'");
  std::vector<LandmarkFrame> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("landmark line " + std::to_string(line_no) + ": " + e.what());
    }
    LandmarkFrame f;
    f.id = j.at("id").get<std::string>();
    const json& rows = j.at("landmarks");
    if (rows.empty()) throw std::runtime_error("landmark line " + std::to_string(line_no) + ": empty landmark list");
    const int cols = int(rows[0].size());
    if (cols != 2 && cols != 3)
      throw std::runtime_error("landmark line " + std::to_string(line_no) + ": landmarks must be 2D or 3D");
    f.landmarks.resize(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (int(rows[i].size()) != cols)
        throw std::runtime_error("landmark line " + std::to_string(line_no) + ": ragged landmark rows");
      for (int c = 0; c < cols; ++c) f.landmarks(i, c) = rows[i][c].get<double>();
    }
    f.left_eye = j.value("left_eye", -1);
    f.right_eye = j.value("right_eye", -1);
    if (j.contains("yaw")) {
      f.has_yaw = true;
      f.yaw_deg = j["yaw"].get<double>();
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

// ---- misc ------------------------------------------------------------------

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

std::string hash_file(const std::string& path) {
  const std::string content = read_text_file(path);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : content) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace lifted
