#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lifted/model.hpp"
#include "lifted/types.hpp"

namespace lifted {

// ---- model / dataset serialization ----------------------------------------
// Model files are a single JSON object; datasets are JSON lines, one instance
// per line. Absent codes/camera on load mean "to be initialized". Round trips
// are bit exact for finite values.

void save_model(const std::string& path, const ShapeModel& model);
ShapeModel load_model(const std::string& path);

void save_dataset(const std::string& path, const Dataset& dataset);
// Strips codes and cameras so a fit starts from initialization.
void save_observations(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& model_path, const std::string& instances_path);
std::vector<InstanceRecord> load_instances(const std::string& path, const ShapeModel& model);

// ---- float images ----------------------------------------------------------

struct PfmImage {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 (Pf) or 3 (PF)
  std::vector<float> data;  // row-major top-down, channels interleaved

  float& at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * channels + c]; }
  float at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * channels + c]; }
};

// Little-endian PFM with the conventional bottom-up row order on disk.
void write_pfm(const std::string& path, const PfmImage& image);
PfmImage read_pfm(const std::string& path);

PfmImage pack_pfm(const Channel& gray);
PfmImage pack_pfm(const Channel& c0, const Channel& c1, const Channel& c2);
Channel unpack_channel(const PfmImage& image, int channel);

// Binary P6, 8-bit, values clamped from [0,1].
void write_ppm(const std::string& path, const Channel& r, const Channel& g, const Channel& b);

// ---- landmark files --------------------------------------------------------

struct LandmarkFrame {
  std::string id;
  Eigen::MatrixXd landmarks;  // M x 2 or M x 3
  int left_eye = -1;
  int right_eye = -1;
  bool has_yaw = false;
  double yaw_deg = 0.0;
};

void save_landmark_frames(const std::string& path, const std::vector<LandmarkFrame>& frames);
std::vector<LandmarkFrame> load_landmark_frames(const std::string& path);

// ---- misc ------------------------------------------------------------------

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// FNV-1a content hash, hex encoded; used for manifest input fingerprints.
std::string hash_file(const std::string& path);

// Shortest-round-trip decimal formatting for deterministic text output.
std::string format_double(double v);

}  // namespace lifted
