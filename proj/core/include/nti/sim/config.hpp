#pragma once

#include <filesystem>

#include <json.hpp>

#include "nti/sim/geometry.hpp"
#include "nti/sim/types.hpp"

namespace nti::sim {

struct TubeModel {
  int node_count = 41;
  double segment_length = 0.0075;     // m
  double bending_stiffness = 2.0e-3;  // N*m^2
  double axial_stiffness = 200.0;     // N
  double radius = 0.006;              // m
  double contact_stiffness = 500.0;   // N/m
  double friction = 0.15;
  double tangential_stiffness = 5000.0;  // N/m, stick stiffness of the friction spring

  void validate() const;
};

struct SolverSettings {
  int max_iterations = 200;
  double tolerance = 1e-8;  // N, on the max free-coordinate residual
};

// Randomised approach pose of the tube tip at reset.
struct ResetDistribution {
  double tip_x_min = -0.006, tip_x_max = -0.002;
  double tip_z_min = -0.002, tip_z_max = 0.002;
  double angle_min = -0.03, angle_max = 0.03;
};

struct CameraConfig {
  int width = 128;
  int height = 128;
  double x_min = -0.33, x_max = 0.0;
  double z_min = -0.165, z_max = 0.165;
  double occlusion_x = 0.0;  // everything at x >= occlusion_x is hidden
  int background = 28;
  int tube_intensity = 205;
  double noise_sigma = 6.0;
  double gradient_amplitude = 14.0;
  int distractor_count = 2;
  double distractor_radius_min = 1.5;  // px
  double distractor_radius_max = 4.0;  // px
  int distractor_intensity = 195;
  double distractor_clearance = 3.0;   // px beyond the tube edge

  double meters_per_pixel_x() const { return (x_max - x_min) / width; }
  double meters_per_pixel_z() const { return (z_max - z_min) / height; }
};

struct SimConfig {
  PhantomGeometry geometry;
  TubeModel tube;
  ControlLimits limits;
  Workspace workspace;
  SolverSettings solver;
  ResetDistribution reset;
  CameraConfig camera;
  double dt = 0.05;  // s

  // `base_dir` resolves a relative "geometry" path.
  static SimConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static SimConfig load(const std::filesystem::path& path);
  // Data-directory default (phantom_default.json + built-in constants).
  static SimConfig defaults();
  nlohmann::json to_json() const;
  void validate() const;
};

std::filesystem::path default_data_dir();

}  // namespace nti::sim
