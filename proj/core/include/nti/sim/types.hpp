#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nti/sim/geometry.hpp"

namespace nti::sim {

struct Pose {
  double x = 0.0;
  double z = 0.0;
  double theta = 0.0;  // rad, rotation about y; 0 points along +x

  bool operator==(const Pose&) const = default;
};

struct ControlIncrement {
  double dx = 0.0;
  double dz = 0.0;
  double dtheta = 0.0;

  bool operator==(const ControlIncrement&) const = default;
};

struct ControlLimits {
  double max_dx = 0.002;
  double max_dz = 0.001;
  double max_dtheta = 0.01;

  bool admits(const ControlIncrement& u) const;
  ControlIncrement clamp(const ControlIncrement& u) const;
};

struct Workspace {
  double x_min = -0.40, x_max = -0.03;
  double z_min = -0.05, z_max = 0.05;
  double theta_min = -0.5, theta_max = 0.5;

  // Returns true if any coordinate had to be clamped.
  bool clamp(Pose& pose) const;
};

struct Contact {
  std::size_t node = 0;
  Wall wall = Wall::kUpper;
  std::size_t segment = 0;
  double depth = 0.0;             // penetration, >= 0
  Vec2 normal = Vec2::Zero();     // into the channel
  double normal_force = 0.0;      // k_c * depth
  Vec2 friction = Vec2::Zero();   // tangential force on the tube
};

struct SimState {
  std::vector<Vec2> nodes;
  Pose ee;
  std::size_t grip_index = 0;
  double time = 0.0;
  std::uint64_t step_index = 0;
  std::vector<Contact> contacts;
  double residual = 0.0;          // max |dE/dq| over free coordinates after relaxation
  int iterations = 0;
  bool unstable = false;
  bool pose_clamped = false;
};

// Sensor readings at one timestep. fy is identically zero in the planar model.
struct ForceSample {
  double fx = 0.0, fy = 0.0, fz = 0.0, f1 = 0.0, f2 = 0.0;
  double fx_ee = 0.0, fy_ee = 0.0, fz_ee = 0.0;
  double t = 0.0;

  std::array<double, 5> channels() const { return {fx, fy, fz, f1, f2}; }
};

}  // namespace nti::sim
