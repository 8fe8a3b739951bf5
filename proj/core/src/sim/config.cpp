#include "nti/sim/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace nti::sim {
namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

bool ControlLimits::admits(const ControlIncrement& u) const {
  return std::abs(u.dx) <= max_dx && std::abs(u.dz) <= max_dz && std::abs(u.dtheta) <= max_dtheta;
}

ControlIncrement ControlLimits::clamp(const ControlIncrement& u) const {
  auto c = [](double v, double lim) { return std::isfinite(v) ? std::clamp(v, -lim, lim) : 0.0; };
  return {c(u.dx, max_dx), c(u.dz, max_dz), c(u.dtheta, max_dtheta)};
}

bool Workspace::clamp(Pose& pose) const {
  const Pose before = pose;
  pose.x = std::clamp(pose.x, x_min, x_max);
  pose.z = std::clamp(pose.z, z_min, z_max);
  pose.theta = std::clamp(pose.theta, theta_min, theta_max);
  return !(pose == before);
}

void TubeModel::validate() const {
  if (node_count < 10) throw std::invalid_argument("tube: node count must be >= 10");
  if (!(segment_length > 0 && bending_stiffness > 0 && axial_stiffness > 0 && radius > 0 &&
        contact_stiffness > 0 && tangential_stiffness > 0)) {
    throw std::invalid_argument("tube: lengths and stiffnesses must be positive");
  }
  if (friction < 0) throw std::invalid_argument("tube: friction must be non-negative");
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("NTI_DATA_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return NTI_DEFAULT_DATA_DIR;
}

SimConfig SimConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  SimConfig c;
  if (!j.contains("geometry")) throw std::invalid_argument("sim config: missing geometry");
  const auto& g = j.at("geometry");
  if (g.is_string()) {
    std::filesystem::path p = g.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    c.geometry = PhantomGeometry::load(p);
  } else {
    c.geometry = PhantomGeometry::from_json(g);
  }
  read(j, "dt", c.dt);
  if (j.contains("tube")) {
    const auto& t = j.at("tube");
    read(t, "node_count", c.tube.node_count);
    read(t, "segment_length", c.tube.segment_length);
    read(t, "bending_stiffness", c.tube.bending_stiffness);
    read(t, "axial_stiffness", c.tube.axial_stiffness);
    read(t, "radius", c.tube.radius);
    read(t, "contact_stiffness", c.tube.contact_stiffness);
    read(t, "friction", c.tube.friction);
    read(t, "tangential_stiffness", c.tube.tangential_stiffness);
  }
  if (j.contains("limits")) {
    const auto& l = j.at("limits");
    read(l, "max_dx", c.limits.max_dx);
    read(l, "max_dz", c.limits.max_dz);
    read(l, "max_dtheta", c.limits.max_dtheta);
  }
  if (j.contains("workspace")) {
    const auto& w = j.at("workspace");
    read(w, "x_min", c.workspace.x_min);
    read(w, "x_max", c.workspace.x_max);
    read(w, "z_min", c.workspace.z_min);
    read(w, "z_max", c.workspace.z_max);
    read(w, "theta_min", c.workspace.theta_min);
    read(w, "theta_max", c.workspace.theta_max);
  }
  if (j.contains("solver")) {
    read(j.at("solver"), "max_iterations", c.solver.max_iterations);
    read(j.at("solver"), "tolerance", c.solver.tolerance);
  }
  if (j.contains("reset")) {
    const auto& r = j.at("reset");
    read(r, "tip_x_min", c.reset.tip_x_min);
    read(r, "tip_x_max", c.reset.tip_x_max);
    read(r, "tip_z_min", c.reset.tip_z_min);
    read(r, "tip_z_max", c.reset.tip_z_max);
    read(r, "angle_min", c.reset.angle_min);
    read(r, "angle_max", c.reset.angle_max);
  }
  if (j.contains("camera")) {
    const auto& k = j.at("camera");
    read(k, "width", c.camera.width);
    read(k, "height", c.camera.height);
    read(k, "x_min", c.camera.x_min);
    read(k, "x_max", c.camera.x_max);
    read(k, "z_min", c.camera.z_min);
    read(k, "z_max", c.camera.z_max);
    read(k, "occlusion_x", c.camera.occlusion_x);
    read(k, "background", c.camera.background);
    read(k, "tube_intensity", c.camera.tube_intensity);
    read(k, "noise_sigma", c.camera.noise_sigma);
    read(k, "gradient_amplitude", c.camera.gradient_amplitude);
    read(k, "distractor_count", c.camera.distractor_count);
    read(k, "distractor_radius_min", c.camera.distractor_radius_min);
    read(k, "distractor_radius_max", c.camera.distractor_radius_max);
    read(k, "distractor_intensity", c.camera.distractor_intensity);
    read(k, "distractor_clearance", c.camera.distractor_clearance);
  }
  c.validate();
  return c;
}

SimConfig SimConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("sim config: cannot read " + path.string());
  return from_json(nlohmann::json::parse(in), path.parent_path());
}

SimConfig SimConfig::defaults() { return load(default_data_dir() / "sim_default.json"); }

nlohmann::json SimConfig::to_json() const {
  nlohmann::json j;
  j["geometry"] = geometry.to_json();
  j["dt"] = dt;
  j["tube"] = {{"node_count", tube.node_count},
               {"segment_length", tube.segment_length},
               {"bending_stiffness", tube.bending_stiffness},
               {"axial_stiffness", tube.axial_stiffness},
               {"radius", tube.radius},
               {"contact_stiffness", tube.contact_stiffness},
               {"friction", tube.friction},
               {"tangential_stiffness", tube.tangential_stiffness}};
  j["limits"] = {{"max_dx", limits.max_dx}, {"max_dz", limits.max_dz},
                 {"max_dtheta", limits.max_dtheta}};
  j["workspace"] = {{"x_min", workspace.x_min},         {"x_max", workspace.x_max},
                    {"z_min", workspace.z_min},         {"z_max", workspace.z_max},
                    {"theta_min", workspace.theta_min}, {"theta_max", workspace.theta_max}};
  j["solver"] = {{"max_iterations", solver.max_iterations}, {"tolerance", solver.tolerance}};
  j["reset"] = {{"tip_x_min", reset.tip_x_min}, {"tip_x_max", reset.tip_x_max},
                {"tip_z_min", reset.tip_z_min}, {"tip_z_max", reset.tip_z_max},
                {"angle_min", reset.angle_min}, {"angle_max", reset.angle_max}};
  j["camera"] = {{"width", camera.width},
                 {"height", camera.height},
                 {"x_min", camera.x_min},
                 {"x_max", camera.x_max},
                 {"z_min", camera.z_min},
                 {"z_max", camera.z_max},
                 {"occlusion_x", camera.occlusion_x},
                 {"background", camera.background},
                 {"tube_intensity", camera.tube_intensity},
                 {"noise_sigma", camera.noise_sigma},
                 {"gradient_amplitude", camera.gradient_amplitude},
                 {"distractor_count", camera.distractor_count},
                 {"distractor_radius_min", camera.distractor_radius_min},
                 {"distractor_radius_max", camera.distractor_radius_max},
                 {"distractor_intensity", camera.distractor_intensity},
                 {"distractor_clearance", camera.distractor_clearance}};
  return j;
}

void SimConfig::validate() const {
  tube.validate();
  geometry.validate(tube.radius);
  if (!(dt > 0)) throw std::invalid_argument("sim config: dt must be positive");
  if (!(limits.max_dx > 0 && limits.max_dz > 0 && limits.max_dtheta > 0)) {
    throw std::invalid_argument("sim config: control limits must be positive");
  }
  if (solver.max_iterations < 1 || !(solver.tolerance > 0)) {
    throw std::invalid_argument("sim config: invalid solver settings");
  }
  if (camera.width < 8 || camera.height < 8 || !(camera.x_max > camera.x_min) ||
      !(camera.z_max > camera.z_min)) {
    throw std::invalid_argument("sim config: invalid camera");
  }
}

}  // namespace nti::sim
