#pragma once

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace nti::sim {

using Vec2 = Eigen::Vector2d;  // (x, z) in meters

enum class Wall { kUpper = 0, kLower = 1 };
enum class SensorSite { kNostril = 0, kNasalCavity = 1, kThroat = 2 };

struct SensorWindow {
  Wall wall = Wall::kUpper;
  std::size_t first_segment = 0;
  std::size_t last_segment = 0;  // inclusive

  bool contains(Wall w, std::size_t segment) const {
    return w == wall && segment >= first_segment && segment <= last_segment;
  }
};

// Closest-point query result against one wall polyline.
struct WallProximity {
  double signed_distance = 0.0;  // positive inside the channel
  Vec2 normal = Vec2::Zero();    // gradient of the signed distance (unit, into the channel)
  Vec2 closest = Vec2::Zero();
  std::size_t segment = 0;
  bool at_open_end = false;      // closest point is a free end of the wall
  // Hessian of the signed distance is -curvature * axis * axis^T (nonzero only where a
  // concave corner is smoothed).
  double curvature = 0.0;
  Vec2 curvature_axis = Vec2::Zero();
};

struct PhantomGeometry {
  std::vector<Vec2> centerline;
  std::vector<Vec2> upper_wall;
  std::vector<Vec2> lower_wall;
  std::array<std::vector<SensorWindow>, 3> windows;  // indexed by SensorSite
  Vec2 target_a = Vec2::Zero();
  Vec2 target_b = Vec2::Zero();
  double inlet_x = 0.0;
  double corner_smoothing = 1e-3;  // m of blend per radian of turn at concave wall corners

  static PhantomGeometry from_json(const nlohmann::json& j);
  static PhantomGeometry load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const std::vector<Vec2>& wall(Wall w) const { return w == Wall::kUpper ? upper_wall : lower_wall; }
  std::size_t segment_count(Wall w) const { return wall(w).size() - 1; }

  // Inward unit normal of one wall segment.
  Vec2 segment_normal(Wall w, std::size_t segment) const;
  WallProximity proximity(Wall w, const Vec2& p) const;

  // Sensor site whose window holds the wall segment, if any.
  std::optional<SensorSite> site_of(Wall w, std::size_t segment) const;

  // Arc length of the projection of `p` onto the centerline, measured from x = inlet_x.
  double centerline_arc(const Vec2& p) const;
  double centerline_length() const;

  // Throws std::invalid_argument describing the first violated invariant.
  void validate(double tube_radius) const;
};

}  // namespace nti::sim
