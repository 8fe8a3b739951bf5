#include "nti/sim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace nti::sim {
namespace {

std::vector<Vec2> points_from_json(const nlohmann::json& arr, const char* what) {
  std::vector<Vec2> out;
  for (const auto& p : arr) {
    if (!p.is_array() || p.size() != 2) {
      throw std::invalid_argument(std::string("geometry: malformed point in ") + what);
    }
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

nlohmann::json points_to_json(const std::vector<Vec2>& pts) {
  auto arr = nlohmann::json::array();
  for (const auto& p : pts) arr.push_back({p.x(), p.y()});
  return arr;
}

Wall wall_from_string(const std::string& s) {
  if (s == "upper") return Wall::kUpper;
  if (s == "lower") return Wall::kLower;
  throw std::invalid_argument("geometry: unknown wall '" + s + "'");
}

constexpr const char* kSiteKeys[3] = {"nostril", "nasal_cavity", "throat"};

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = cross(p2 - p1, q1 - p1);
  const double d2 = cross(p2 - p1, q2 - p1);
  const double d3 = cross(q2 - q1, p1 - q1);
  const double d4 = cross(q2 - q1, p2 - q1);
  return d1 * d2 < 0.0 && d3 * d4 < 0.0;
}

}  // namespace

PhantomGeometry PhantomGeometry::from_json(const nlohmann::json& j) {
  PhantomGeometry g;
  g.centerline = points_from_json(j.at("centerline"), "centerline");
  g.upper_wall = points_from_json(j.at("upper_wall"), "upper_wall");
  g.lower_wall = points_from_json(j.at("lower_wall"), "lower_wall");
  g.inlet_x = j.value("inlet_x", 0.0);
  g.corner_smoothing = j.value("corner_smoothing", 1e-3);
  const auto& windows = j.at("sensor_windows");
  for (int site = 0; site < 3; ++site) {
    for (const auto& w : windows.at(kSiteKeys[site])) {
      const auto& segs = w.at("segments");
      g.windows[site].push_back(SensorWindow{wall_from_string(w.at("wall").get<std::string>()),
                                             segs.at(0).get<std::size_t>(),
                                             segs.at(1).get<std::size_t>()});
    }
  }
  const auto& t = j.at("target");
  g.target_a = Vec2(t.at("a").at(0).get<double>(), t.at("a").at(1).get<double>());
  g.target_b = Vec2(t.at("b").at(0).get<double>(), t.at("b").at(1).get<double>());
  return g;
}

PhantomGeometry PhantomGeometry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("geometry: cannot read " + path.string());
  return from_json(nlohmann::json::parse(in));
}

nlohmann::json PhantomGeometry::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["units"] = "m";
  j["inlet_x"] = inlet_x;
  j["corner_smoothing"] = corner_smoothing;
  j["centerline"] = points_to_json(centerline);
  j["upper_wall"] = points_to_json(upper_wall);
  j["lower_wall"] = points_to_json(lower_wall);
  for (int site = 0; site < 3; ++site) {
    auto arr = nlohmann::json::array();
    for (const auto& w : windows[site]) {
      arr.push_back({{"wall", w.wall == Wall::kUpper ? "upper" : "lower"},
                     {"segments", {w.first_segment, w.last_segment}}});
    }
    j["sensor_windows"][kSiteKeys[site]] = arr;
  }
  j["target"] = {{"a", {target_a.x(), target_a.y()}}, {"b", {target_b.x(), target_b.y()}}};
  return j;
}

Vec2 PhantomGeometry::segment_normal(Wall w, std::size_t segment) const {
  const auto& pts = wall(w);
  const Vec2 d = (pts[segment + 1] - pts[segment]).normalized();
  const Vec2 left(-d.y(), d.x());
  // Walls run along the channel direction; the upper wall lies to the left of it.
  return w == Wall::kUpper ? Vec2(-left) : left;
}

WallProximity PhantomGeometry::proximity(Wall w, const Vec2& p) const {
  const auto& pts = wall(w);
  WallProximity best;
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_t = 0.0;
  for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
    const Vec2 a = pts[s];
    const Vec2 ab = pts[s + 1] - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 q = a + t * ab;
    const double d2 = (p - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best.closest = q;
      best.segment = s;
      best_t = t;
    }
  }
  const std::size_t s = best.segment;
  const Vec2 n_seg = segment_normal(w, s);
  const bool at_start_vertex = best_t <= 0.0;
  const bool at_end_vertex = best_t >= 1.0;
  best.at_open_end = (at_start_vertex && s == 0) || (at_end_vertex && s + 2 == pts.size());
  const double d = std::sqrt(best_d2);
  if (!at_start_vertex && !at_end_vertex) {
    best.normal = n_seg;
    best.signed_distance = (p - best.closest).dot(n_seg);
    // Near a concave corner the distance is the min of two line distances; blend it so the
    // contact energy stays C1.
    auto blend = [&](std::size_t other, const Vec2& corner) {
      const Vec2 n_other = segment_normal(w, other);
      const double h = corner_smoothing * std::acos(std::clamp(n_seg.dot(n_other), -1.0, 1.0));
      if (h <= 0.0) return;
      const double a = best.signed_distance;
      const double b = (p - corner).dot(n_other);
      const double gap = std::abs(a - b);
      if (gap >= h) return;
      const double wa = std::clamp(0.5 + (b - a) / (2.0 * h), 0.0, 1.0);
      best.signed_distance = std::min(a, b) - (h - gap) * (h - gap) / (4.0 * h);
      best.normal = wa * n_seg + (1.0 - wa) * n_other;
      best.curvature = 1.0 / (2.0 * h);
      best.curvature_axis = n_seg - n_other;
    };
    if (s + 2 < pts.size() && (pts[s + 2] - pts[s + 1]).dot(n_seg) > 0.0) {
      blend(s + 1, pts[s + 1]);
    }
    if (best.curvature == 0.0 && s > 0 && (pts[s - 1] - pts[s]).dot(n_seg) > 0.0) {
      blend(s - 1, pts[s]);
    }
    return best;
  }
  // Vertex region: pseudo-normal of the adjacent segments decides the side.
  Vec2 pseudo = n_seg;
  if (at_start_vertex && s > 0) pseudo += segment_normal(w, s - 1);
  if (at_end_vertex && s + 2 < pts.size()) pseudo += segment_normal(w, s + 1);
  const double side = (p - best.closest).dot(pseudo) >= 0.0 ? 1.0 : -1.0;
  if (d > 1e-12) {
    best.normal = side * (p - best.closest) / d;
  } else {
    best.normal = pseudo.normalized();
  }
  best.signed_distance = side * d;
  return best;
}

std::optional<SensorSite> PhantomGeometry::site_of(Wall w, std::size_t segment) const {
  for (int site = 0; site < 3; ++site) {
    for (const auto& win : windows[site]) {
      if (win.contains(w, segment)) return static_cast<SensorSite>(site);
    }
  }
  return std::nullopt;
}

namespace {

// Arc length from the first centerline point to where it crosses x = inlet_x.
double inlet_arc(const std::vector<Vec2>& cl, double inlet_x) {
  double arc = 0.0;
  for (std::size_t s = 0; s + 1 < cl.size(); ++s) {
    const Vec2 a = cl[s];
    const Vec2 b = cl[s + 1];
    const double len = (b - a).norm();
    if (b.x() >= inlet_x) {
      const double t = b.x() > a.x() ? std::clamp((inlet_x - a.x()) / (b.x() - a.x()), 0.0, 1.0) : 0.0;
      return arc + t * len;
    }
    arc += len;
  }
  return arc;
}

}  // namespace

double PhantomGeometry::centerline_arc(const Vec2& p) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_arc = 0.0;
  double arc = 0.0;
  for (std::size_t s = 0; s + 1 < centerline.size(); ++s) {
    const Vec2 a = centerline[s];
    const Vec2 ab = centerline[s + 1] - a;
    const double len = ab.norm();
    double t = len > 0.0 ? (p - a).dot(ab) / (len * len) : 0.0;
    // Extrapolate before the first and past the last segment.
    if (s > 0) t = std::max(t, 0.0);
    if (s + 2 < centerline.size()) t = std::min(t, 1.0);
    const double d2 = (p - (a + t * ab)).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best_arc = arc + t * len;
    }
    arc += len;
  }
  return best_arc - inlet_arc(centerline, inlet_x);
}

double PhantomGeometry::centerline_length() const {
  double arc = 0.0;
  for (std::size_t s = 0; s + 1 < centerline.size(); ++s) {
    arc += (centerline[s + 1] - centerline[s]).norm();
  }
  return arc - inlet_arc(centerline, inlet_x);
}

void PhantomGeometry::validate(double tube_radius) const {
  if (upper_wall.size() < 2 || lower_wall.size() < 2 || centerline.size() < 2) {
    throw std::invalid_argument("geometry: walls and centerline need at least two points");
  }
  for (Wall w : {Wall::kUpper, Wall::kLower}) {
    const auto& pts = wall(w);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      if ((pts[i + 1] - pts[i]).norm() <= 0.0) {
        throw std::invalid_argument("geometry: zero-length wall segment");
      }
      for (std::size_t j = i + 2; j + 1 < pts.size(); ++j) {
        if (segments_intersect(pts[i], pts[i + 1], pts[j], pts[j + 1])) {
          throw std::invalid_argument("geometry: wall polyline self-intersects");
        }
      }
    }
  }
  for (int site = 0; site < 3; ++site) {
    if (windows[site].empty()) {
      throw std::invalid_argument(std::string("geometry: missing sensor window ") + kSiteKeys[site]);
    }
    for (const auto& win : windows[site]) {
      if (win.first_segment > win.last_segment || win.last_segment >= segment_count(win.wall)) {
        throw std::invalid_argument(std::string("geometry: sensor window off the wall: ") +
                                    kSiteKeys[site]);
      }
    }
  }
  // Channel width at every centerline sample inside the phantom.
  for (const Vec2& c : centerline) {
    if (c.x() < inlet_x) continue;
    const double du = proximity(Wall::kUpper, c).signed_distance;
    const double dl = proximity(Wall::kLower, c).signed_distance;
    if (du + dl <= 2.0 * tube_radius) {
      throw std::invalid_argument("geometry: channel narrower than the tube diameter");
    }
  }
}

}  // namespace nti::sim
