#include "nti/sim/contact.hpp"

namespace nti::sim {

std::vector<Contact> detect_contacts(const PhantomGeometry& geometry, const TubeModel& tube,
                                     std::span<const Vec2> nodes, std::size_t first_node) {
  std::vector<Contact> out;
  for (std::size_t i = first_node; i < nodes.size(); ++i) {
    for (Wall w : {Wall::kUpper, Wall::kLower}) {
      const WallProximity prox = geometry.proximity(w, nodes[i]);
      if (prox.at_open_end) continue;
      const double depth = tube.radius - prox.signed_distance;
      if (depth <= 0.0) continue;
      Contact c;
      c.node = i;
      c.wall = w;
      c.segment = prox.segment;
      c.depth = depth;
      c.normal = prox.normal;
      c.normal_force = tube.contact_stiffness * depth;
      out.push_back(c);
    }
  }
  return out;
}

ForceSample aggregate_sensors(const PhantomGeometry& geometry, std::span<const Contact> contacts) {
  ForceSample f;
  for (const Contact& c : contacts) {
    const auto site = geometry.site_of(c.wall, c.segment);
    if (!site) continue;
    switch (*site) {
      case SensorSite::kNostril: {
        // Force applied by the tube on the wall.
        const Vec2 on_wall = -(c.normal_force * c.normal + c.friction);
        f.fx += on_wall.x();
        f.fz += on_wall.y();
        break;
      }
      case SensorSite::kNasalCavity:
        f.f1 += c.normal_force;
        break;
      case SensorSite::kThroat:
        f.f2 += c.normal_force;
        break;
    }
  }
  return f;
}

}  // namespace nti::sim
