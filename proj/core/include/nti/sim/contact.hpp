#pragma once

#include <span>
#include <vector>

#include "nti/sim/config.hpp"
#include "nti/sim/types.hpp"

namespace nti::sim {

// Penalty contacts of the tube nodes against both walls; nodes before `first_node` are skipped.
std::vector<Contact> detect_contacts(const PhantomGeometry& geometry, const TubeModel& tube,
                                     std::span<const Vec2> nodes, std::size_t first_node = 0);

// Sums contact forces inside each sensor window. The nostril sensor reports the force the
// tube applies to the wall (x and z components); the 1-D sensors report normal magnitudes.
ForceSample aggregate_sensors(const PhantomGeometry& geometry, std::span<const Contact> contacts);

}  // namespace nti::sim
