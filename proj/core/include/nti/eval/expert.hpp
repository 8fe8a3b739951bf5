#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <json.hpp>

#include "nti/data/metrics.hpp"
#include "nti/sim/config.hpp"
#include "nti/sim/types.hpp"

namespace nti::eval {

struct ScriptedExpertConfig {
  // End-effector path. Empty means the straight line z = 0, theta = 0 across the workspace.
  std::vector<sim::Pose> waypoints;
  double speed = 0.0012;           // m per step along the path
  double speed_spread = 0.15;      // per-episode relative speed variation, uniform +-
  double gain_lateral = 0.5;       // fraction of the cross-track error removed per step
  double gain_theta = 0.5;         // fraction of the heading error removed per step
  double soft_limit = 2.5;         // N
  double compliance_gain = 0.001;  // m per step of retreat per N above the soft limit
  double noise = 0.1;              // action noise sd as a fraction of each per-step limit
  std::uint64_t seed = 0;

  // Throws std::invalid_argument; the soft limit must lie below the safety peak limit.
  void validate(const data::FilterConfig& limits = {}) const;
  nlohmann::json to_json() const;
  static ScriptedExpertConfig from_json(const nlohmann::json& j);
};

class ScriptedExpert {
 public:
  ScriptedExpert(ScriptedExpertConfig config, const sim::SimConfig& sim, std::uint64_t episode_seed);

  const ScriptedExpertConfig& config() const { return config_; }
  double speed() const { return speed_; }

  // Deterministic part: path following with force compliance, clamped to the limits.
  sim::ControlIncrement nominal(const sim::SimState& state, const sim::ForceSample& forces) const;
  // Nominal action plus seeded noise, clamped to the limits.
  sim::ControlIncrement act(const sim::SimState& state, const sim::ForceSample& forces);

 private:
  ScriptedExpertConfig config_;
  sim::ControlLimits limits_;
  std::vector<sim::Pose> path_;
  double speed_;
  std::mt19937_64 rng_;
};

}  // namespace nti::eval
