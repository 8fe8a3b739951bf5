#include "nti/eval/expert.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nti::eval {

void ScriptedExpertConfig::validate(const data::FilterConfig& limits) const {
  if (!(speed > 0.0)) throw std::invalid_argument("expert: speed must be > 0");
  if (speed_spread < 0.0 || speed_spread >= 1.0) {
    throw std::invalid_argument("expert: speed spread must be in [0, 1)");
  }
  if (!(gain_lateral > 0.0 && gain_theta > 0.0 && compliance_gain > 0.0)) {
    throw std::invalid_argument("expert: gains must be > 0");
  }
  if (!(soft_limit > 0.0 && soft_limit < limits.peak_limit)) {
    throw std::invalid_argument("expert: soft limit must lie in (0, peak limit)");
  }
  if (noise < 0.0) throw std::invalid_argument("expert: noise must be >= 0");
  if (waypoints.size() == 1) throw std::invalid_argument("expert: path needs two waypoints");
}

nlohmann::json ScriptedExpertConfig::to_json() const {
  nlohmann::json path = nlohmann::json::array();
  for (const auto& p : waypoints) path.push_back({p.x, p.z, p.theta});
  return {{"waypoints", path},
          {"speed", speed},
          {"speed_spread", speed_spread},
          {"gain_lateral", gain_lateral},
          {"gain_theta", gain_theta},
          {"soft_limit", soft_limit},
          {"compliance_gain", compliance_gain},
          {"noise", noise},
          {"seed", seed}};
}

ScriptedExpertConfig ScriptedExpertConfig::from_json(const nlohmann::json& j) {
  ScriptedExpertConfig c;
  if (j.contains("waypoints")) {
    for (const auto& p : j.at("waypoints")) c.waypoints.push_back({p.at(0), p.at(1), p.at(2)});
  }
  c.speed = j.value("speed", c.speed);
  c.speed_spread = j.value("speed_spread", c.speed_spread);
  c.gain_lateral = j.value("gain_lateral", c.gain_lateral);
  c.gain_theta = j.value("gain_theta", c.gain_theta);
  c.soft_limit = j.value("soft_limit", c.soft_limit);
  c.compliance_gain = j.value("compliance_gain", c.compliance_gain);
  c.noise = j.value("noise", c.noise);
  c.seed = j.value("seed", c.seed);
  return c;
}

ScriptedExpert::ScriptedExpert(ScriptedExpertConfig config, const sim::SimConfig& sim,
                               std::uint64_t episode_seed)
    : config_(std::move(config)),
      limits_(sim.limits),
      path_(config_.waypoints),
      rng_(config_.seed * 0x9E3779B97F4A7C15ULL + episode_seed) {
  config_.validate();
  if (path_.empty()) {
    path_ = {{sim.workspace.x_min, 0.0, 0.0}, {sim.workspace.x_max, 0.0, 0.0}};
  }
  std::uniform_real_distribution<double> spread(-config_.speed_spread, config_.speed_spread);
  speed_ = config_.speed * (1.0 + spread(rng_));
}

sim::ControlIncrement ScriptedExpert::nominal(const sim::SimState& state,
                                              const sim::ForceSample& forces) const {
  // Closest point on the waypoint polyline.
  double best = INFINITY;
  double tx = 1.0, tz = 0.0, px = state.ee.x, pz = state.ee.z, ptheta = 0.0;
  for (std::size_t i = 0; i + 1 < path_.size(); ++i) {
    const sim::Pose& a = path_[i];
    const sim::Pose& b = path_[i + 1];
    const double dx = b.x - a.x, dz = b.z - a.z;
    const double len2 = dx * dx + dz * dz;
    if (len2 <= 0.0) continue;
    const double s = std::clamp(((state.ee.x - a.x) * dx + (state.ee.z - a.z) * dz) / len2, 0.0, 1.0);
    const double cx = a.x + s * dx, cz = a.z + s * dz;
    const double d = std::hypot(state.ee.x - cx, state.ee.z - cz);
    if (d < best) {
      best = d;
      const double len = std::sqrt(len2);
      tx = dx / len;
      tz = dz / len;
      px = cx;
      pz = cz;
      ptheta = a.theta + s * (b.theta - a.theta);
    }
  }
  double excess = 0.0;
  for (double f : forces.channels()) excess = std::max(excess, std::abs(f) - config_.soft_limit);
  const double along = speed_ - config_.compliance_gain * excess;
  sim::ControlIncrement u;
  u.dx = along * tx + config_.gain_lateral * (px - state.ee.x);
  u.dz = along * tz + config_.gain_lateral * (pz - state.ee.z);
  u.dtheta = config_.gain_theta * (ptheta - state.ee.theta);
  return limits_.clamp(u);
}

sim::ControlIncrement ScriptedExpert::act(const sim::SimState& state,
                                          const sim::ForceSample& forces) {
  sim::ControlIncrement u = nominal(state, forces);
  std::normal_distribution<double> n(0.0, config_.noise);
  u.dx += n(rng_) * limits_.max_dx;
  u.dz += n(rng_) * limits_.max_dz;
  u.dtheta += n(rng_) * limits_.max_dtheta;
  return limits_.clamp(u);
}

}  // namespace nti::eval
