#pragma once

#include <cstdint>
#include <string>

#include "nti/data/metrics.hpp"
#include "nti/imaging/image.hpp"
#include "nti/sim/config.hpp"
#include "nti/sim/types.hpp"

namespace nti::sim {

struct StepResult {
  SimState state;
  ForceSample forces;
};

enum class OutcomeKind { kInProgress, kSuccess, kFailure };
enum class FailureReason { kNone, kTimeout, kForce, kImpulse, kInstability };

struct Outcome {
  OutcomeKind kind = OutcomeKind::kInProgress;
  FailureReason reason = FailureReason::kNone;

  static Outcome success() { return {OutcomeKind::kSuccess, FailureReason::kNone}; }
  static Outcome failure(FailureReason r) { return {OutcomeKind::kFailure, r}; }
  bool terminal() const { return kind != OutcomeKind::kInProgress; }
  bool operator==(const Outcome&) const = default;
};

std::string to_string(const Outcome& outcome);
Outcome outcome_from_string(const std::string& text);

// Planar quasi-static tube insertion. Immutable after construction; states are values.
class Simulator {
 public:
  explicit Simulator(SimConfig config);

  const SimConfig& config() const { return config_; }

  // Straight tube outside the nostril with a seeded tip pose. Deterministic in `seed`.
  SimState reset(std::uint64_t seed) const;
  ForceSample measure(const SimState& state) const;

  // Throws std::invalid_argument unless dt > 0 and `u` is within the control limits.
  StepResult step(const SimState& state, const ControlIncrement& u) const;
  StepResult step(const SimState& state, const ControlIncrement& u, double dt) const;

  double tip_progress(const SimState& state) const;
  bool tip_in_target(const SimState& state) const;

  Image render_camera1(const SimState& state, std::uint64_t noise_seed) const;
  // Whole-scene debug view (walls, tube, sensor windows); never part of an observation.
  Image render_side_view(const SimState& state, int width = 192, int height = 160) const;

  // Elastic + contact energy and its residual at the given positions, with the grip nodes
  // fixed; exposed for equilibrium checks.
  double free_residual(const SimState& state) const;

 private:
  SimConfig config_;
};

// Success iff the tip is in the target and time/peak/impulse limits all hold; a violated
// limit is reported as the failure reason, checked in that order.
Outcome check_outcome(bool tip_in_target, double elapsed, const data::EpisodeMetrics& metrics,
                      const data::FilterConfig& limits);
Outcome check_outcome(const Simulator& sim, const SimState& state,
                      const data::EpisodeMetrics& metrics, const data::FilterConfig& limits);

}  // namespace nti::sim
