#pragma once

#include <cstdint>
#include <functional>

#include "nti/data/dataset.hpp"
#include "nti/data/episode.hpp"
#include "nti/eval/expert.hpp"
#include "nti/policy/policy.hpp"
#include "nti/sim/simulator.hpp"

namespace nti::eval {

struct RolloutConfig {
  int max_steps = 400;
  data::FilterConfig limits;
  bool record_frames = true;
};

// Decides the increment from the current state, the latest sensor sample and the camera-1
// frame rendered for this step.
using Controller = std::function<sim::ControlIncrement(
    const sim::SimState& state, const sim::ForceSample& forces, const Image& frame, int step)>;

// Noise seed of the camera-1 frame rendered at `step` of the episode with `seed`.
std::uint64_t frame_seed(std::uint64_t seed, int step);

// Step-wise episode recording from reset(seed): each apply() logs the current row, its action
// and frame, then advances the simulator. Shared by batch rollouts, teleoperation and replay.
class EpisodeRecorder {
 public:
  EpisodeRecorder(const sim::Simulator& sim, std::uint64_t seed, data::OperatorKind kind,
                  RolloutConfig config);

  const sim::SimState& state() const { return state_; }
  const sim::ForceSample& forces() const { return forces_; }
  // Camera-1 frame of the current step.
  const Image& frame() const { return frame_; }
  int step() const { return static_cast<int>(episode_.steps.size()); }
  const sim::Outcome& outcome() const { return outcome_; }
  // Terminal outcome reached or max_steps actions applied.
  bool finished() const;

  // Throws std::logic_error once finished; `u` must be within the control limits.
  const sim::Outcome& apply(const sim::ControlIncrement& u);
  // Appends the terminal row and attaches verdicts. A non-terminal episode is closed with
  // `open_outcome`.
  data::Episode close(sim::Outcome open_outcome = sim::Outcome::failure(sim::FailureReason::kTimeout));

 private:
  const sim::Simulator& sim_;
  RolloutConfig config_;
  data::Episode episode_;
  sim::SimState state_;
  sim::ForceSample forces_;
  Image frame_;
  sim::Outcome outcome_;
  bool closed_ = false;
};

// Closed loop from reset(seed) until Success/Failure or max_steps; an episode still in
// progress at the end is closed as Failure(timeout). Verdicts are attached.
data::Episode rollout(const sim::Simulator& sim, const Controller& controller, std::uint64_t seed,
                      const RolloutConfig& config, data::OperatorKind kind);

// Re-applies the recorded actions from reset(meta.seed) with the same recording rules; the
// result is byte-identical to the original when the recording was deterministic. Metadata
// extras are carried over.
data::Episode replay(const sim::Simulator& sim, const data::Episode& recorded,
                     const data::FilterConfig& limits = {});

data::Episode rollout_expert(const sim::Simulator& sim, const ScriptedExpertConfig& expert,
                             std::uint64_t seed, const RolloutConfig& config);

// Observation -> forward -> temporal ensemble, with a fresh decoder state and buffer.
class PolicyController {
 public:
  PolicyController(const policy::Model& model, const data::DatasetStats& stats,
                   vision::PipelineConfig vision, sim::ControlLimits limits);

  sim::ControlIncrement operator()(const sim::SimState& state, const sim::ForceSample& forces,
                                   const Image& frame, int step);
  policy::Observation observe(const sim::SimState& state, const sim::ForceSample& forces,
                              const Image& frame) const;

  const std::optional<policy::DecoderState>& decoder_state() const { return decoder_; }
  const policy::EnsembleBuffer& buffer() const { return buffer_; }

 private:
  const policy::Model& model_;
  data::DatasetStats stats_;
  vision::PipelineConfig vision_;
  sim::ControlLimits limits_;
  std::optional<policy::DecoderState> decoder_;
  policy::EnsembleBuffer buffer_;
};

data::Episode rollout_policy(const sim::Simulator& sim, const policy::PolicyBundle& bundle,
                             std::uint64_t seed, const RolloutConfig& config,
                             const vision::PipelineConfig& vision = {});

}  // namespace nti::eval
