#include "nti/eval/rollout.hpp"

namespace nti::eval {

std::uint64_t frame_seed(std::uint64_t seed, int step) {
  return seed * 1000003ULL + static_cast<std::uint64_t>(step);
}

EpisodeRecorder::EpisodeRecorder(const sim::Simulator& sim, std::uint64_t seed,
                                 data::OperatorKind kind, RolloutConfig config)
    : sim_(sim), config_(std::move(config)) {
  episode_.meta.seed = seed;
  episode_.meta.operator_kind = kind;
  episode_.meta.dt = sim.config().dt;
  state_ = sim.reset(seed);
  forces_ = sim.measure(state_);
  frame_ = sim.render_camera1(state_, frame_seed(seed, 0));
}

bool EpisodeRecorder::finished() const {
  return outcome_.terminal() || step() >= config_.max_steps;
}

const sim::Outcome& EpisodeRecorder::apply(const sim::ControlIncrement& u) {
  if (closed_ || finished()) throw std::logic_error("episode recording already finished");
  data::EpisodeStep row = data::make_step(state_, forces_);
  row.action = u;
  const sim::StepResult next = sim_.step(state_, u);
  if (config_.record_frames) episode_.frames.push_back(std::move(frame_));
  episode_.steps.push_back(row);
  state_ = next.state;
  forces_ = next.forces;

  std::vector<data::ChannelArray> series = episode_.force_series();
  series.push_back(forces_.channels());
  const auto metrics = data::compute_metrics(series, episode_.meta.dt, config_.limits);
  outcome_ = sim::check_outcome(sim_, state_, metrics, config_.limits);
  frame_ = sim_.render_camera1(state_, frame_seed(episode_.meta.seed, step()));
  return outcome_;
}

data::Episode EpisodeRecorder::close(sim::Outcome open_outcome) {
  if (closed_) throw std::logic_error("episode recording already closed");
  closed_ = true;
  episode_.steps.push_back(data::make_step(state_, forces_));
  if (config_.record_frames) episode_.frames.push_back(frame_);
  episode_.meta.outcome = sim::to_string(outcome_.terminal() ? outcome_ : open_outcome);
  data::attach_verdicts(episode_, config_.limits);
  return std::move(episode_);
}

data::Episode rollout(const sim::Simulator& sim, const Controller& controller, std::uint64_t seed,
                      const RolloutConfig& config, data::OperatorKind kind) {
  EpisodeRecorder rec(sim, seed, kind, config);
  while (!rec.finished()) rec.apply(controller(rec.state(), rec.forces(), rec.frame(), rec.step()));
  return rec.close();
}

data::Episode replay(const sim::Simulator& sim, const data::Episode& recorded,
                     const data::FilterConfig& limits) {
  RolloutConfig config;
  config.max_steps = static_cast<int>(recorded.action_count());
  config.limits = limits;
  config.record_frames = !recorded.frames.empty();
  EpisodeRecorder rec(sim, recorded.meta.seed, recorded.meta.operator_kind, config);
  for (std::size_t i = 0; i < recorded.action_count() && !rec.finished(); ++i) {
    rec.apply(recorded.steps[i].action);
  }
  data::Episode e = rec.close(sim::outcome_from_string(recorded.meta.outcome));
  nlohmann::json extra = recorded.meta.extra;
  extra["metrics"] = e.meta.extra["metrics"];
  e.meta.extra = std::move(extra);
  return e;
}

data::Episode rollout_expert(const sim::Simulator& sim, const ScriptedExpertConfig& expert,
                             std::uint64_t seed, const RolloutConfig& config) {
  ScriptedExpert agent(expert, sim.config(), seed);
  data::Episode e = rollout(
      sim,
      [&agent](const sim::SimState& s, const sim::ForceSample& f, const Image&, int) {
        return agent.act(s, f);
      },
      seed, config, data::OperatorKind::kScripted);
  e.meta.extra["expert"] = expert.to_json();
  e.meta.extra["expert_speed"] = agent.speed();
  return e;
}

PolicyController::PolicyController(const policy::Model& model, const data::DatasetStats& stats,
                                   vision::PipelineConfig vision, sim::ControlLimits limits)
    : model_(model),
      stats_(stats),
      vision_(std::move(vision)),
      limits_(limits),
      buffer_(static_cast<std::size_t>(model.hp().chunk)) {}

policy::Observation PolicyController::observe(const sim::SimState& state,
                                              const sim::ForceSample& forces,
                                              const Image& frame) const {
  const data::FrameFeatures f = data::extract_features(frame, model_.hp().image_side, vision_);
  policy::Observation obs;
  obs.image = data::image_input(f);
  const auto p = data::proprio_of(data::make_step(state, forces));
  obs.proprio.assign(p.begin(), p.end());
  stats_.proprio.normalize(obs.proprio);
  obs.s_kappa = f.s_kappa;
  stats_.s_kappa.normalize(std::span<double>(&obs.s_kappa, 1));
  return obs;
}

sim::ControlIncrement PolicyController::operator()(const sim::SimState& state,
                                                   const sim::ForceSample& forces,
                                                   const Image& frame, int step) {
  const policy::Observation obs = observe(state, forces, frame);
  auto [chunk, next] = model_.infer(obs, decoder_ ? &*decoder_ : nullptr);
  decoder_ = std::move(next);
  buffer_.push(step, std::move(chunk));
  std::array<double, 3> a =
      buffer_.action_at(step, model_.hp().ensemble_decay, model_.hp().ensemble_order);
  stats_.action.denormalize(a);
  return limits_.clamp({a[0], a[1], a[2]});
}

data::Episode rollout_policy(const sim::Simulator& sim, const policy::PolicyBundle& bundle,
                             std::uint64_t seed, const RolloutConfig& config,
                             const vision::PipelineConfig& vision) {
  PolicyController controller(bundle.model, bundle.stats, vision, sim.config().limits);
  data::Episode e = rollout(
      sim,
      [&controller](const sim::SimState& s, const sim::ForceSample& f, const Image& frame,
                    int step) { return controller(s, f, frame, step); },
      seed, config, data::OperatorKind::kPolicy);
  e.meta.extra["variant"] = policy::to_string(bundle.model.variant());
  return e;
}

}  // namespace nti::eval
