#include "nti/teleop/session.hpp"

#include <fmt/format.h>

namespace nti::teleop {

namespace fs = std::filesystem;

void DirectWriter::submit(fs::path dir, data::Episode episode) { data::write_episode(dir, episode); }

BackgroundWriter::BackgroundWriter(std::size_t capacity)
    : capacity_(std::max<std::size_t>(capacity, 1)),
      thread_([this](std::stop_token stop) { loop(stop); }) {}

BackgroundWriter::~BackgroundWriter() {
  flush();
  thread_.request_stop();
}

void BackgroundWriter::submit(fs::path dir, data::Episode episode) {
  std::unique_lock lock(mutex_);
  changed_.wait(lock, [this] { return queue_.size() < capacity_; });
  queue_.emplace_back(std::move(dir), std::move(episode));
  changed_.notify_all();
}

void BackgroundWriter::flush() {
  std::unique_lock lock(mutex_);
  changed_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

std::size_t BackgroundWriter::written() const {
  std::lock_guard lock(mutex_);
  return written_;
}

std::vector<std::string> BackgroundWriter::errors() const {
  std::lock_guard lock(mutex_);
  return errors_;
}

void BackgroundWriter::loop(std::stop_token stop) {
  std::unique_lock lock(mutex_);
  while (true) {
    if (!changed_.wait(lock, stop, [this] { return !queue_.empty(); })) return;
    auto [dir, episode] = std::move(queue_.front());
    queue_.pop_front();
    busy_ = true;
    changed_.notify_all();
    lock.unlock();
    std::string failure;
    try {
      data::write_episode(dir, episode);
    } catch (const std::exception& e) {
      failure = fmt::format("{}: {}", dir.string(), e.what());
    }
    lock.lock();
    busy_ = false;
    if (failure.empty()) ++written_;
    else errors_.push_back(std::move(failure));
    changed_.notify_all();
  }
}

std::string_view to_string(RecordingState state) {
  switch (state) {
    case RecordingState::kIdle:
      return "idle";
    case RecordingState::kRecording:
      return "recording";
    case RecordingState::kStopped:
      return "stopped";
  }
  return "idle";
}

nlohmann::json SessionOptions::to_json() const {
  return {{"out_dir", out_dir.string()},
          {"side_view", side_view},
          {"max_record_steps", max_record_steps},
          {"filter", filter.to_json()}};
}

Session::Session(const sim::Simulator& sim, SessionOptions options, std::string client,
                 std::uint64_t seed, EpisodeSink& sink)
    : sim_(sim), options_(std::move(options)), client_(std::move(client)), seed_(seed), sink_(sink) {
  options_.filter.validate();
  if (options_.max_record_steps < 1) throw std::invalid_argument("max_record_steps must be positive");
  state_ = sim_.reset(seed_);
  forces_ = sim_.measure(state_);
}

const sim::SimState& Session::state() const { return recorder_ ? recorder_->state() : state_; }
const sim::ForceSample& Session::forces() const { return recorder_ ? recorder_->forces() : forces_; }

int Session::recorded_steps() const {
  if (recorder_) return recorder_->step();
  if (stopped_) return static_cast<int>(stopped_->action_count());
  return 0;
}

nlohmann::json Session::reply(const std::string& type) {
  return {{"v", kProtocolVersion}, {"type", type}, {"seq", reply_seq_++}};
}

nlohmann::json Session::error_reply(const std::string& message, std::optional<std::uint64_t> ref) {
  nlohmann::json j = reply("error");
  j["ref"] = ref ? nlohmann::json(*ref) : nlohmann::json(nullptr);
  j["message"] = message;
  return j;
}

nlohmann::json Session::hello() {
  nlohmann::json j = reply("hello");
  const auto& cfg = sim_.config();
  j["session"] = client_;
  j["seed"] = seed_;
  j["dt"] = cfg.dt;
  j["limits"] = {{"max_dx", cfg.limits.max_dx},
                 {"max_dz", cfg.limits.max_dz},
                 {"max_dtheta", cfg.limits.max_dtheta}};
  j["filter"] = options_.to_json()["filter"];
  j["camera"] = {{"width", cfg.camera.width}, {"height", cfg.camera.height}};
  return j;
}

std::vector<nlohmann::json> Session::receive(std::string_view text) {
  ClientMessage message;
  try {
    message = parse_client_message(text);
  } catch (const ProtocolError& e) {
    return {error_reply(e.what(), std::nullopt)};
  }
  return receive(message);
}

std::vector<nlohmann::json> Session::receive(const ClientMessage& message) {
  const std::uint64_t seq = sequence_of(message);
  if (any_seq_ && seq <= last_seq_) {
    return {error_reply(fmt::format("stale sequence number {} (last applied {})", seq, last_seq_), seq)};
  }
  any_seq_ = true;
  last_seq_ = seq;
  try {
    if (const auto* c = std::get_if<Control>(&message)) {
      pending_ = c->increment;
      return {};
    }
    if (const auto* r = std::get_if<Record>(&message)) return apply(*r);
    const auto& reset = std::get<Reset>(message);
    if (recording_ == RecordingState::kRecording) throw SessionError("cannot reset while recording");
    seed_ = reset.seed.value_or(seed_);
    state_ = sim_.reset(seed_);
    forces_ = sim_.measure(state_);
    pending_.reset();
    nlohmann::json ack = reply("ack");
    ack["ref"] = seq;
    ack["cmd"] = "reset";
    ack["seed"] = seed_;
    return {ack};
  } catch (const SessionError& e) {
    return {error_reply(e.what(), seq)};
  }
}

std::vector<nlohmann::json> Session::apply(const Record& record) {
  switch (record.command) {
    case RecordCommand::kStart:
      start_recording();
      break;
    case RecordCommand::kStop:
      if (recording_ != RecordingState::kRecording) throw SessionError("not recording");
      stop_recording();
      break;
    case RecordCommand::kSave:
    case RecordCommand::kDiscard:
      if (const auto saved = finalize_recording(record.command)) {
        nlohmann::json v = reply("verdict");
        v["ref"] = record.seq;
        v["path"] = saved->dir.string();
        v["outcome"] = saved->outcome;
        v["verdicts"] = {verdict_json(saved->safety), verdict_json(saved->training)};
        return {v};
      }
      break;
  }
  nlohmann::json ack = reply("ack");
  ack["ref"] = record.seq;
  ack["cmd"] = to_string(record.command);
  if (record.command == RecordCommand::kStop) {
    ack["outcome"] = stopped_->meta.outcome;
    ack["steps"] = stopped_->action_count();
  }
  return {ack};
}

void Session::start_recording() {
  if (recording_ == RecordingState::kRecording) throw SessionError("already recording");
  if (recording_ == RecordingState::kStopped) throw SessionError("save or discard the stopped recording first");
  eval::RolloutConfig rc;
  rc.max_steps = options_.max_record_steps;
  rc.limits = options_.filter;
  rc.record_frames = true;
  recorder_.emplace(sim_, seed_, data::OperatorKind::kHuman, rc);
  pending_.reset();
  recording_ = RecordingState::kRecording;
}

void Session::stop_recording() {
  state_ = recorder_->state();
  forces_ = recorder_->forces();
  stopped_ = recorder_->close(sim::Outcome{});
  stopped_->meta.extra["client"] = client_;
  recorder_.reset();
  recording_ = RecordingState::kStopped;
}

fs::path Session::next_dir() {
  fs::path dir;
  do {
    dir = options_.out_dir / fmt::format("{}_{:04d}", client_, saves_++);
  } while (fs::exists(dir));
  return dir;
}

std::optional<SaveResult> Session::finalize_recording(RecordCommand command) {
  if (command != RecordCommand::kSave && command != RecordCommand::kDiscard) {
    throw SessionError("finalize expects save or discard");
  }
  if (recording_ != RecordingState::kStopped) throw SessionError("no stopped recording to finalize");
  if (command == RecordCommand::kDiscard) {
    stopped_.reset();
    recording_ = RecordingState::kIdle;
    return std::nullopt;
  }
  if (stopped_->action_count() == 0) throw SessionError("cannot save an empty recording");
  SaveResult result;
  result.dir = next_dir();
  result.outcome = stopped_->meta.outcome;
  result.safety = *stopped_->meta.safety;
  result.training = *stopped_->meta.training;
  sink_.submit(result.dir, std::move(*stopped_));
  stopped_.reset();
  recording_ = RecordingState::kIdle;
  return result;
}

nlohmann::json Session::tick() {
  const sim::ControlIncrement u = sim_.config().limits.clamp(pending_.value_or(sim::ControlIncrement{}));
  pending_.reset();
  if (recorder_) {
    recorder_->apply(u);
    if (recorder_->finished()) stop_recording();
  } else {
    const sim::StepResult r = sim_.step(state_, u);
    state_ = r.state;
    forces_ = r.forces;
  }
  last_applied_ = u;
  return state_frame();
}

nlohmann::json Session::state_frame() {
  const sim::SimState& s = state();
  const sim::ForceSample& f = forces();
  nlohmann::json j{{"v", kProtocolVersion}, {"type", "state"}, {"seq", frame_seq_++}};
  j["t"] = s.time;
  j["step"] = s.step_index;
  j["pose"] = {{"x", s.ee.x}, {"z", s.ee.z}, {"theta", s.ee.theta}};
  j["forces"] = {{"fx", f.fx}, {"fy", f.fy}, {"fz", f.fz}, {"f1", f.f1}, {"f2", f.f2}};
  j["ee_force"] = {{"fx", f.fx_ee}, {"fy", f.fy_ee}, {"fz", f.fz_ee}};
  j["applied"] = {{"dx", last_applied_.dx}, {"dz", last_applied_.dz}, {"dtheta", last_applied_.dtheta}};
  j["control_seq"] = any_seq_ ? nlohmann::json(last_seq_) : nlohmann::json(nullptr);
  j["unstable"] = s.unstable;
  j["recording"] = to_string(recording_);
  j["recorded_steps"] = recorded_steps();
  if (recorder_) j["outcome"] = sim::to_string(recorder_->outcome());
  else if (stopped_) j["outcome"] = stopped_->meta.outcome;
  else j["outcome"] = "in_progress";
  const Image frame = recorder_ ? recorder_->frame()
                                : sim_.render_camera1(s, eval::frame_seed(seed_, static_cast<int>(s.step_index)));
  j["frame"] = encode_frame(frame);
  if (options_.side_view) j["side_view"] = encode_frame(sim_.render_side_view(s));
  return j;
}

}  // namespace nti::teleop
