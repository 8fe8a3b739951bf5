#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nti/eval/rollout.hpp"
#include "nti/teleop/protocol.hpp"

namespace nti::teleop {

// Receives finished episodes for persistence.
class EpisodeSink {
 public:
  virtual ~EpisodeSink() = default;
  virtual void submit(std::filesystem::path dir, data::Episode episode) = 0;
};

// Writes on the calling thread.
class DirectWriter final : public EpisodeSink {
 public:
  void submit(std::filesystem::path dir, data::Episode episode) override;
};

// Writes on a dedicated thread; submit() blocks while `capacity` episodes are queued.
class BackgroundWriter final : public EpisodeSink {
 public:
  explicit BackgroundWriter(std::size_t capacity = 8);
  ~BackgroundWriter() override;

  void submit(std::filesystem::path dir, data::Episode episode) override;
  // Blocks until the queue is drained.
  void flush();
  std::size_t written() const;
  std::vector<std::string> errors() const;

 private:
  void loop(std::stop_token stop);

  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable_any changed_;
  std::deque<std::pair<std::filesystem::path, data::Episode>> queue_;
  bool busy_ = false;
  std::size_t written_ = 0;
  std::vector<std::string> errors_;
  std::jthread thread_;
};

class SessionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RecordingState { kIdle, kRecording, kStopped };
std::string_view to_string(RecordingState state);

struct SessionOptions {
  data::FilterConfig filter;
  std::filesystem::path out_dir = "teleop_episodes";
  bool side_view = true;
  int max_record_steps = 1200;

  nlohmann::json to_json() const;
};

struct SaveResult {
  std::filesystem::path dir;
  std::string outcome;
  data::Verdict safety;
  data::Verdict training;
};

// One operator connection: a private simulator state, the pending control of the current
// tick and the recording buffer. Not thread-safe; the server drives each session from a
// single execution context.
class Session {
 public:
  Session(const sim::Simulator& sim, SessionOptions options, std::string client, std::uint64_t seed,
          EpisodeSink& sink);

  const std::string& client() const { return client_; }
  std::uint64_t seed() const { return seed_; }
  RecordingState recording() const { return recording_; }
  std::uint64_t last_applied() const { return last_seq_; }
  const sim::SimState& state() const;
  const sim::ForceSample& forces() const;
  // Actions applied to the current recording.
  int recorded_steps() const;

  // Protocol entry point: parses and applies one client message and returns the replies
  // (ack, verdict or error). Errors never end the session.
  std::vector<nlohmann::json> receive(std::string_view text);
  std::vector<nlohmann::json> receive(const ClientMessage& message);

  // Applies the last control received since the previous tick (zero if none), clamped to
  // the control limits, advances one step and returns the StateFrame.
  nlohmann::json tick();
  // StateFrame of the current state without advancing.
  nlohmann::json state_frame();
  nlohmann::json hello();
  nlohmann::json error_reply(const std::string& message, std::optional<std::uint64_t> ref = std::nullopt);

  // Requires a stopped recording. Save writes the episode through the sink and returns both
  // verdicts; discard drops the buffer. Throws SessionError otherwise.
  std::optional<SaveResult> finalize_recording(RecordCommand command);

 private:
  nlohmann::json reply(const std::string& type);
  std::vector<nlohmann::json> apply(const Record& record);
  void start_recording();
  void stop_recording();
  std::filesystem::path next_dir();

  const sim::Simulator& sim_;
  SessionOptions options_;
  std::string client_;
  std::uint64_t seed_;
  EpisodeSink& sink_;

  sim::SimState state_;
  sim::ForceSample forces_;
  std::optional<sim::ControlIncrement> pending_;
  sim::ControlIncrement last_applied_;
  std::uint64_t last_seq_ = 0;
  bool any_seq_ = false;
  std::uint64_t frame_seq_ = 0;
  std::uint64_t reply_seq_ = 0;

  RecordingState recording_ = RecordingState::kIdle;
  std::optional<eval::EpisodeRecorder> recorder_;
  std::optional<data::Episode> stopped_;
  int saves_ = 0;
};

}  // namespace nti::teleop
