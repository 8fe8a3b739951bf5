#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nti/data/metrics.hpp"
#include "nti/imaging/image.hpp"
#include "nti/sim/types.hpp"

namespace nti::data {

enum class OperatorKind { kScripted, kHuman, kPolicy };

std::string to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(const std::string& text);

// One row: the state observed at time t and the action applied from it. The final row of a
// finished episode holds the terminal state and a zero action.
struct EpisodeStep {
  double t = 0.0;
  sim::Pose pose;
  std::array<double, 3> ee_force{};
  ChannelArray forces{};
  sim::ControlIncrement action;
};

struct EpisodeMeta {
  std::uint64_t seed = 0;
  OperatorKind operator_kind = OperatorKind::kScripted;
  std::string outcome = "in_progress";
  double dt = 0.05;
  std::optional<Verdict> safety;
  std::optional<Verdict> training;
  nlohmann::json extra = nlohmann::json::object();
};

struct Episode {
  EpisodeMeta meta;
  std::vector<EpisodeStep> steps;
  std::vector<Image> frames;  // camera-1 frame per step; may be empty when loaded without frames

  // Number of applied actions (rows minus the terminal row).
  std::size_t action_count() const { return steps.empty() ? 0 : steps.size() - 1; }
  std::vector<ChannelArray> force_series() const;
};

EpisodeStep make_step(const sim::SimState& state, const sim::ForceSample& forces);

EpisodeMetrics compute_metrics(const Episode& episode, const FilterConfig& config = {});

// Computes both verdicts and stores them with the metrics in the metadata.
void attach_verdicts(Episode& episode, const FilterConfig& config);

std::string frame_name(std::size_t index);

// Directory layout: meta.json, signals.csv, frames/NNNNNN.png. Overwrites existing files.
void write_episode(const std::filesystem::path& dir, const Episode& episode);
Episode read_episode(const std::filesystem::path& dir, bool load_frames = true);

std::string signals_csv(const Episode& episode);
nlohmann::json meta_json(const Episode& episode);

// Episode directories directly under `root`, sorted by name.
std::vector<std::filesystem::path> list_episodes(const std::filesystem::path& root);

}  // namespace nti::data
