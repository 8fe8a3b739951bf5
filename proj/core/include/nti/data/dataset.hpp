#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "nti/data/episode.hpp"
#include "nti/vision/vision.hpp"

namespace nti::data {

inline constexpr std::size_t kProprioDim = 6;  // pose (x, z, theta) + end-effector force (3)
inline constexpr std::size_t kActionDim = 3;

// Camera frame reduced to the model input: box-averaged grey level and the selected tube mask.
struct FrameFeatures {
  int side = 0;
  std::vector<std::uint8_t> gray;
  std::vector<std::uint8_t> mask;  // fraction of tube pixels per cell, scaled to 0..255
  double s_kappa = 1.0;
  bool tube_found = false;
};

FrameFeatures extract_features(const Image& frame, int side, const vision::PipelineConfig& config);

// Grey channel then mask channel, both scaled to [0, 1].
std::vector<double> image_input(const FrameFeatures& features);

std::array<double, kProprioDim> proprio_of(const EpisodeStep& step);

struct FieldStats {
  std::vector<double> mean;
  std::vector<double> std;  // 1 where a field has no spread

  static FieldStats compute(std::span<const double> rows, std::size_t dim);
  void normalize(std::span<double> values) const;
  void denormalize(std::span<double> values) const;
  nlohmann::json to_json() const;
  static FieldStats from_json(const nlohmann::json& j);
};

struct DatasetStats {
  FieldStats proprio;
  FieldStats action;
  FieldStats s_kappa;

  nlohmann::json to_json() const;
  static DatasetStats from_json(const nlohmann::json& j);
};

struct DatasetConfig {
  int chunk = 80;
  int image_side = 32;
  FilterConfig filter;
  vision::PipelineConfig vision;
};

struct EpisodeData {
  std::filesystem::path source;
  std::vector<FrameFeatures> frames;        // one per action step
  std::vector<double> proprio;              // action_count x kProprioDim, raw units
  std::vector<double> actions;              // action_count x kActionDim, raw units

  std::size_t length() const { return actions.size() / kActionDim; }
};

// One training window: the observation at step t and the k actions from t on.
struct Window {
  std::vector<double> image;     // 2 x side x side: grey then mask, both in [0, 1]
  std::vector<double> proprio;   // normalized
  double s_kappa = 0.0;          // normalized
  std::vector<double> actions;   // k x 3, normalized; padded slots repeat the last action
  std::vector<std::uint8_t> pad; // k flags
};

class Dataset {
 public:
  Dataset(DatasetConfig config, std::vector<EpisodeData> episodes);

  const DatasetConfig& config() const { return config_; }
  const DatasetStats& stats() const { return stats_; }
  const std::vector<EpisodeData>& episodes() const { return episodes_; }
  std::size_t size() const { return index_.size(); }

  Window window(std::size_t i) const;
  // Episode and step behind window i.
  std::pair<std::size_t, std::size_t> locate(std::size_t i) const { return index_.at(i); }

  // FNV-1a over the normalized content and the stats, independent of source paths.
  std::uint64_t fingerprint() const;

 private:
  DatasetConfig config_;
  std::vector<EpisodeData> episodes_;
  DatasetStats stats_;
  std::vector<std::pair<std::size_t, std::size_t>> index_;
};

EpisodeData episode_data(const Episode& episode, const DatasetConfig& config);

struct DatasetBuild {
  Dataset dataset;
  std::vector<std::filesystem::path> accepted;
  std::vector<std::filesystem::path> rejected;
};

// Loads the episode directories, keeps those whose training verdict (recomputed from the
// signals) accepts, and assembles windows. Throws std::runtime_error when none is accepted.
DatasetBuild build_dataset(const std::vector<std::filesystem::path>& episode_dirs,
                           const DatasetConfig& config);

void write_stats(const std::filesystem::path& path, const DatasetStats& stats);
DatasetStats read_stats(const std::filesystem::path& path);

}  // namespace nti::data
