#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nti/data/episode.hpp"

namespace nti::eval {

inline constexpr std::array<const char*, 5> kChannelNames{"Fx", "Fy", "Fz", "F1", "F2"};

struct MetricsRow {
  std::string condition;
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  // Means over successful episodes; absent when no episode succeeded.
  std::optional<double> mean_time;
  std::optional<data::ChannelArray> log_impulse;
  std::optional<data::ChannelArray> peak;

  // Largest per-channel mean peak and its channel index.
  std::optional<std::pair<double, std::size_t>> max_peak() const;
};

// Success rate over all episodes; time, impulse and peak means over successful ones only.
MetricsRow aggregate(const std::string& condition, std::span<const data::Episode> episodes,
                     const data::FilterConfig& config = {});

struct MetricsTable {
  std::vector<MetricsRow> rows;

  const MetricsRow* find(const std::string& condition) const;
};

inline constexpr std::size_t kMetricCount = 12;  // success, time, 5 ln-impulse, 5 peak
std::array<std::string, kMetricCount> metric_names();

// Per-metric min-max scores across rows, oriented so that larger is better. A metric with no
// spread scores 1; a row without successful episodes scores 0 on the success-only metrics.
std::vector<std::array<double, kMetricCount>> radar_scores(const MetricsTable& table);

struct PeakComparison {
  std::string subject;
  std::string reference;
};

// Aligned text table, optional max-peak ratio summary line, and the radar scores.
std::string render_text(const MetricsTable& table,
                        const std::optional<PeakComparison>& comparison = std::nullopt);
std::string render_csv(const MetricsTable& table);
std::string render_radar_csv(const MetricsTable& table);

}  // namespace nti::eval
