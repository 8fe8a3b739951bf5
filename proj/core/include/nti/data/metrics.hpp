#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace nti::data {

inline constexpr std::size_t kChannelCount = 5;
using ChannelArray = std::array<double, kChannelCount>;

// Order of the five sensor channels everywhere in the project.
inline constexpr std::array<std::string_view, kChannelCount> kChannelNames{"Fx", "Fy", "Fz", "F1",
                                                                          "F2"};

struct EpisodeMetrics {
  double duration = 0.0;         // s
  ChannelArray peak{};           // N
  ChannelArray impulse{};        // N*s
  ChannelArray log_impulse{};    // ln(max(I, floor))

  double max_peak() const;
  double max_log_impulse() const;
};

enum class ImpulseDomain { kLog, kLinear };

struct FilterConfig {
  double force_threshold = 1.5;   // N
  double time_limit = 20.0;       // s
  double peak_limit = 5.0;        // N
  double log_impulse_limit = 1.0; // ln(N*s)
  double keep_fraction = 0.7;
  // Which quantity the keep fraction scales for the impulse criterion.
  ImpulseDomain impulse_domain = ImpulseDomain::kLog;
  double impulse_floor = 1e-9;

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; the result is validated.
  static FilterConfig from_json(const nlohmann::json& j);
};

// Trapezoidal integral of max(F - threshold, 0) over uniformly sampled F.
// Throws std::invalid_argument on an empty signal or dt <= 0.
double compute_impulse(std::span<const double> signal, double threshold, double dt);

// Metrics from per-step channel samples taken every dt. Peaks and impulses use |F|.
EpisodeMetrics compute_metrics(std::span<const ChannelArray> forces, double dt,
                               const FilterConfig& config = {});

enum class FilterMode { kSafety, kTraining };

std::string_view to_string(FilterMode mode);
FilterMode filter_mode_from_string(std::string_view text);

struct Verdict {
  FilterMode mode = FilterMode::kSafety;
  bool accept = true;
  std::vector<std::string> reasons;  // e.g. "time", "peak:F2", "impulse:Fx"
};

struct Limits {
  double time = 0.0;
  double peak = 0.0;
  double log_impulse = 0.0;
};

// Safety limits as configured, or the keep-fraction-scaled training limits.
Limits limits_for(const FilterConfig& config, FilterMode mode);

Verdict filter_episode(const EpisodeMetrics& metrics, const FilterConfig& config, FilterMode mode);

}  // namespace nti::data
