#include "nti/data/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nti::data {

double EpisodeMetrics::max_peak() const { return *std::max_element(peak.begin(), peak.end()); }

double EpisodeMetrics::max_log_impulse() const {
  return *std::max_element(log_impulse.begin(), log_impulse.end());
}

void FilterConfig::validate() const {
  if (!(force_threshold > 0 && time_limit > 0 && peak_limit > 0 && log_impulse_limit > 0 &&
        impulse_floor > 0)) {
    throw std::invalid_argument("filter config: limits must be positive");
  }
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw std::invalid_argument("filter config: keep fraction must lie in (0, 1]");
  }
}

nlohmann::json FilterConfig::to_json() const {
  return {{"force_threshold", force_threshold},
          {"time_limit", time_limit},
          {"peak_limit", peak_limit},
          {"log_impulse_limit", log_impulse_limit},
          {"keep_fraction", keep_fraction},
          {"impulse_domain", impulse_domain == ImpulseDomain::kLog ? "log" : "linear"},
          {"impulse_floor", impulse_floor}};
}

FilterConfig FilterConfig::from_json(const nlohmann::json& j) {
  FilterConfig c;
  c.force_threshold = j.value("force_threshold", c.force_threshold);
  c.time_limit = j.value("time_limit", c.time_limit);
  c.peak_limit = j.value("peak_limit", c.peak_limit);
  c.log_impulse_limit = j.value("log_impulse_limit", c.log_impulse_limit);
  c.keep_fraction = j.value("keep_fraction", c.keep_fraction);
  const std::string domain = j.value("impulse_domain", std::string("log"));
  if (domain == "log") c.impulse_domain = ImpulseDomain::kLog;
  else if (domain == "linear") c.impulse_domain = ImpulseDomain::kLinear;
  else throw std::invalid_argument("filter config: impulse_domain must be log or linear");
  c.impulse_floor = j.value("impulse_floor", c.impulse_floor);
  c.validate();
  return c;
}

}  // namespace nti::data

namespace nti::data {

double compute_impulse(std::span<const double> signal, double threshold, double dt) {
  if (signal.empty()) throw std::invalid_argument("compute_impulse: empty signal");
  if (!(dt > 0.0)) throw std::invalid_argument("compute_impulse: dt must be positive");
  double sum = 0.0;
  for (std::size_t i = 1; i < signal.size(); ++i) {
    const double a = std::max(signal[i - 1] - threshold, 0.0);
    const double b = std::max(signal[i] - threshold, 0.0);
    sum += 0.5 * (a + b) * dt;
  }
  return sum;
}

EpisodeMetrics compute_metrics(std::span<const ChannelArray> forces, double dt,
                               const FilterConfig& config) {
  EpisodeMetrics m;
  m.duration = forces.empty() ? 0.0 : dt * static_cast<double>(forces.size() - 1);
  std::vector<double> channel(forces.size());
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    double peak = 0.0;
    for (std::size_t i = 0; i < forces.size(); ++i) {
      channel[i] = std::abs(forces[i][c]);
      peak = std::max(peak, channel[i]);
    }
    m.peak[c] = peak;
    m.impulse[c] = forces.empty() ? 0.0 : compute_impulse(channel, config.force_threshold, dt);
    m.log_impulse[c] = std::log(std::max(m.impulse[c], config.impulse_floor));
  }
  return m;
}

std::string_view to_string(FilterMode mode) {
  return mode == FilterMode::kSafety ? "safety" : "training";
}

FilterMode filter_mode_from_string(std::string_view text) {
  if (text == "safety") return FilterMode::kSafety;
  if (text == "training") return FilterMode::kTraining;
  throw std::invalid_argument("unknown filter mode '" + std::string(text) + "'");
}

Limits limits_for(const FilterConfig& config, FilterMode mode) {
  Limits l{config.time_limit, config.peak_limit, config.log_impulse_limit};
  if (mode == FilterMode::kTraining) {
    const double f = config.keep_fraction;
    l.time *= f;
    l.peak *= f;
    l.log_impulse = config.impulse_domain == ImpulseDomain::kLog
                        ? f * config.log_impulse_limit
                        : config.log_impulse_limit + std::log(f);
  }
  return l;
}

Verdict filter_episode(const EpisodeMetrics& metrics, const FilterConfig& config, FilterMode mode) {
  const Limits l = limits_for(config, mode);
  Verdict v;
  v.mode = mode;
  if (!(metrics.duration < l.time)) v.reasons.emplace_back("time");
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    if (!(metrics.peak[c] < l.peak)) v.reasons.push_back("peak:" + std::string(kChannelNames[c]));
  }
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    if (!(metrics.log_impulse[c] < l.log_impulse)) {
      v.reasons.push_back("impulse:" + std::string(kChannelNames[c]));
    }
  }
  v.accept = v.reasons.empty();
  return v;
}

}  // namespace nti::data
