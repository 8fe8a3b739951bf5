#include "nti/eval/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <stdexcept>

namespace nti::eval {

std::optional<std::pair<double, std::size_t>> MetricsRow::max_peak() const {
  if (!peak) return std::nullopt;
  const auto it = std::max_element(peak->begin(), peak->end());
  return std::make_pair(*it, static_cast<std::size_t>(it - peak->begin()));
}

MetricsRow aggregate(const std::string& condition, std::span<const data::Episode> episodes,
                     const data::FilterConfig& config) {
  MetricsRow row;
  row.condition = condition;
  row.episodes = static_cast<int>(episodes.size());
  double time = 0.0;
  data::ChannelArray impulse{}, peak{};
  for (const data::Episode& e : episodes) {
    if (e.meta.outcome != "success") continue;
    ++row.successes;
    const data::EpisodeMetrics m = data::compute_metrics(e, config);
    time += m.duration;
    for (std::size_t c = 0; c < data::kChannelCount; ++c) {
      impulse[c] += m.log_impulse[c];
      peak[c] += m.peak[c];
    }
  }
  row.success_rate = row.episodes > 0 ? static_cast<double>(row.successes) / row.episodes : 0.0;
  if (row.successes > 0) {
    const double n = row.successes;
    row.mean_time = time / n;
    for (std::size_t c = 0; c < data::kChannelCount; ++c) {
      impulse[c] /= n;
      peak[c] /= n;
    }
    row.log_impulse = impulse;
    row.peak = peak;
  }
  return row;
}

const MetricsRow* MetricsTable::find(const std::string& condition) const {
  for (const MetricsRow& r : rows) {
    if (r.condition == condition) return &r;
  }
  return nullptr;
}

std::array<std::string, kMetricCount> metric_names() {
  std::array<std::string, kMetricCount> names;
  names[0] = "success_rate";
  names[1] = "time_s";
  for (std::size_t c = 0; c < 5; ++c) {
    names[2 + c] = std::string("ln_impulse_") + kChannelNames[c];
    names[7 + c] = std::string("peak_") + kChannelNames[c];
  }
  return names;
}

namespace {

std::optional<double> metric(const MetricsRow& r, std::size_t i) {
  if (i == 0) return r.success_rate;
  if (i == 1) return r.mean_time;
  if (i < 7) return r.log_impulse ? std::optional<double>((*r.log_impulse)[i - 2]) : std::nullopt;
  return r.peak ? std::optional<double>((*r.peak)[i - 7]) : std::nullopt;
}

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : "-"; }

}  // namespace

std::vector<std::array<double, kMetricCount>> radar_scores(const MetricsTable& table) {
  std::vector<std::array<double, kMetricCount>> scores(table.rows.size());
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    double lo = INFINITY, hi = -INFINITY;
    for (const MetricsRow& r : table.rows) {
      if (const auto v = metric(r, i)) {
        lo = std::min(lo, *v);
        hi = std::max(hi, *v);
      }
    }
    for (std::size_t j = 0; j < table.rows.size(); ++j) {
      const auto v = metric(table.rows[j], i);
      if (!v) {
        scores[j][i] = 0.0;
      } else if (hi - lo <= 0.0) {
        scores[j][i] = 1.0;
      } else {
        const double s = (*v - lo) / (hi - lo);
        scores[j][i] = i == 0 ? s : 1.0 - s;
      }
    }
  }
  return scores;
}

std::string render_text(const MetricsTable& table,
                        const std::optional<PeakComparison>& comparison) {
  std::size_t name_width = 9;
  for (const MetricsRow& r : table.rows) name_width = std::max(name_width, r.condition.size());

  std::string out;
  out += fmt::format("{:<{}}  {:>7}  {:>8}  {:^34}  {:^34}\n", "", name_width, "", "",
                     "ln Impulse (ln(N*s))", "Peak (N)");
  std::string header = fmt::format("{:<{}}  {:>7}  {:>8}", "Condition", name_width, "Success", "Time (s)");
  for (int group = 0; group < 2; ++group) {
    header += " ";
    for (const char* c : kChannelNames) header += fmt::format(" {:>6}", c);
  }
  out += header + "\n";
  out += std::string(header.size(), '-') + "\n";
  for (const MetricsRow& r : table.rows) {
    std::string line = fmt::format("{:<{}}  {:>6.0f}%  {:>8}", r.condition, name_width,
                                   100.0 * r.success_rate, cell(r.mean_time));
    for (std::size_t base : {std::size_t{2}, std::size_t{7}}) {
      line += " ";
      for (std::size_t c = 0; c < 5; ++c) line += fmt::format(" {:>6}", cell(metric(r, base + c)));
    }
    out += line + "\n";
  }

  if (comparison) {
    const MetricsRow* s = table.find(comparison->subject);
    const MetricsRow* ref = table.find(comparison->reference);
    if (s == nullptr || ref == nullptr) {
      throw std::invalid_argument("render_text: comparison rows not in table");
    }
    const auto ps = s->max_peak();
    const auto pr = ref->max_peak();
    out += "\n";
    if (ps && pr) {
      out += fmt::format("Max-channel peak: {} {:.2f} N ({}) vs {} {:.2f} N ({}), ratio {:.3f}\n",
                         s->condition, ps->first, kChannelNames[ps->second], ref->condition,
                         pr->first, kChannelNames[pr->second], ps->first / pr->first);
    } else {
      out += fmt::format("Max-channel peak: undefined ({} or {} has no successful episode)\n",
                         s->condition, ref->condition);
    }
  }

  out += "\nRadar scores (min-max per metric, larger is better)\n";
  const auto scores = radar_scores(table);
  const auto names = metric_names();
  std::string rh = fmt::format("{:<{}}", "Condition", name_width);
  for (const char* label : {"Succ", "Time"}) rh += fmt::format(" {:>5}", label);
  for (const char* prefix : {"I", "P"}) {
    for (const char* c : kChannelNames) rh += fmt::format(" {:>5}", std::string(prefix) + c);
  }
  out += rh + "\n";
  for (std::size_t j = 0; j < table.rows.size(); ++j) {
    std::string line = fmt::format("{:<{}}", table.rows[j].condition, name_width);
    for (double v : scores[j]) line += fmt::format(" {:>5.2f}", v);
    out += line + "\n";
  }
  return out;
}

std::string render_csv(const MetricsTable& table) {
  std::string out = "condition,episodes,successes";
  for (const auto& n : metric_names()) out += "," + n;
  out += "\n";
  for (const MetricsRow& r : table.rows) {
    out += fmt::format("{},{},{}", r.condition, r.episodes, r.successes);
    for (std::size_t i = 0; i < kMetricCount; ++i) {
      const auto v = metric(r, i);
      out += v ? fmt::format(",{}", *v) : std::string(",");
    }
    out += "\n";
  }
  return out;
}

std::string render_radar_csv(const MetricsTable& table) {
  std::string out = "condition";
  for (const auto& n : metric_names()) out += "," + n;
  out += "\n";
  const auto scores = radar_scores(table);
  for (std::size_t j = 0; j < table.rows.size(); ++j) {
    out += table.rows[j].condition;
    for (double v : scores[j]) out += fmt::format(",{}", v);
    out += "\n";
  }
  return out;
}

}  // namespace nti::eval
