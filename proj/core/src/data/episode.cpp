#include "nti/data/episode.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nti::data {
namespace {

constexpr const char* kSignalsHeader =
    "step,t,x,z,theta,fx_ee,fy_ee,fz_ee,Fx,Fy,Fz,F1,F2,dx,dz,dtheta,frame";

nlohmann::json verdict_json(const Verdict& v) {
  return {{"mode", std::string(to_string(v.mode))}, {"accept", v.accept}, {"reasons", v.reasons}};
}

Verdict verdict_from_json(const nlohmann::json& j) {
  Verdict v;
  v.mode = filter_mode_from_string(j.at("mode").get<std::string>());
  v.accept = j.at("accept").get<bool>();
  v.reasons = j.at("reasons").get<std::vector<std::string>>();
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::kScripted:
      return "scripted";
    case OperatorKind::kHuman:
      return "human";
    case OperatorKind::kPolicy:
      return "policy";
  }
  return "scripted";
}

OperatorKind operator_kind_from_string(const std::string& text) {
  if (text == "scripted") return OperatorKind::kScripted;
  if (text == "human") return OperatorKind::kHuman;
  if (text == "policy") return OperatorKind::kPolicy;
  throw std::invalid_argument("unknown operator kind '" + text + "'");
}

std::vector<ChannelArray> Episode::force_series() const {
  std::vector<ChannelArray> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.forces);
  return out;
}

EpisodeStep make_step(const sim::SimState& state, const sim::ForceSample& forces) {
  EpisodeStep s;
  s.t = state.time;
  s.pose = state.ee;
  s.ee_force = {forces.fx_ee, forces.fy_ee, forces.fz_ee};
  s.forces = forces.channels();
  return s;
}

EpisodeMetrics compute_metrics(const Episode& episode, const FilterConfig& config) {
  const auto series = episode.force_series();
  return compute_metrics(series, episode.meta.dt, config);
}

void attach_verdicts(Episode& episode, const FilterConfig& config) {
  const EpisodeMetrics m = compute_metrics(episode, config);
  episode.meta.safety = filter_episode(m, config, FilterMode::kSafety);
  episode.meta.training = filter_episode(m, config, FilterMode::kTraining);
  nlohmann::json metrics;
  metrics["duration"] = m.duration;
  metrics["peak"] = m.peak;
  metrics["impulse"] = m.impulse;
  metrics["log_impulse"] = m.log_impulse;
  episode.meta.extra["metrics"] = metrics;
}

std::string frame_name(std::size_t index) { return fmt::format("frames/{:06d}.png", index); }

std::string signals_csv(const Episode& episode) {
  std::string out = kSignalsHeader;
  out += '\n';
  for (std::size_t i = 0; i < episode.steps.size(); ++i) {
    const EpisodeStep& s = episode.steps[i];
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", i, s.t, s.pose.x,
                       s.pose.z, s.pose.theta, s.ee_force[0], s.ee_force[1], s.ee_force[2],
                       s.forces[0], s.forces[1], s.forces[2], s.forces[3], s.forces[4],
                       s.action.dx, s.action.dz, s.action.dtheta,
                       i < episode.frames.size() ? frame_name(i) : std::string());
  }
  return out;
}

nlohmann::json meta_json(const Episode& episode) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["seed"] = episode.meta.seed;
  j["operator"] = to_string(episode.meta.operator_kind);
  j["outcome"] = episode.meta.outcome;
  j["dt"] = episode.meta.dt;
  j["rows"] = episode.steps.size();
  j["frames"] = episode.frames.size();
  if (episode.meta.safety) j["verdicts"]["safety"] = verdict_json(*episode.meta.safety);
  if (episode.meta.training) j["verdicts"]["training"] = verdict_json(*episode.meta.training);
  if (!episode.meta.extra.empty()) j["extra"] = episode.meta.extra;
  return j;
}

void write_episode(const std::filesystem::path& dir, const Episode& episode) {
  std::filesystem::create_directories(dir / "frames");
  for (std::size_t i = 0; i < episode.frames.size(); ++i) {
    write_png(dir / frame_name(i), episode.frames[i]);
  }
  write_text(dir / "signals.csv", signals_csv(episode));
  write_text(dir / "meta.json", meta_json(episode).dump(2) + "\n");
}

Episode read_episode(const std::filesystem::path& dir, bool load_frames) {
  Episode e;
  const auto meta = nlohmann::json::parse(read_text(dir / "meta.json"));
  if (meta.value("format_version", 0) != 1) {
    throw std::runtime_error("unsupported episode format in " + dir.string());
  }
  e.meta.seed = meta.at("seed").get<std::uint64_t>();
  e.meta.operator_kind = operator_kind_from_string(meta.at("operator").get<std::string>());
  e.meta.outcome = meta.at("outcome").get<std::string>();
  e.meta.dt = meta.at("dt").get<double>();
  if (meta.contains("verdicts")) {
    const auto& v = meta.at("verdicts");
    if (v.contains("safety")) e.meta.safety = verdict_from_json(v.at("safety"));
    if (v.contains("training")) e.meta.training = verdict_from_json(v.at("training"));
  }
  if (meta.contains("extra")) e.meta.extra = meta.at("extra");

  std::istringstream csv(read_text(dir / "signals.csv"));
  std::string line;
  if (!std::getline(csv, line) || line != kSignalsHeader) {
    throw std::runtime_error("bad signals header in " + dir.string());
  }
  std::vector<std::string> frame_refs;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 17) throw std::runtime_error("malformed signals row in " + dir.string());
    auto num = [&](std::size_t i) { return std::stod(cells[i]); };
    EpisodeStep s;
    s.t = num(1);
    s.pose = {num(2), num(3), num(4)};
    s.ee_force = {num(5), num(6), num(7)};
    s.forces = {num(8), num(9), num(10), num(11), num(12)};
    s.action = {num(13), num(14), num(15)};
    e.steps.push_back(s);
    frame_refs.push_back(cells[16]);
  }
  if (e.steps.size() != meta.at("rows").get<std::size_t>()) {
    throw std::runtime_error("row count mismatch in " + dir.string());
  }
  if (load_frames) {
    for (const auto& ref : frame_refs) {
      if (ref.empty()) break;
      e.frames.push_back(read_png(dir / ref));
    }
  }
  return e;
}

std::vector<std::filesystem::path> list_episodes(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(root)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "meta.json")) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace nti::data
