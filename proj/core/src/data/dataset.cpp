#include "nti/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <atomic>
#include <optional>
#include <thread>

namespace nti::data {
namespace {

struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  }
  void value(double v) { bytes(&v, sizeof v); }
};

}  // namespace

FrameFeatures extract_features(const Image& frame, int side, const vision::PipelineConfig& config) {
  if (side <= 0 || frame.width % side != 0 || frame.height % side != 0) {
    throw std::invalid_argument("extract_features: frame size not a multiple of the input side");
  }
  const vision::PipelineResult r = vision::run_pipeline(frame, config);
  FrameFeatures f;
  f.side = side;
  f.s_kappa = r.score();
  f.tube_found = r.tube.has_value();
  const int bx = frame.width / side;
  const int by = frame.height / side;
  const int cell = bx * by;
  f.gray.resize(static_cast<std::size_t>(side) * side);
  f.mask.resize(f.gray.size());
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      int g = 0, m = 0;
      for (int dy = 0; dy < by; ++dy) {
        for (int dx = 0; dx < bx; ++dx) {
          g += frame.at(x * bx + dx, y * by + dy);
          m += r.tube_mask.at(x * bx + dx, y * by + dy);
        }
      }
      const std::size_t i = static_cast<std::size_t>(y) * side + x;
      f.gray[i] = static_cast<std::uint8_t>((g + cell / 2) / cell);
      f.mask[i] = static_cast<std::uint8_t>((m * 255 + cell / 2) / cell);
    }
  }
  return f;
}

std::vector<double> image_input(const FrameFeatures& f) {
  const std::size_t cells = f.gray.size();
  std::vector<double> image(2 * cells);
  for (std::size_t c = 0; c < cells; ++c) {
    image[c] = f.gray[c] / 255.0;
    image[cells + c] = f.mask[c] / 255.0;
  }
  return image;
}

std::array<double, kProprioDim> proprio_of(const EpisodeStep& step) {
  return {step.pose.x, step.pose.z, step.pose.theta,
          step.ee_force[0], step.ee_force[1], step.ee_force[2]};
}

FieldStats FieldStats::compute(std::span<const double> rows, std::size_t dim) {
  FieldStats s;
  s.mean.assign(dim, 0.0);
  s.std.assign(dim, 1.0);
  const std::size_t n = rows.size() / dim;
  if (n == 0) return s;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) s.mean[d] += rows[i * dim + d];
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double e = rows[i * dim + d] - s.mean[d];
      var[d] += e * e;
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    const double sd = std::sqrt(var[d] / static_cast<double>(n));
    s.std[d] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

void FieldStats::normalize(std::span<double> values) const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t d = i % mean.size();
    values[i] = (values[i] - mean[d]) / std[d];
  }
}

void FieldStats::denormalize(std::span<double> values) const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t d = i % mean.size();
    values[i] = values[i] * std[d] + mean[d];
  }
}

nlohmann::json FieldStats::to_json() const { return {{"mean", mean}, {"std", std}}; }

FieldStats FieldStats::from_json(const nlohmann::json& j) {
  FieldStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  if (s.mean.size() != s.std.size() || s.mean.empty()) {
    throw std::invalid_argument("stats: mean/std size mismatch");
  }
  return s;
}

nlohmann::json DatasetStats::to_json() const {
  return {{"proprio", proprio.to_json()}, {"action", action.to_json()}, {"s_kappa", s_kappa.to_json()}};
}

DatasetStats DatasetStats::from_json(const nlohmann::json& j) {
  DatasetStats s;
  s.proprio = FieldStats::from_json(j.at("proprio"));
  s.action = FieldStats::from_json(j.at("action"));
  s.s_kappa = FieldStats::from_json(j.at("s_kappa"));
  return s;
}

EpisodeData episode_data(const Episode& episode, const DatasetConfig& config) {
  EpisodeData d;
  const std::size_t n = episode.action_count();
  if (episode.frames.size() < n) throw std::invalid_argument("episode data: frames missing");
  d.frames.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.frames.push_back(extract_features(episode.frames[i], config.image_side, config.vision));
    const auto p = proprio_of(episode.steps[i]);
    d.proprio.insert(d.proprio.end(), p.begin(), p.end());
    const auto& a = episode.steps[i].action;
    d.actions.insert(d.actions.end(), {a.dx, a.dz, a.dtheta});
  }
  return d;
}

Dataset::Dataset(DatasetConfig config, std::vector<EpisodeData> episodes)
    : config_(std::move(config)), episodes_(std::move(episodes)) {
  if (config_.chunk < 1) throw std::invalid_argument("dataset: chunk size must be >= 1");
  std::vector<double> proprio, actions, kappa;
  for (std::size_t e = 0; e < episodes_.size(); ++e) {
    const EpisodeData& d = episodes_[e];
    proprio.insert(proprio.end(), d.proprio.begin(), d.proprio.end());
    actions.insert(actions.end(), d.actions.begin(), d.actions.end());
    for (const auto& f : d.frames) kappa.push_back(f.s_kappa);
    for (std::size_t t = 0; t < d.length(); ++t) index_.emplace_back(e, t);
  }
  if (index_.empty()) throw std::runtime_error("dataset: no action steps");
  stats_.proprio = FieldStats::compute(proprio, kProprioDim);
  stats_.action = FieldStats::compute(actions, kActionDim);
  stats_.s_kappa = FieldStats::compute(kappa, 1);
}

Window Dataset::window(std::size_t i) const {
  const auto [e, t] = index_.at(i);
  const EpisodeData& d = episodes_[e];
  const FrameFeatures& f = d.frames[t];
  Window w;
  w.image = image_input(f);
  w.proprio.assign(d.proprio.begin() + static_cast<std::ptrdiff_t>(t * kProprioDim),
                   d.proprio.begin() + static_cast<std::ptrdiff_t>((t + 1) * kProprioDim));
  stats_.proprio.normalize(w.proprio);
  double kappa = f.s_kappa;
  stats_.s_kappa.normalize(std::span<double>(&kappa, 1));
  w.s_kappa = kappa;
  const auto k = static_cast<std::size_t>(config_.chunk);
  w.actions.resize(k * kActionDim);
  w.pad.assign(k, 0);
  const std::size_t len = d.length();
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = std::min(t + j, len - 1);
    if (t + j >= len) w.pad[j] = 1;
    for (std::size_t a = 0; a < kActionDim; ++a) {
      w.actions[j * kActionDim + a] = d.actions[src * kActionDim + a];
    }
  }
  stats_.action.normalize(w.actions);
  return w;
}

std::uint64_t Dataset::fingerprint() const {
  Fnv h;
  const auto chunk = static_cast<std::int64_t>(config_.chunk);
  h.bytes(&chunk, sizeof chunk);
  for (const EpisodeData& d : episodes_) {
    const std::uint64_t n = d.length();
    h.bytes(&n, sizeof n);
    for (double v : d.proprio) h.value(v);
    for (double v : d.actions) h.value(v);
    for (const auto& f : d.frames) {
      h.bytes(f.gray.data(), f.gray.size());
      h.bytes(f.mask.data(), f.mask.size());
      h.value(f.s_kappa);
    }
  }
  for (const FieldStats* s : {&stats_.proprio, &stats_.action, &stats_.s_kappa}) {
    for (double v : s->mean) h.value(v);
    for (double v : s->std) h.value(v);
  }
  return h.h;
}

DatasetBuild build_dataset(const std::vector<std::filesystem::path>& episode_dirs,
                           const DatasetConfig& config) {
  config.filter.validate();
  std::vector<std::optional<EpisodeData>> loaded(episode_dirs.size());
  std::vector<std::exception_ptr> errors(episode_dirs.size());
  auto work = [&](std::size_t i) {
    try {
      const Episode ep = read_episode(episode_dirs[i], true);
      const Verdict v = filter_episode(compute_metrics(ep, config.filter), config.filter,
                                       FilterMode::kTraining);
      if (!v.accept || ep.action_count() == 0) return;
      EpisodeData d = episode_data(ep, config);
      d.source = episode_dirs[i];
      loaded[i] = std::move(d);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), 8));
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < episode_dirs.size(); i = next++) work(i);
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<EpisodeData> kept;
  std::vector<std::filesystem::path> accepted, rejected;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    if (loaded[i]) {
      kept.push_back(std::move(*loaded[i]));
      accepted.push_back(episode_dirs[i]);
    } else {
      rejected.push_back(episode_dirs[i]);
    }
  }
  if (kept.empty()) throw std::runtime_error("build_dataset: no episode passes the training filter");
  return DatasetBuild{Dataset(config, std::move(kept)), std::move(accepted), std::move(rejected)};
}

void write_stats(const std::filesystem::path& path, const DatasetStats& stats) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << stats.to_json().dump(2) << "\n";
}

DatasetStats read_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return DatasetStats::from_json(nlohmann::json::parse(in));
}

}  // namespace nti::data
