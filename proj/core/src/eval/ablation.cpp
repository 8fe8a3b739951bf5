#include "nti/eval/ablation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace nti::eval {

namespace fs = std::filesystem;

void AblationConfig::validate() const {
  if (variants.empty()) throw std::invalid_argument("ablation: no variants");
  if (seeds.empty()) throw std::invalid_argument("ablation: no seeds");
  if (n_eval < 1) throw std::invalid_argument("ablation: n_eval must be >= 1");
  if (threads < 0) throw std::invalid_argument("ablation: threads must be >= 0");
  hp.validate();
}

nlohmann::json AblationConfig::to_json() const {
  nlohmann::json v = nlohmann::json::array();
  for (policy::Variant x : variants) v.push_back(policy::to_string(x));
  return {{"variants", v},
          {"seeds", seeds},
          {"n_eval", n_eval},
          {"eval_seed_base", eval_seed_base},
          {"hyperparameters", hp.to_json()},
          {"max_steps", rollout.max_steps},
          {"limits", rollout.limits.to_json()},
          {"threads", threads}};
}

AblationConfig AblationConfig::from_json(const nlohmann::json& j) {
  AblationConfig c;
  if (j.contains("variants")) {
    c.variants.clear();
    for (const auto& v : j.at("variants")) c.variants.push_back(policy::variant_from_string(v));
  }
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.n_eval = j.value("n_eval", c.n_eval);
  c.eval_seed_base = j.value("eval_seed_base", c.eval_seed_base);
  if (j.contains("hyperparameters")) c.hp = policy::HyperParams::from_json(j.at("hyperparameters"));
  c.rollout.max_steps = j.value("max_steps", c.rollout.max_steps);
  if (j.contains("limits")) c.rollout.limits = data::FilterConfig::from_json(j.at("limits"));
  c.threads = j.value("threads", c.threads);
  c.validate();
  return c;
}

std::optional<double> CellResult::max_channel_peak() const {
  const auto p = metrics.max_peak();
  return p ? std::optional<double>(p->first) : std::nullopt;
}

nlohmann::json CellResult::audit() const {
  const policy::VariantFlags f = policy::flags_of(variant);
  return {{"variant", policy::to_string(variant)},
          {"confidence_head", f.confidence},
          {"recurrent_decoder", f.recurrent},
          {"seed", seed},
          {"dataset_fingerprint", fmt::format("{:016x}", dataset_fingerprint)}};
}

std::vector<const CellResult*> AblationResult::cells_of(policy::Variant v) const {
  std::vector<const CellResult*> out;
  for (const CellResult& c : cells) {
    if (c.variant == v) out.push_back(&c);
  }
  return out;
}

namespace {

std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string cell_name(const CellResult& c) {
  return fmt::format("{}_seed{}", policy::to_string(c.variant), c.seed);
}

CellResult run_cell(const data::Dataset& dataset, const sim::Simulator& sim,
                    const AblationConfig& config, policy::Variant variant, std::uint64_t seed,
                    std::uint64_t expected_fingerprint) {
  const auto start = std::chrono::steady_clock::now();
  CellResult cell;
  cell.variant = variant;
  cell.seed = seed;
  cell.dataset_fingerprint = dataset.fingerprint();
  if (cell.dataset_fingerprint != expected_fingerprint) {
    throw std::runtime_error("ablation: dataset changed between cells");
  }
  policy::Model model(config.hp, variant, seed);
  policy::Trainer trainer(model, dataset, seed);
  cell.train = trainer.run(config.hp.training_steps, 10);

  policy::PolicyBundle bundle{std::move(model), dataset.stats(), cell.audit()};
  for (int i = 0; i < config.n_eval; ++i) {
    cell.episodes.push_back(rollout_policy(sim, bundle, config.eval_seed_base + i,
                                           config.rollout, config.vision));
  }
  cell.metrics = aggregate(cell_name(cell), cell.episodes, config.rollout.limits);

  if (!config.out_dir.empty()) {
    const fs::path dir = config.out_dir / "cells" / cell_name(cell);
    fs::create_directories(dir);
    policy::save_policy(dir / "policy.ckpt", bundle.model, dataset.stats(), cell.audit());
    write_text(dir / "train_curve.csv", policy::train_curve_csv(cell.train));
    for (std::size_t i = 0; i < cell.episodes.size(); ++i) {
      data::write_episode(dir / "episodes" / fmt::format("eval_{:04d}", i), cell.episodes[i]);
    }
  }
  cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return cell;
}

}  // namespace

std::optional<double> AblationResult::median_success(policy::Variant v) const {
  std::vector<double> values;
  for (const CellResult* c : cells_of(v)) values.push_back(c->metrics.success_rate);
  return median(values);
}

std::optional<double> AblationResult::median_max_peak(policy::Variant v) const {
  std::vector<double> values;
  for (const CellResult* c : cells_of(v)) {
    if (const auto p = c->max_channel_peak()) values.push_back(*p);
  }
  return median(values);
}

AblationResult run_ablation(const data::Dataset& dataset, const sim::Simulator& sim,
                            const AblationConfig& config, const AblationProgress& progress) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  AblationResult result;
  result.dataset_fingerprint = dataset.fingerprint();

  std::vector<std::pair<policy::Variant, std::uint64_t>> jobs;
  for (policy::Variant v : config.variants) {
    for (std::uint64_t s : config.seeds) jobs.emplace_back(v, s);
  }
  result.cells.resize(jobs.size());

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(jobs.size(), config.threads > 0 ? config.threads : hw);
  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  std::exception_ptr failure;
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        result.cells[i] = run_cell(dataset, sim, config, jobs[i].first, jobs[i].second,
                                   result.dataset_fingerprint);
        if (progress) {
          std::lock_guard lock(report_mutex);
          progress(result.cells[i]);
        }
      } catch (...) {
        std::lock_guard lock(report_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  for (policy::Variant v : config.variants) {
    std::vector<data::Episode> pooled;
    for (const CellResult* c : result.cells_of(v)) {
      pooled.insert(pooled.end(), c->episodes.begin(), c->episodes.end());
    }
    result.table.rows.push_back(aggregate(policy::to_string(v), pooled, config.rollout.limits));
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void write_ablation_report(const fs::path& dir, const AblationResult& result,
                           const AblationConfig& config) {
  fs::create_directories(dir);
  std::optional<PeakComparison> cmp;
  if (result.table.find("RACCT") && result.table.find("ACT")) cmp = PeakComparison{"RACCT", "ACT"};
  write_text(dir / "table.txt", render_text(result.table, cmp));
  write_text(dir / "table.csv", render_csv(result.table));
  write_text(dir / "radar.csv", render_radar_csv(result.table));

  nlohmann::json cells = nlohmann::json::array();
  for (const CellResult& c : result.cells) {
    nlohmann::json j = c.audit();
    j["success_rate"] = c.metrics.success_rate;
    j["max_channel_peak"] = c.max_channel_peak() ? nlohmann::json(*c.max_channel_peak()) : nlohmann::json();
    j["diverged"] = c.train.diverged;
    j["train_error"] = c.train.error;
    j["train_seconds"] = c.train.seconds;
    j["final_loss"] = c.train.curve.empty() ? nlohmann::json() : nlohmann::json(c.train.curve.back().loss);
    j["seconds"] = c.seconds;
    cells.push_back(j);
  }
  nlohmann::json summary{{"config", config.to_json()},
                         {"dataset_fingerprint", fmt::format("{:016x}", result.dataset_fingerprint)},
                         {"seconds", result.seconds},
                         {"cells", cells}};
  nlohmann::json medians = nlohmann::json::object();
  for (policy::Variant v : config.variants) {
    const auto s = result.median_success(v);
    const auto p = result.median_max_peak(v);
    medians[policy::to_string(v)] = {{"median_success", s ? nlohmann::json(*s) : nlohmann::json()},
                                     {"median_max_peak", p ? nlohmann::json(*p) : nlohmann::json()}};
  }
  summary["medians"] = medians;
  write_text(dir / "cells.json", summary.dump(2) + "\n");
}

}  // namespace nti::eval
