#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nti/eval/report.hpp"
#include "nti/eval/rollout.hpp"

namespace nti::eval {

struct AblationConfig {
  std::vector<policy::Variant> variants{policy::Variant::kAct, policy::Variant::kRacct};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int n_eval = 20;
  std::uint64_t eval_seed_base = 100000;  // evaluation rollouts use eval_seed_base + i
  policy::HyperParams hp = policy::HyperParams::desk();
  RolloutConfig rollout{.max_steps = 400, .limits = {}, .record_frames = false};
  vision::PipelineConfig vision;
  int threads = 0;                        // 0: hardware concurrency
  std::filesystem::path out_dir;          // empty: nothing persisted

  void validate() const;
  nlohmann::json to_json() const;
  static AblationConfig from_json(const nlohmann::json& j);
};

struct CellResult {
  policy::Variant variant = policy::Variant::kAct;
  std::uint64_t seed = 0;
  std::uint64_t dataset_fingerprint = 0;
  policy::TrainReport train;
  MetricsRow metrics;
  std::vector<data::Episode> episodes;
  double seconds = 0.0;

  // Largest per-channel mean peak over successful episodes, if any.
  std::optional<double> max_channel_peak() const;
  nlohmann::json audit() const;  // variant flags, seed, hyperparameters, dataset hash
};

struct AblationResult {
  std::vector<CellResult> cells;   // variant-major, seeds in configuration order
  MetricsTable table;              // one row per variant, episodes pooled over seeds
  std::uint64_t dataset_fingerprint = 0;
  double seconds = 0.0;

  std::vector<const CellResult*> cells_of(policy::Variant v) const;
  // Median over seeds of a per-cell quantity; cells where it is absent are skipped.
  std::optional<double> median_success(policy::Variant v) const;
  std::optional<double> median_max_peak(policy::Variant v) const;
};

using AblationProgress = std::function<void(const CellResult&)>;

// Trains every (variant, seed) cell on the same dataset and evaluates n_eval rollouts each.
// Divergence is recorded in the cell's training report; its rollouts still run.
AblationResult run_ablation(const data::Dataset& dataset, const sim::Simulator& sim,
                            const AblationConfig& config, const AblationProgress& progress = {});

// table.txt, table.csv, radar.csv, cells.json under `dir`.
void write_ablation_report(const std::filesystem::path& dir, const AblationResult& result,
                           const AblationConfig& config);

}  // namespace nti::eval
