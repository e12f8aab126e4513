#pragma once

// Seeded depth/width sweeps over trained regressors.
//
// Manifest (JSON):
//   name, seed, trials,
//   data:    {generator, params, train_size, test_size}
//   train:   TrainConfig fields shared by every config (shape excluded)
//   configs: [{hidden: [w...], <TrainConfig overrides>}]  and/or
//   grid:    {depths: [L...], widths: [w...], <overrides>} -> hidden = L copies of w
//   grids:   list of grid objects
//   select_by: "mse" (default) or "clean_mse"
//
// Trial t of config c trains on datasets drawn with seeds hashed from
// (seed, t), so every config sees the same data in a given trial, and
// initializes with a seed hashed from (seed, c, t). Results are stored by
// (c, t) index and written in that order; a rerun of the same manifest gives
// byte-identical files regardless of the worker count.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relucraft/erm.hpp"

namespace relucraft::sweep {

struct DataSpec {
  std::string generator;
  nlohmann::json params = nlohmann::json::object();
  std::size_t train_size = 0, test_size = 0;
};

struct Manifest {
  std::string name;
  std::uint64_t seed = 0;
  int trials = 0;
  DataSpec data;
  std::vector<erm::TrainConfig> configs;  // seeds filled in per trial
  std::string select_by = "mse";
  nlohmann::json source;                  // the parsed document
  std::uint64_t hash = 0;                 // of source.dump()

  std::string hash_hex() const;
};

// Throws InvalidInput on a malformed manifest, an unknown generator, or an
// empty trial list (no configs or trials < 1).
Manifest manifest_from_json(const nlohmann::json& j);

std::uint64_t data_seed(const Manifest& m, int trial, bool test);
std::uint64_t train_seed(const Manifest& m, std::size_t config, int trial);

struct TrialResult {
  std::size_t config = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::optional<erm::RunReport> report;  // empty when the trial crashed
  std::string error;
};

struct ConfigSummary {
  std::size_t config = 0;
  int depth = 0;
  std::vector<int> hidden;
  std::size_t completed = 0, valid = 0, diverged = 0;
  metrics::MetricsSummary test;
  std::optional<metrics::MetricsSummary> clean;
  double train_mse_mean = 0.0, train_mse_median = 0.0;
  // Median of the selection metric across completed trials.
  double select_median = 0.0;
};

struct DepthSummary {
  int depth = 0;
  std::size_t best_config = 0;
  double best_select_median = 0.0;
  double valid_rate = 0.0;  // over all trials of all configs at this depth
};

struct SweepResult {
  std::vector<TrialResult> trials;  // config-major
  std::vector<ConfigSummary> configs;
  std::vector<DepthSummary> depths;

  // True when no trial produced a non-diverged run.
  bool divergence_only() const;
};

SweepResult run_sweep(const Manifest& m, int jobs = 1);

// runs.jsonl, summary.csv, by_depth.csv (and manifest.json) under dir.
void write_outputs(const std::filesystem::path& dir, const Manifest& m, const SweepResult& r);

}  // namespace relucraft::sweep
