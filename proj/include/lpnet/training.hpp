#pragma once

// Training harness: run configuration, full-batch Adam training with
// best-validation checkpointing, evaluation and multi-seed summaries.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "lpnet/model.hpp"
#include "lpnet/systems.hpp"

namespace lpnet {

struct RunConfig {
  int dataset_id = 1;
  std::string data_dir;  // dataset directory written by `generate`; empty = regenerate in memory
  std::uint64_t data_seed = 1;
  LpNetConfig model;
  double lr = 4.4e-3;
  int epochs = 2000;
  std::vector<std::uint64_t> seeds{0};
  int chunk = 2;          // samples per gradient chunk
  double clip_norm = 1.0;

  void validate() const;
};

/// Hyperparameter row tuned for dataset 1..8.
RunConfig preset_config(int dataset_id);

nlohmann::json run_config_to_json(const RunConfig& cfg);
/// Starts from the preset of `dataset` (default 1) and overrides the given
/// keys. Unknown keys and bad values throw ConfigError naming the field.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

/// Mean of squared differences. Throws ShapeError on mismatch.
double mse(const Eigen::Ref<const Eigen::MatrixXd>& pred, const Eigen::Ref<const Eigen::MatrixXd>& target);

struct EpochMetrics {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct Metrics {
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> curve;  // epoch e = state after e optimizer steps
  int best_epoch = 0;
  double best_val_mse = 0.0;
  double test_mse = 0.0;
  double wall_clock_s = 0.0;
};

struct TrainResult {
  Metrics metrics;
  ad::ParameterSet<double> best_params;
};

/// Dataset from cfg.data_dir, or built in memory from (dataset_id, data_seed).
Dataset load_run_dataset(const RunConfig& cfg);

/// Trains one seed. Row e of the curve is the state after e steps; the
/// parameters with the lowest validation MSE are kept and evaluated on the
/// test split. Throws NumericError naming the epoch if the loss turns
/// non-finite.
TrainResult train_run(const RunConfig& cfg, const Dataset& ds, std::uint64_t seed, bool verbose = false);

/// Forward-only MSE of `params` on one split, using the same chunking and
/// precision as training.
double evaluate(const RunConfig& cfg, const ad::ParameterSet<double>& params, const std::vector<SampleRecord>& split);

/// Zero-initialized parameters (every weight and bias 0).
ad::ParameterSet<double> zero_parameters(const LpNetConfig& cfg);

/// Writes <dir>/metrics.csv, <dir>/summary.json and <dir>/model.ckpt(+sidecar).
void write_run(const RunConfig& cfg, const TrainResult& result, const std::string& dir);

std::string metrics_csv(const Metrics& m);
nlohmann::json metrics_summary(const Metrics& m);

struct SeedSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1), 0 for one seed
  double median = 0.0;
};

SeedSummary summarize(const std::vector<double>& values);

/// Trains every seed of cfg into <out>/seed_<s>/ and writes <out>/summary.json
/// with per-seed test MSE and mean, std and median.
nlohmann::json train_seeds(const RunConfig& cfg, const std::string& out, bool verbose = false);

}  // namespace lpnet
