#pragma once

// Benchmark systems: forcing signals, fixed-step RK4 for the ODE systems,
// a delay-aware RK4 for Mackey-Glass, and the on-disk dataset layout.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lpnet {

enum class ForcingKind { Sigmoid, DecayingSine, Triangular, DecayingSinusoid };

ForcingKind parse_forcing_kind(const std::string& name);
std::string forcing_kind_name(ForcingKind kind);

/// Closed-form excitation x(t).
///
///   sigmoid            A / (1 + exp(-kappa sin(2 pi t / period)))
///   decaying_sine      A exp(-decay t) sin(omega t)
///   triangular         period-P triangle wave of amplitude A, x(0) = 0, peak at P/4
///   decaying_sinusoid  A exp(-decay t) sin(omega t + phase)
struct ForcingSignal {
  ForcingKind kind = ForcingKind::Sigmoid;
  std::map<std::string, double> params;

  double param(const std::string& name) const;
  double operator()(double t) const;
};

double eval_forcing(const ForcingSignal& signal, double t);

using ForcingFn = std::function<double(double)>;

enum class SystemKind { Smd, Duffing, Lorenz, Pendulum, MackeyGlass };

SystemKind parse_system_kind(const std::string& name);
std::string system_kind_name(SystemKind kind);

struct SystemSpec {
  SystemKind system = SystemKind::Smd;
  std::map<std::string, double> params;
  Eigen::VectorXd initial_state;
  int output_index = 0;

  int state_dim() const;
  double param(const std::string& name) const;
  /// Throws ConfigError for missing or out-of-range constants.
  void validate() const;
  /// Right-hand side f(t, state, x) for the ODE systems.
  Eigen::VectorXd rhs(const Eigen::VectorXd& state, double x) const;
};

/// One trajectory split into a history of n_hist and a forecast of n_fore
/// samples. x is (n_hist + n_fore) x D_x, y is (n_hist + n_fore) x D_y.
struct TimeSeriesSample {
  Eigen::VectorXd t;
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
  int n_hist = 0;
  int n_fore = 0;

  Eigen::Index length() const { return t.size(); }
};

/// Full state trajectory on the grid (rows = grid points).
Eigen::MatrixXd integrate_states(const SystemSpec& spec, const ForcingFn& forcing, const Eigen::VectorXd& t_grid,
                                 int substeps = 10);

/// Classical RK4 with `substeps` internal steps per grid interval. The
/// forcing is evaluated at every stage time.
TimeSeriesSample integrate_rk4(const SystemSpec& spec, const ForcingFn& forcing, const Eigen::VectorXd& t_grid,
                               int n_hist, int substeps = 10);

/// Mackey-Glass with delayed state by linear interpolation of the stored
/// substep trajectory; the history on [-tau, 0] equals the initial state.
TimeSeriesSample integrate_dde(const SystemSpec& spec, const ForcingFn& forcing, const Eigen::VectorXd& t_grid,
                               int n_hist, int substeps = 10);

/// Uniform grid t_i = i T / count, i = 0..count-1.
Eigen::VectorXd uniform_grid(double horizon, int count);

/// Deterministic 64-bit seed for (base seed, stream, index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

struct SampleRecord {
  TimeSeriesSample sample;
  ForcingSignal forcing;
  std::uint64_t seed = 0;
};

struct Dataset {
  int id = 0;
  std::string name;
  SystemSpec system;
  std::uint64_t seed = 0;
  double horizon = 0.0;
  int n_hist = 50;
  int n_fore = 500;
  int substeps = 10;
  std::vector<SampleRecord> train, val, test;

  const std::vector<SampleRecord>& split(const std::string& name) const;
  double dt() const { return horizon / static_cast<double>(n_hist + n_fore); }
};

struct DatasetInfo {
  int id;
  std::string name;
  int n_train, n_val, n_test;
  double horizon;
};

/// Sample counts, horizon and name per dataset id 1..8.
DatasetInfo dataset_info(int ds_id);
SystemSpec dataset_system(int ds_id);

Dataset build_dataset(int ds_id, std::uint64_t seed);

/// Writes <root>/ds<id>/manifest.json and one CSV per sample.
/// Returns the dataset directory.
std::string write_dataset(const Dataset& ds, const std::string& root);
/// Reads a dataset directory written by write_dataset.
Dataset read_dataset(const std::string& dir);

/// `t,x,y` CSV with 17 significant digits (columns x_i / y_i when D > 1).
std::string sample_to_csv(const TimeSeriesSample& s);
TimeSeriesSample sample_from_csv(const std::string& text, int n_hist, const std::string& origin = "csv");

}  // namespace lpnet
