#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lpnet/model.hpp"
#include "lpnet/oracles.hpp"
#include "lpnet/training.hpp"

using namespace lpnet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LPNET_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lpnet_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Outcome corpus_at_64() {
  IltConfig cfg;
  cfg.n_ilt = 64;
  const auto start = Clock::now();
  const auto results = check_transform_pairs(cfg, 1e-3);
  const double secs = seconds_since(start);
  double worst = 0.0;
  for (const auto& r : results) worst = std::max(worst, r.error);
  return {worst < 1e-3 && secs < 1.0, "max abs error " + fmt("%.3e", worst) + " (< 1e-3), " + fmt("%.3f", secs) + " s"};
}

Outcome prescaled_equivalence() {
  const auto start = Clock::now();
  const auto results = check_prescaled_equivalence(IltConfig{}, 1e-10);
  const double secs = seconds_since(start);
  double worst = 0.0;
  for (const auto& r : results) worst = std::max(worst, r.error);
  return {worst < 1e-10 && secs < 1.0, "max rel difference " + fmt("%.3e", worst) + " (< 1e-10), " + fmt("%.3f", secs) + " s"};
}

Outcome smd_oracle() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::string detail;
  for (ForcingKind kind : {ForcingKind::Sigmoid, ForcingKind::DecayingSine, ForcingKind::Triangular}) {
    const double rmse = smd_pipeline_rmse(smd_oracle_forcing(kind), oracle_ilt_config());
    worst = std::max(worst, rmse);
    detail += forcing_kind_name(kind) + " " + fmt("%.3e", rmse) + ", ";
  }
  const double secs = seconds_since(start);
  return {worst < 1e-2 && secs < 10.0, "RMSE " + detail + "(< 1e-2), " + fmt("%.2f", secs) + " s"};
}

Outcome gradient_check() {
  const auto start = Clock::now();
  RunConfig run = preset_config(1);
  LpNetConfig cfg = run.model;
  cfg.q = 1;
  const Dataset ds = build_dataset(1, 1);
  std::vector<TimeSeriesSample> samples;
  for (int i = 0; i < 2; ++i) {
    const TimeSeriesSample& s = ds.train[static_cast<std::size_t>(i)].sample;
    TimeSeriesSample w;
    const int len = s.n_hist + 10;
    w.t = s.t.head(len);
    w.x = s.x.topRows(len);
    w.y = s.y.topRows(len);
    w.n_hist = s.n_hist;
    w.n_fore = 10;
    samples.push_back(w);
  }
  const auto batch = prepare_batch<double>(cfg, {&samples[0], &samples[1]});
  LpNet<double> net(cfg);
  ad::ParameterSet<double> params;
  net.declare(params);
  std::mt19937_64 init(3);
  net.initialize(params, init);
  std::mt19937_64 rng(11);
  const auto r = ad::grad_check_parameters(
      [&](ad::Tape<double>& tape) {
        auto pred = net.forecast_window(tape, params, batch, 0, tape.constant(batch.y_hist));
        return ad::mean(ad::square(ad::add_const(pred, Eigen::MatrixXd(-batch.y_fore))));
      },
      params, 1e-6, 400, rng);
  const double secs = seconds_since(start);
  return {r.max_rel_error < 1e-4 && r.checked > 0 && secs < 30.0,
          std::to_string(r.checked) + " coordinates, max rel error " + fmt("%.3e", r.max_rel_error) + " (< 1e-4), " +
              fmt("%.2f", secs) + " s"};
}

double last_value_mse(const std::vector<SampleRecord>& split) {
  double sq = 0.0;
  long n = 0;
  for (const auto& rec : split) {
    const auto& s = rec.sample;
    const Eigen::RowVectorXd last = s.y.row(s.n_hist - 1);
    for (int i = s.n_hist; i < s.n_hist + s.n_fore; ++i) {
      sq += (s.y.row(i) - last).squaredNorm();
      n += s.y.cols();
    }
  }
  return sq / static_cast<double>(n);
}

struct SeedRuns {
  std::vector<double> test;
  double max_seconds = 0.0;
};

// Epoch budgets sized so one seed fits in 30 minutes on one core.
SeedRuns train_preset(int ds_id, int seeds, int epochs) {
  RunConfig cfg = preset_config(ds_id);
  cfg.epochs = epochs;
  cfg.seeds.clear();
  for (int s = 1; s <= seeds; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  const fs::path out = scratch("ds" + std::to_string(ds_id));
  const auto summary = train_seeds(cfg, out.string());
  SeedRuns r;
  for (const auto& run : summary.at("runs")) {
    r.test.push_back(run.at("test_mse").get<double>());
    r.max_seconds = std::max(r.max_seconds, run.at("wall_clock_s").get<double>());
    std::printf("  ds%d seed %d test_mse %.6e (%.0f s)\n", ds_id, run.at("seed").get<int>(),
                run.at("test_mse").get<double>(), run.at("wall_clock_s").get<double>());
  }
  std::fflush(stdout);
  fs::remove_all(out);
  return r;
}

Outcome ds1_training() {
  const SeedRuns r = train_preset(1, 6, 600);
  const double median = summarize(r.test).median;
  return {median <= 1e-2 && r.max_seconds <= 1800.0,
          "median test MSE " + fmt("%.3e", median) + " over 6 seeds (<= 1e-2), slowest seed " +
              fmt("%.0f", r.max_seconds) + " s (<= 1800)"};
}

Outcome ds8_training() {
  const double baseline = last_value_mse(build_dataset(8, preset_config(8).data_seed).test);
  const SeedRuns r = train_preset(8, 6, 3000);
  const double model = summarize(r.test).median;
  return {model * 5.0 <= baseline && r.max_seconds <= 1800.0,
          "median test MSE over 6 seeds " + fmt("%.3e", model) + " vs last-value " + fmt("%.3e", baseline) + ", ratio " +
              fmt("%.2f", baseline / model) + " (>= 5), " + fmt("%.0f", r.max_seconds) + " s (<= 1800)"};
}

Outcome dde_delay() {
  const auto start = Clock::now();
  const PulseOnset p = dde_pulse_onset();
  const double secs = seconds_since(start);
  const double off = std::abs(p.measured - p.expected);
  return {off <= p.dt && secs < 5.0, "onset " + fmt("%.4f", p.measured) + " expected " + fmt("%.4f", p.expected) +
                                         ", |diff| " + fmt("%.4f", off) + " (<= dt " + fmt("%.4f", p.dt) + "), " +
                                         fmt("%.2f", secs) + " s"};
}

Outcome determinism() {
  const fs::path dir = scratch("determinism");
  std::string bad;
  int compared = 0;
  for (const char* run : {"a", "b"}) {
    const fs::path root = dir / run;
    if (run_cli("generate --dataset 1 --seed 7 --out " + root.string()) != 0) bad = "generate failed";
    nlohmann::json cfg = {{"dataset", 1}, {"data_dir", (root / "ds1").string()}, {"epochs", 3}};
    std::ofstream(root / "run.json") << cfg.dump();
    if (run_cli("train --config " + (root / "run.json").string() + " --seeds 1,2 --out " + (root / "out").string()) != 0)
      bad = "train failed";
  }
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    const std::string ext = e.path().extension().string();
    const std::string name = e.path().filename().string();
    if (ext != ".csv" && name != "manifest.json") continue;
    const fs::path other = dir / "b" / fs::relative(e.path(), dir / "a");
    ++compared;
    if (read_file(e.path()) != read_file(other)) bad = "differs: " + fs::relative(e.path(), dir / "a").string();
  }
  fs::remove_all(dir);
  if (compared < 33 && bad.empty()) bad = "only " + std::to_string(compared) + " files compared";
  return {bad.empty(), bad.empty() ? std::to_string(compared) + " dataset and metrics files byte-identical" : bad};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> which;
  app.add_option("--criterion", which, "criteria to run (default: all)")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);
  if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8};

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"transform-pair corpus, N_ILT = 64", corpus_at_64}},
      {2, {"prescaled and unscaled ILT agree", prescaled_equivalence}},
      {3, {"analytic-H SMD pipeline vs RK4", smd_oracle}},
      {4, {"gradient check on a 10-point window", gradient_check}},
      {5, {"DS1 training, 6 seeds", ds1_training}},
      {6, {"DS8, 6 seeds, beats last-value baseline by 5x", ds8_training}},
      {7, {"DDE pulse onset at t0 + tau", dde_delay}},
      {8, {"generate + train determinism", determinism}},
  };
  int failed = 0;
  for (int id : which) {
    const auto& [label, check] = criteria.at(id);
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("C%d %s %s: %s\n", id, o.pass ? "PASS" : "FAIL", label.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
