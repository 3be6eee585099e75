#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "lpnet/error.hpp"
#include "lpnet/training.hpp"

using namespace lpnet;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config() {
  RunConfig c = preset_config(1);
  c.model.ilt.n_ilt = 8;
  c.model.enc_width = 8;
  c.model.enc_layers = 1;
  c.model.latent_dim = 4;
  c.model.h_width = 8;
  c.model.h_layers = 1;
  c.epochs = 3;
  c.seeds = {1};
  c.chunk = 4;
  return c;
}

const Dataset& smd_data() {
  static const Dataset ds = build_dataset(1, 1);
  return ds;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lpnet_training_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Mse, Examples) {
  Eigen::MatrixXd a(1, 2), b(1, 2);
  a << 0.0, 2.0;
  b << 1.0, 0.0;
  EXPECT_DOUBLE_EQ(mse(a, b), 2.5);
  EXPECT_DOUBLE_EQ(mse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(mse(a.array() + 1.0, a), 1.0);
  EXPECT_THROW(mse(a, Eigen::MatrixXd::Zero(2, 1)), ShapeError);
}

TEST(RunConfigJson, PresetsAndRoundTrip) {
  const RunConfig r1 = preset_config(1);
  EXPECT_EQ(r1.model.lp_type, LpType::Dlt);
  EXPECT_DOUBLE_EQ(r1.model.ilt.alpha, 4.51e-3);
  EXPECT_DOUBLE_EQ(r1.model.ilt.zeta, 2.0);
  EXPECT_DOUBLE_EQ(r1.model.ilt.c_shift, 2.7);
  EXPECT_EQ(r1.model.ilt.n_ilt, 41);
  EXPECT_EQ(r1.model.enc_width, 56);
  EXPECT_EQ(r1.model.kappa_h, 450.0);
  EXPECT_DOUBLE_EQ(r1.lr, 4.4e-3);
  EXPECT_EQ(r1.model.q, 3);
  EXPECT_EQ(r1.model.h_width, 192);
  EXPECT_DOUBLE_EQ(r1.model.ilt.epsilon, 1e-3);
  const RunConfig r8 = preset_config(8);
  EXPECT_EQ(r8.model.lp_type, LpType::Fflt);
  EXPECT_EQ(r8.model.q, 10);
  EXPECT_EQ(r8.model.h_activation, ad::Activation::Silu);
  EXPECT_DOUBLE_EQ(r8.lr, 5.88e-3);

  RunConfig c = tiny_config();
  c.seeds = {3, 4, 5};
  const RunConfig back = run_config_from_json(run_config_to_json(c));
  EXPECT_EQ(run_config_to_json(back), run_config_to_json(c));

  // Keys not given come from the dataset's preset.
  const RunConfig partial = run_config_from_json({{"dataset", 8}, {"epochs", 5}});
  EXPECT_EQ(partial.model.ilt.n_ilt, 79);
  EXPECT_EQ(partial.epochs, 5);
}

TEST(RunConfigJson, ErrorsNameTheField) {
  auto message = [](const nlohmann::json& j) {
    try {
      run_config_from_json(j);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message({{"learning_rate", 0.1}}).find("learning_rate"), std::string::npos);
  EXPECT_NE(message({{"lr", -1.0}}).find("lr"), std::string::npos);
  EXPECT_NE(message({{"dataset", 9}}).find("dataset"), std::string::npos);
  EXPECT_NE(message({{"q", 0}}).find("q"), std::string::npos);
  EXPECT_NE(message({{"epochs", "many"}}).find("epochs"), std::string::npos);
}

TEST(Summary, MeanStdMedian) {
  const std::vector<double> v{1.0, 4.0, 2.0, 3.0};
  const SeedSummary s = summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(summarize({7.0}).std, 0.0);
  EXPECT_DOUBLE_EQ(summarize({3.0, 1.0, 2.0}).median, 2.0);
}

TEST(Train, ZeroEpochsRecordsOnlyInitialState) {
  RunConfig cfg = tiny_config();
  cfg.epochs = 0;
  const TrainResult r = train_run(cfg, smd_data(), 1);
  ASSERT_EQ(r.metrics.curve.size(), 1u);
  EXPECT_EQ(r.metrics.curve[0].epoch, 0);
  EXPECT_EQ(r.metrics.best_epoch, 0);
  EXPECT_TRUE(std::isfinite(r.metrics.test_mse));
}

TEST(Train, DeterministicAndBookkeeping) {
  const RunConfig cfg = tiny_config();
  const TrainResult a = train_run(cfg, smd_data(), 5);
  const TrainResult b = train_run(cfg, smd_data(), 5);
  EXPECT_EQ(metrics_csv(a.metrics), metrics_csv(b.metrics));
  EXPECT_EQ(a.metrics.test_mse, b.metrics.test_mse);
  ASSERT_EQ(a.metrics.curve.size(), static_cast<std::size_t>(cfg.epochs + 1));

  const double val = evaluate(cfg, a.best_params, smd_data().val);
  EXPECT_EQ(val, a.metrics.best_val_mse);
  EXPECT_EQ(val, a.metrics.curve[static_cast<std::size_t>(a.metrics.best_epoch)].val_mse);
  EXPECT_EQ(evaluate(cfg, a.best_params, smd_data().test), a.metrics.test_mse);
  EXPECT_EQ(evaluate(cfg, a.best_params, smd_data().test), evaluate(cfg, a.best_params, smd_data().test));

  const TrainResult c = train_run(cfg, smd_data(), 6);
  EXPECT_NE(metrics_csv(a.metrics), metrics_csv(c.metrics));
}

TEST(Train, LossDecreasesOnSmd) {
  RunConfig cfg = tiny_config();
  cfg.epochs = 40;
  const TrainResult r = train_run(cfg, smd_data(), 2);
  EXPECT_LT(r.metrics.curve.back().train_mse, r.metrics.curve.front().train_mse);
}

TEST(Train, NonFiniteLossReportsEpoch) {
  Dataset ds = smd_data();
  ds.train[0].sample.y(ds.train[0].sample.n_hist + 3, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    train_run(tiny_config(), ds, 1);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos);
  }
}

TEST(Evaluate, ZeroModelGivesMeanSquaredTarget) {
  const RunConfig cfg = tiny_config();
  const auto& split = smd_data().test;
  double sq = 0.0;
  long n = 0;
  for (const auto& rec : split) {
    const auto y = rec.sample.y.col(0).tail(rec.sample.n_fore);
    sq += y.squaredNorm();
    n += y.size();
  }
  // Targets are held in single precision during evaluation.
  EXPECT_NEAR(evaluate(cfg, zero_parameters(cfg.model), split), sq / static_cast<double>(n), 1e-6 * sq / n);
}

TEST(Evaluate, CheckpointRoundTripIsExact) {
  const RunConfig cfg = tiny_config();
  const TrainResult r = train_run(cfg, smd_data(), 9);
  const fs::path dir = scratch("roundtrip");
  write_run(cfg, r, dir.string());
  EXPECT_TRUE(fs::exists(dir / "metrics.csv"));
  EXPECT_EQ(read_file(dir / "metrics.csv").substr(0, 23), "epoch,train_mse,val_mse");
  const auto summary = nlohmann::json::parse(read_file(dir / "summary.json"));
  for (const char* key : {"test_mse", "seed", "wall_clock_s"}) EXPECT_TRUE(summary.contains(key)) << key;

  auto [model, params] = load_model((dir / "model.ckpt").string(), &cfg.model);
  EXPECT_EQ(evaluate(cfg, params, smd_data().test), r.metrics.test_mse);

  RunConfig other = cfg;
  other.model.p_degree = 2;
  EXPECT_THROW(load_model((dir / "model.ckpt").string(), &other.model), DataError);
  fs::remove_all(dir);
}

TEST(Seeds, SummaryMatchesPerSeedRuns) {
  RunConfig cfg = tiny_config();
  cfg.epochs = 1;
  cfg.seeds = {1, 2};
  const fs::path out = scratch("seeds");
  const auto summary = train_seeds(cfg, out.string());
  ASSERT_EQ(summary.at("runs").size(), 2u);
  std::vector<double> test;
  for (std::uint64_t s : cfg.seeds) {
    const fs::path dir = out / ("seed_" + std::to_string(s));
    EXPECT_TRUE(fs::exists(dir / "model.ckpt"));
    test.push_back(nlohmann::json::parse(read_file(dir / "summary.json")).at("test_mse").get<double>());
  }
  const double mean = 0.5 * (test[0] + test[1]);
  EXPECT_DOUBLE_EQ(summary.at("test_mse_mean").get<double>(), mean);
  EXPECT_NEAR(summary.at("test_mse_std").get<double>(), std::abs(test[0] - test[1]) / std::sqrt(2.0), 1e-12 * mean);
  EXPECT_TRUE(fs::exists(out / "summary.json"));
  fs::remove_all(out);
}

TEST(Seeds, MissingDatasetNamesPath) {
  RunConfig cfg = tiny_config();
  cfg.data_dir = "/nonexistent/lpnet/ds1";
  try {
    load_run_dataset(cfg);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/lpnet/ds1"), std::string::npos);
  }
}
