#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "lpnet/error.hpp"
#include "lpnet/systems.hpp"

using namespace lpnet;
using std::numbers::pi;

namespace {

SystemSpec smd() { return dataset_system(1); }

ForcingFn constant(double v) {
  return [v](double) { return v; };
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Forcing, ClosedForms) {
  ForcingSignal ds{ForcingKind::DecayingSinusoid, {{"amplitude", 1.0}, {"omega", 2.0}, {"decay", 0.1}, {"phase", 0.0}}};
  EXPECT_EQ(eval_forcing(ds, 0.0), 0.0);
  ForcingSignal tri{ForcingKind::Triangular, {{"amplitude", 1.0}, {"period", 4.0}}};
  EXPECT_NEAR(eval_forcing(tri, 1.0), 1.0, 1e-15);
  EXPECT_NEAR(eval_forcing(tri, 0.0), 0.0, 1e-15);
  EXPECT_NEAR(eval_forcing(tri, 3.0), -1.0, 1e-15);
  ForcingSignal sig{ForcingKind::Sigmoid, {{"amplitude", 2.0}, {"period", 4.0}, {"kappa", 3.0}}};
  EXPECT_NEAR(eval_forcing(sig, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(eval_forcing(sig, 2.0), 1.0, 1e-12);
  EXPECT_THROW(parse_forcing_kind("square"), ConfigError);
  EXPECT_THROW(eval_forcing(sig, -1.0), DomainError);
}

TEST(Rk4, SmdAtRestStaysAtRest) {
  const TimeSeriesSample s = integrate_rk4(smd(), constant(0.0), uniform_grid(20.0, 550), 50);
  EXPECT_EQ(s.y.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.n_hist, 50);
  EXPECT_EQ(s.n_fore, 500);
}

TEST(Rk4, SmdStaticGain) {
  const TimeSeriesSample s = integrate_rk4(smd(), constant(1.0), uniform_grid(60.0, 600), 50);
  EXPECT_NEAR(s.y(s.length() - 1, 0), 0.2, 1e-5);
}

TEST(Rk4, LorenzConvergesToFixedPoint) {
  SystemSpec lz = dataset_system(4);
  const Eigen::MatrixXd states = integrate_states(lz, constant(0.0), uniform_grid(40.0, 2000));
  EXPECT_NEAR(states(states.rows() - 1, 2), 4.0, 1e-3);
  EXPECT_NEAR(std::abs(states(states.rows() - 1, 1)), std::sqrt(8.0 / 3.0 * 4.0), 1e-3);
}

TEST(Rk4, FourthOrderConvergence) {
  const SystemSpec spec = smd();
  ForcingFn f = [](double t) { return std::sin(1.3 * t) + 0.5 * std::cos(0.4 * t); };
  const Eigen::VectorXd grid = uniform_grid(20.0, 40);
  const Eigen::VectorXd ref = integrate_rk4(spec, f, grid, 5, 64).y.col(0);
  const double e1 = (integrate_rk4(spec, f, grid, 5, 4).y.col(0) - ref).cwiseAbs().maxCoeff();
  const double e2 = (integrate_rk4(spec, f, grid, 5, 8).y.col(0) - ref).cwiseAbs().maxCoeff();
  const double ratio = e1 / e2;
  EXPECT_GE(ratio, 8.0);
  EXPECT_LE(ratio, 32.0);
}

TEST(Rk4, UndampedPendulumConservesEnergy) {
  SystemSpec p = dataset_system(6);
  p.initial_state << 0.1, 0.0;
  const Eigen::MatrixXd s = integrate_states(p, constant(0.0), uniform_grid(20.47, 550));
  auto energy = [](double th, double om) { return 0.5 * om * om + (1.0 - std::cos(th)); };
  const double e0 = energy(s(0, 0), s(0, 1));
  for (Eigen::Index i = 0; i < s.rows(); ++i) EXPECT_NEAR(energy(s(i, 0), s(i, 1)) / e0, 1.0, 1e-5);
}

TEST(Rk4, SmdSuperposition) {
  ForcingFn f1 = [](double t) { return std::sin(t); };
  ForcingFn f2 = [](double t) { return std::exp(-0.3 * t); };
  ForcingFn f12 = [&](double t) { return f1(t) + f2(t); };
  const Eigen::VectorXd grid = uniform_grid(20.0, 550);
  const Eigen::VectorXd y1 = integrate_rk4(smd(), f1, grid, 50).y.col(0);
  const Eigen::VectorXd y2 = integrate_rk4(smd(), f2, grid, 50).y.col(0);
  const Eigen::VectorXd y12 = integrate_rk4(smd(), f12, grid, 50).y.col(0);
  EXPECT_LT((y1 + y2 - y12).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Rk4, BlowUpReportsStep) {
  SystemSpec d = dataset_system(2);
  d.initial_state << 1e200, 0.0;
  EXPECT_THROW(integrate_rk4(d, constant(0.0), uniform_grid(20.0, 100), 10), NumericError);
}

TEST(Dde, ZeroHistoryNoForcingStaysZero) {
  const TimeSeriesSample s = integrate_dde(dataset_system(8), constant(0.0), uniform_grid(20.0, 550), 50);
  EXPECT_EQ(s.y.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Dde, ConstantForcingSettlesAtFixedPoint) {
  const double x0 = 0.05;
  const TimeSeriesSample s = integrate_dde(dataset_system(8), constant(x0), uniform_grid(400.0, 4000), 50);
  // Root of 0.1 y / (1 + y^2) - 0.2 y + x0 by bisection.
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.1 * mid / (1.0 + mid * mid) - 0.2 * mid + x0 > 0.0 ? lo : hi) = mid;
  }
  EXPECT_NEAR(s.y(s.length() - 1, 0), 0.5 * (lo + hi), 1e-6);
}

TEST(Dde, NegativeDelayRejected) {
  SystemSpec mg = dataset_system(8);
  mg.params["tau"] = -1.0;
  EXPECT_THROW(integrate_dde(mg, constant(0.0), uniform_grid(20.0, 550), 50), ConfigError);
}

TEST(Datasets, TableCounts) {
  const Dataset d1 = build_dataset(1, 7);
  EXPECT_EQ(d1.train.size(), 10u);
  EXPECT_EQ(d1.val.size(), 5u);
  EXPECT_EQ(d1.test.size(), 15u);
  EXPECT_NEAR(d1.dt(), 20.0 / 550.0, 1e-15);
  EXPECT_EQ(d1.train[0].sample.length(), 550);
  EXPECT_EQ(d1.train[0].forcing.kind, ForcingKind::Sigmoid);
  EXPECT_EQ(d1.val[0].forcing.kind, ForcingKind::DecayingSine);
  EXPECT_EQ(d1.test[0].forcing.kind, ForcingKind::Triangular);

  const SystemSpec d5 = dataset_system(5);
  EXPECT_EQ(d5.param("rho"), 10.0);
  EXPECT_EQ(d5.param("sigma"), 10.0);
  EXPECT_NEAR(d5.param("beta"), 8.0 / 3.0, 1e-15);
  EXPECT_EQ(d5.initial_state[0], 1.0);
  EXPECT_EQ(d5.output_index, 1);

  const SystemSpec d8 = dataset_system(8);
  EXPECT_EQ(d8.param("beta"), 0.1);
  EXPECT_EQ(d8.param("gamma"), 0.2);
  EXPECT_EQ(d8.param("tau"), 7.0);
  EXPECT_EQ(d8.param("n"), 2.0);

  const DatasetInfo i3 = dataset_info(3);
  EXPECT_EQ(i3.n_train, 200);
  EXPECT_EQ(i3.n_test, 130);
  EXPECT_EQ(i3.horizon, 20.47);
  EXPECT_THROW(dataset_info(9), ConfigError);
}

TEST(Datasets, WriteReadRoundTripAndDeterminism) {
  const auto root = std::filesystem::temp_directory_path() / "lpnet_systems_test";
  std::filesystem::remove_all(root);
  const std::string a = write_dataset(build_dataset(8, 3), (root / "a").string());
  const std::string b = write_dataset(build_dataset(8, 3), (root / "b").string());
  EXPECT_EQ(slurp(std::filesystem::path(a) / "manifest.json"), slurp(std::filesystem::path(b) / "manifest.json"));
  EXPECT_EQ(slurp(std::filesystem::path(a) / "test/sample_004.csv"),
            slurp(std::filesystem::path(b) / "test/sample_004.csv"));

  const Dataset back = read_dataset(a);
  const Dataset orig = build_dataset(8, 3);
  ASSERT_EQ(back.train.size(), orig.train.size());
  EXPECT_EQ(back.train[2].sample.y, orig.train[2].sample.y);
  EXPECT_EQ(back.train[2].sample.t, orig.train[2].sample.t);
  EXPECT_EQ(back.test[0].forcing.params, orig.test[0].forcing.params);
  std::filesystem::remove_all(root);
}

TEST(Csv, MalformedRowReportsLine) {
  try {
    sample_from_csv("t,x,y\n0,1,2\n0.1,abc,3\n", 1, "f.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("f.csv:3"), std::string::npos) << e.what();
  }
}
