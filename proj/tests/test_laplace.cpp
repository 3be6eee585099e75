#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "lpnet/error.hpp"
#include "lpnet/laplace.hpp"

using namespace lpnet;
using std::numbers::pi;

namespace {

IltConfig accurate_config() {
  IltConfig cfg;
  cfg.zeta = 8.0;
  cfg.epsilon = 1e-6;
  cfg.n_ilt = 512;
  return cfg;
}

// Random proper rational function with poles in the left half plane.
struct Rational {
  std::vector<Complex> poles;
  std::vector<Complex> residues;

  Eigen::VectorXcd operator()(Complex s) const {
    Complex acc = 0.0;
    for (std::size_t i = 0; i < poles.size(); ++i) acc += residues[i] / (s - poles[i]);
    return Eigen::VectorXcd::Constant(1, acc);
  }
};

Rational random_rational(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Rational r;
  for (int i = 0; i < 3; ++i) {
    const Complex p(-0.2 - std::abs(u(rng)), 2.0 * u(rng));
    const Complex c(u(rng), u(rng));
    r.poles.push_back(p);
    r.residues.push_back(c);
    r.poles.push_back(std::conj(p));
    r.residues.push_back(std::conj(c));
  }
  return r;
}

}  // namespace

TEST(Queries, MatchClosedForm) {
  IltConfig cfg;
  cfg.alpha = 0.001;
  Eigen::VectorXd t(2);
  t << 1.0, 2.0;
  const QuerySet q = build_queries(t, cfg);
  EXPECT_NEAR(q.points(1, 0).real(), 11.5139, 1e-4);
  EXPECT_NEAR(q.points(1, 0).imag(), 1.5708, 1e-4);
  EXPECT_NEAR(q.points(1, 1).imag(), 0.7854, 1e-4);
  for (Eigen::Index j = 0; j < t.size(); ++j) {
    EXPECT_EQ(q.points(0, j).imag(), 0.0);
    for (int k = 0; k <= cfg.n_ilt; ++k) {
      EXPECT_EQ(q.points(k, j).real(), q.sigma[j]);
      EXPECT_EQ(q.points(k, j).imag(), k * pi / (cfg.zeta * t[j]));
    }
  }
}

TEST(Queries, RejectNonPositiveTimeWithIndex) {
  Eigen::VectorXd t(3);
  t << 1.0, 0.0, 2.0;
  try {
    build_queries(t, IltConfig{});
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_EQ(e.index(), 1);
  }
}

TEST(Queries, RejectBadConfig) {
  IltConfig cfg;
  cfg.zeta = 0.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = IltConfig{};
  cfg.n_ilt = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ScaleFactor, ClosedForm) {
  IltConfig cfg;
  EXPECT_NEAR(scale_factor(1.0, cfg), 2e-5, 1e-15);
  cfg.alpha = 1.0;
  EXPECT_NEAR(scale_factor(1.0, cfg), 7.3576e-6, 1e-9);
  EXPECT_LT(scale_factor(1e-12, cfg), 1e-15);
  EXPECT_THROW(scale_factor(0.0, cfg), DomainError);
}

TEST(Ilt, ZeroSignalGivesZero) {
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(5, 0.5, 3.0);
  const Eigen::MatrixXd y = ilt_fourier([](Complex) { return Eigen::VectorXcd::Zero(1); }, t, IltConfig{});
  EXPECT_EQ(y.cwiseAbs().maxCoeff(), 0.0);
  const Eigen::MatrixXd yp =
      ilt_fourier_prescaled([](Complex, double) { return Eigen::VectorXcd::Zero(1); }, t, IltConfig{});
  EXPECT_EQ(yp.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Ilt, AnalyticPairsWithFineContour) {
  const IltConfig cfg = accurate_config();
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(20, 0.5, 5.0);
  const Eigen::MatrixXd y = ilt_fourier(
      [](Complex s) { return Eigen::VectorXcd::Constant(1, 1.0 / (s + 1.0)); }, t, cfg);
  for (Eigen::Index j = 0; j < t.size(); ++j) EXPECT_NEAR(y(j, 0), std::exp(-t[j]), 1e-2);
  const Eigen::MatrixXd r = ilt_fourier(
      [](Complex s) { return Eigen::VectorXcd::Constant(1, 2.0 / (s * s + 4.0)); }, t, cfg);
  for (Eigen::Index j = 0; j < t.size(); ++j) EXPECT_NEAR(r(j, 0), std::sin(2.0 * t[j]), 1e-2);
}

TEST(Ilt, Linearity) {
  std::mt19937_64 rng(3);
  const Rational a = random_rational(rng), b = random_rational(rng);
  const IltConfig cfg;
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(10, 0.1, 10.0);
  const double ca = 1.7, cb = -0.4;
  const Eigen::MatrixXd ya = ilt_fourier(a, t, cfg), yb = ilt_fourier(b, t, cfg);
  const Eigen::MatrixXd yab = ilt_fourier([&](Complex s) { return (ca * a(s) + cb * b(s)).eval(); }, t, cfg);
  const Eigen::MatrixXd expect = ca * ya + cb * yb;
  for (Eigen::Index j = 0; j < t.size(); ++j)
    EXPECT_LE(std::abs(yab(j, 0) - expect(j, 0)), 1e-12 * std::max(1.0, std::abs(expect(j, 0))));
}

TEST(Ilt, PrescaledPathMatchesPlain) {
  std::mt19937_64 rng(11);
  const IltConfig cfg;
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(25, 0.1, 10.0);
  for (int trial = 0; trial < 5; ++trial) {
    const Rational r = random_rational(rng);
    const Eigen::MatrixXd plain = ilt_fourier(r, t, cfg);
    const Eigen::MatrixXd scaled =
        ilt_fourier_prescaled([&](Complex s, double tt) { return (r(s) / scale_factor(tt, cfg)).eval(); }, t, cfg);
    for (Eigen::Index j = 0; j < t.size(); ++j)
      EXPECT_LE(std::abs(plain(j, 0) - scaled(j, 0)), 1e-10 * std::max(1.0, std::abs(plain(j, 0))));
  }
}

TEST(Ilt, EvaluationFailureCarriesQueryContext) {
  Eigen::VectorXd t = Eigen::VectorXd::Constant(1, 1.0);
  try {
    ilt_fourier([](Complex) -> Eigen::VectorXcd { throw std::runtime_error("boom"); }, t, IltConfig{});
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("s_0"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
}

TEST(Dlt, ConstantAndExponential) {
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(1000, 0.0, 10.0);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1000, 1);
  EXPECT_NEAR(dlt(t, one, Complex(1.0, 0.0))[0].real(), 1.0 - std::exp(-10.0), 1e-2);
  EXPECT_EQ(std::abs(dlt(t, Eigen::MatrixXd::Zero(1000, 1), Complex(1.0, 0.0))[0]), 0.0);

  Eigen::VectorXd t2 = Eigen::VectorXd::LinSpaced(4000, 0.0, 20.0);
  const Eigen::MatrixXd e = (-t2.array()).exp().matrix();
  EXPECT_NEAR(dlt(t2, e, Complex(1.0, 0.0))[0].real(), 0.5, 0.5e-2);
}

TEST(Dlt, RejectsNonMonotoneTimes) {
  Eigen::VectorXd t(3);
  t << 0.0, 1.0, 0.5;
  EXPECT_THROW(DltSignal(t, Eigen::MatrixXd::Ones(3, 1)), DomainError);
}

TEST(Fflt, SineMatchesAnalyticTransform) {
  const int n = 256;
  const double T = 4.0 * pi;
  Eigen::VectorXd t(n);
  for (int i = 0; i < n; ++i) t[i] = T * i / n;
  const double w0 = 1.0;
  const Eigen::MatrixXd x = (w0 * t.array()).sin().matrix();
  FfltSignal sig(t, x);
  for (Complex s : {Complex(1.0, 0.0), Complex(1.5, 2.0), Complex(3.0, -7.0)}) {
    const Complex expect = w0 / (s * s + w0 * w0);
    EXPECT_LT(std::abs(sig(s)[0] - expect), 1e-6);
  }
}

TEST(Fflt, ConstantAndZero) {
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(16, 0.0, 1.5);
  FfltSignal c(t, Eigen::MatrixXd::Constant(16, 1, 2.5));
  const Complex s(1.2, 0.7);
  EXPECT_LT(std::abs(c(s)[0] - 2.5 / s), 1e-12);
  FfltSignal z(t, Eigen::MatrixXd::Zero(16, 1));
  EXPECT_EQ(std::abs(z(s)[0]), 0.0);
}

TEST(Fflt, RejectsNonUniformSampling) {
  Eigen::VectorXd t(5);
  t << 0.0, 1.0, 2.0, 3.5, 4.0;
  EXPECT_THROW(FfltSignal(t, Eigen::MatrixXd::Ones(5, 1)), DomainError);
}

TEST(Transforms, ConjugateSymmetry) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(33, 0.0, 3.2);
  Eigen::MatrixXd x(33, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = n01(rng);
  DltSignal d(t, x);
  FfltSignal f(t, x);
  for (Complex s : {Complex(0.7, 1.3), Complex(2.0, -5.0)}) {
    EXPECT_LT((d(std::conj(s)) - d(s).conjugate()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((f(std::conj(s)) - f(s).conjugate()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Transforms, FfltRoundTripRecoversBandLimitedSignal) {
  const int n = 200;
  const double T = 10.0;
  Eigen::VectorXd t(n);
  for (int i = 0; i < n; ++i) t[i] = T * i / n;
  auto signal = [&](double tt) { return std::sin(2.0 * pi * tt / T) + 0.5 * std::cos(4.0 * pi * tt / T); };
  Eigen::MatrixXd x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = signal(t[i]);
  FfltSignal f(t, x);
  const IltConfig cfg = accurate_config();
  Eigen::VectorXd inner = t.segment(n / 10, n * 8 / 10);
  const Eigen::MatrixXd y = ilt_fourier(f, inner, cfg);
  double num = 0.0, den = 0.0;
  for (Eigen::Index j = 0; j < inner.size(); ++j) {
    num += std::pow(y(j, 0) - signal(inner[j]), 2);
    den += std::pow(signal(inner[j]), 2);
  }
  EXPECT_LT(std::sqrt(num / den), 1e-2);
}
