#include "lpnet/laplace.hpp"

#include <cassert>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "lpnet/error.hpp"

namespace lpnet {

using std::numbers::pi;

void IltConfig::validate() const {
  if (!(zeta > 1.0)) throw ConfigError("ilt: zeta must exceed 1, got " + std::to_string(zeta));
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw ConfigError("ilt: epsilon must lie in (0, 1), got " + std::to_string(epsilon));
  if (!(alpha >= 0.0)) throw ConfigError("ilt: alpha must be non-negative");
  if (n_ilt < 1) throw ConfigError("ilt: n_ilt must be at least 1");
  if (!(c_shift >= 0.0)) throw ConfigError("ilt: c_shift must be non-negative");
}

namespace {

void require_positive_times(const Eigen::Ref<const Eigen::VectorXd>& times) {
  for (Eigen::Index j = 0; j < times.size(); ++j) {
    if (!(times[j] > 0.0)) throw DomainError("ilt: query time must be positive", j);
  }
}

double sigma_at(double t, const IltConfig& cfg) { return cfg.alpha - std::log(cfg.epsilon) / (cfg.zeta * t); }

}  // namespace

QuerySet build_queries(const Eigen::Ref<const Eigen::VectorXd>& times, const IltConfig& cfg) {
  cfg.validate();
  require_positive_times(times);
  QuerySet q;
  q.times = times;
  q.sigma.resize(times.size());
  q.points.resize(cfg.n_ilt + 1, times.size());
  for (Eigen::Index j = 0; j < times.size(); ++j) {
    const double t = times[j];
    const double sigma = sigma_at(t, cfg);
    q.sigma[j] = sigma;
    for (int k = 0; k <= cfg.n_ilt; ++k) q.points(k, j) = Complex(sigma, k * pi / (cfg.zeta * t));
  }
  return q;
}

double scale_factor(double t, const IltConfig& cfg) {
  if (!(t > 0.0)) throw DomainError("scale_factor: t must be positive");
  return cfg.zeta * t * std::pow(cfg.epsilon, 1.0 / cfg.zeta) * std::exp(-cfg.alpha * t);
}

Eigen::VectorXcd ilt_weights(double t, const IltConfig& cfg, bool prescaled) {
  const double lambda = cfg.zeta * t;
  const double prefactor = prescaled ? 1.0 : std::exp(sigma_at(t, cfg) * t) / lambda;
  Eigen::VectorXcd w(cfg.n_ilt + 1);
  w[0] = Complex(0.5 * prefactor, 0.0);
  // k pi t / lambda reduces to k pi / zeta for lambda = zeta t.
  for (int k = 1; k <= cfg.n_ilt; ++k) w[k] = prefactor * std::polar(1.0, k * pi / cfg.zeta);
  return w;
}

namespace {

template <typename Eval>
Eigen::MatrixXd reconstruct(Eval&& eval, const Eigen::Ref<const Eigen::VectorXd>& times, const IltConfig& cfg,
                            bool prescaled) {
  const QuerySet q = build_queries(times, cfg);
  Eigen::MatrixXd y;
  for (Eigen::Index j = 0; j < times.size(); ++j) {
    const Eigen::VectorXcd w = ilt_weights(times[j], cfg, prescaled);
    for (int k = 0; k <= cfg.n_ilt; ++k) {
      Eigen::VectorXcd v;
      try {
        v = eval(q.points(k, j), times[j]);
      } catch (const std::exception& e) {
        throw DomainError("ilt: evaluation failed at s_" + std::to_string(k) + "(t=" + std::to_string(times[j]) +
                              "): " + e.what(),
                          j);
      }
      if (y.size() == 0) y = Eigen::MatrixXd::Zero(times.size(), v.size());
      if (v.size() != y.cols()) throw ShapeError("ilt: signal width changed between query points");
      y.row(j) += (w[k] * v.array()).real().matrix().transpose();
    }
  }
  return y;
}

}  // namespace

Eigen::MatrixXd ilt_fourier(const LaplaceSignal& y, const Eigen::Ref<const Eigen::VectorXd>& times,
                            const IltConfig& cfg) {
  return reconstruct([&](Complex s, double) { return y(s); }, times, cfg, false);
}

Eigen::MatrixXd ilt_fourier_prescaled(const ScaledLaplaceSignal& y_tilde,
                                      const Eigen::Ref<const Eigen::VectorXd>& times, const IltConfig& cfg) {
  return reconstruct(y_tilde, times, cfg, true);
}

// ---------------------------------------------------------------------------
// Forward transforms

DltSignal::DltSignal(Eigen::VectorXd t, Eigen::MatrixXd x) : t_(std::move(t)), x_(std::move(x)) {
  if (t_.size() < 2) throw DomainError("dlt: need at least two samples");
  if (x_.rows() != t_.size()) throw ShapeError("dlt: x rows must match the number of time samples");
  dt_.resize(t_.size());
  for (Eigen::Index k = 0; k + 1 < t_.size(); ++k) {
    dt_[k] = t_[k + 1] - t_[k];
    if (!(dt_[k] > 0.0)) throw DomainError("dlt: sample times must be strictly increasing", k + 1);
  }
  dt_[t_.size() - 1] = dt_[t_.size() - 2];
  const double step = (t_[t_.size() - 1] - t_[0]) / static_cast<double>(t_.size() - 1);
  uniform_ = (dt_.array() - step).abs().maxCoeff() <= 1e-9 * step;
}

Eigen::VectorXcd DltSignal::operator()(Complex s) const {
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(x_.cols());
  if (uniform_) {
    const Complex ratio = std::exp(-s * dt_[0]);
    Complex kernel = std::exp(-s * t_[0]) * dt_[0];
    for (Eigen::Index k = 0; k < t_.size(); ++k, kernel *= ratio) acc += kernel * x_.row(k).transpose().cast<Complex>();
    return acc;
  }
  for (Eigen::Index k = 0; k < t_.size(); ++k) {
    const Complex kernel = std::exp(-s * t_[k]) * dt_[k];
    acc += kernel * x_.row(k).transpose().cast<Complex>();
  }
  return acc;
}

Eigen::VectorXcd dlt(const Eigen::Ref<const Eigen::VectorXd>& t, const Eigen::Ref<const Eigen::MatrixXd>& x,
                     Complex s) {
  return DltSignal(t, x)(s);
}

void require_uniform(const Eigen::Ref<const Eigen::VectorXd>& t) {
  if (t.size() < 2) throw DomainError("uniform sampling requires at least two samples");
  const double dt = (t[t.size() - 1] - t[0]) / static_cast<double>(t.size() - 1);
  if (!(dt > 0.0)) throw DomainError("sample times must be strictly increasing");
  for (Eigen::Index k = 0; k + 1 < t.size(); ++k) {
    if (std::abs((t[k + 1] - t[k]) - dt) > 1e-9 * dt) throw DomainError("sampling is not uniform", k + 1);
  }
}

FfltSignal::FfltSignal(const Eigen::Ref<const Eigen::VectorXd>& t, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const Eigen::Index n = t.size();
  if (n < 4) throw DomainError("fflt: need at least four samples");
  if (x.rows() != n) throw ShapeError("fflt: x rows must match the number of time samples");
  require_uniform(t);
  const double dt = (t[n - 1] - t[0]) / static_cast<double>(n - 1);
  const double period = static_cast<double>(n) * dt;
  const Eigen::Index kmax = n / 2;
  const bool nyquist = (n % 2 == 0);

  omega_.resize(2 * kmax + 1);
  for (Eigen::Index k = -kmax; k <= kmax; ++k) omega_[k + kmax] = 2.0 * pi * static_cast<double>(k) / period;

  coeffs_.resize(2 * kmax + 1, x.cols());
  Eigen::FFT<double> fft;
  std::vector<Complex> in(n), out;
  for (Eigen::Index d = 0; d < x.cols(); ++d) {
    for (Eigen::Index i = 0; i < n; ++i) in[i] = Complex(x(i, d), 0.0);
    fft.fwd(out, in);
    // Samples start at t[0], so the coefficients carry the phase e^{-i w_k t0}.
    for (Eigen::Index k = 0; k <= kmax; ++k) {
      Complex c = out[k] / static_cast<double>(n);
      if (nyquist && k == kmax) c *= 0.5;
      const Complex a = c * std::polar(1.0, -omega_[k + kmax] * t[0]);
      coeffs_(kmax + k, d) = a;
      if (k > 0) coeffs_(kmax - k, d) = std::conj(a);
    }
  }
}

Eigen::VectorXcd FfltSignal::operator()(Complex s) const {
  assert(s.real() > 0.0 && "FFLT poles lie on the imaginary axis");
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(coeffs_.cols());
  for (Eigen::Index k = 0; k < omega_.size(); ++k) {
    const Complex inv = 1.0 / (s - Complex(0.0, omega_[k]));
    acc += inv * coeffs_.row(k).transpose();
  }
  return acc;
}

}  // namespace lpnet
