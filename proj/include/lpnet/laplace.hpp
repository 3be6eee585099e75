#pragma once

// Forward and inverse numerical Laplace transforms on the Fourier-series
// contour s_k(t) = sigma(t) + i k pi / (zeta t).

#include <complex>
#include <functional>

#include <Eigen/Dense>

namespace lpnet {

using Complex = std::complex<double>;

/// Contour parameters of the Fourier-series inverse transform.
struct IltConfig {
  double alpha = 0.0;       ///< shift of the contour along the real axis
  double zeta = 2.0;        ///< lambda = zeta * t, must exceed 1
  double epsilon = 1e-10;   ///< sigma = alpha - log(epsilon) / lambda
  int n_ilt = 64;           ///< number of reconstruction terms after k = 0
  double c_shift = 0.0;     ///< offset added to window-local forecast times

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;
};

/// Query points for a set of evaluation times.
struct QuerySet {
  Eigen::VectorXd times;
  Eigen::VectorXd sigma;
  Eigen::MatrixXcd points;  // (n_ilt + 1) x times.size()
};

QuerySet build_queries(const Eigen::Ref<const Eigen::VectorXd>& times, const IltConfig& cfg);

/// zeta t eps^(1/zeta) e^(-alpha t); the reciprocal of the ILT prefactor.
double scale_factor(double t, const IltConfig& cfg);

/// Complex weights w_k with y(t) = sum_k Re{w_k Y(s_k(t))}, k = 0..n_ilt.
/// With `prescaled` the 1/f_scale(t) prefactor is omitted.
Eigen::VectorXcd ilt_weights(double t, const IltConfig& cfg, bool prescaled = false);

/// Queryable s-domain signal of width D.
using LaplaceSignal = std::function<Eigen::VectorXcd(Complex)>;
/// s-domain signal already divided by f_scale(t); receives the time too.
using ScaledLaplaceSignal = std::function<Eigen::VectorXcd(Complex, double)>;

/// Fourier-series inverse transform; returns |times| x D.
Eigen::MatrixXd ilt_fourier(const LaplaceSignal& y, const Eigen::Ref<const Eigen::VectorXd>& times,
                            const IltConfig& cfg);

/// Same reconstruction for Y~(s) = Y(s) / f_scale(t), without the prefactor.
/// The prefactor e^(sigma t) / lambda equals 1 / f_scale(t), so both paths
/// agree to rounding.
Eigen::MatrixXd ilt_fourier_prescaled(const ScaledLaplaceSignal& y_tilde,
                                      const Eigen::Ref<const Eigen::VectorXd>& times,
                                      const IltConfig& cfg);

/// Left-rectangle discrete Laplace transform of a sampled signal.
///
/// X(s) = sum_k x(t_k) exp(-s t_k) dt_k with dt_k = t_{k+1} - t_k and the
/// final increment replicated. `x` is N x D; `t` must be strictly increasing.
class DltSignal {
public:
  DltSignal(Eigen::VectorXd t, Eigen::MatrixXd x);

  Eigen::VectorXcd operator()(Complex s) const;

  Eigen::Index width() const { return x_.cols(); }

private:
  Eigen::VectorXd t_;
  Eigen::VectorXd dt_;
  Eigen::MatrixXd x_;
  bool uniform_ = false;
};

Eigen::VectorXcd dlt(const Eigen::Ref<const Eigen::VectorXd>& t,
                     const Eigen::Ref<const Eigen::MatrixXd>& x, Complex s);

/// Fast Fourier Laplace transform: a pole-residue sum over the Fourier
/// coefficients of the periodic extension of a uniformly sampled window.
///
/// X(s) = sum_{k=-K..K} a_k / (s - i w_k), w_k = 2 pi k / T, T = N dt,
/// K = floor(N / 2). For even N the Nyquist coefficient is split evenly
/// between +K and -K.
class FfltSignal {
public:
  FfltSignal(const Eigen::Ref<const Eigen::VectorXd>& t, const Eigen::Ref<const Eigen::MatrixXd>& x);

  Eigen::VectorXcd operator()(Complex s) const;

  const Eigen::VectorXd& frequencies() const { return omega_; }
  /// (2K + 1) x D, ordered k = -K..K.
  const Eigen::MatrixXcd& coefficients() const { return coeffs_; }
  Eigen::Index width() const { return coeffs_.cols(); }

private:
  Eigen::VectorXd omega_;
  Eigen::MatrixXcd coeffs_;
};

/// Throws DomainError unless `t` is uniformly spaced (relative tolerance 1e-9).
void require_uniform(const Eigen::Ref<const Eigen::VectorXd>& t);

}  // namespace lpnet
