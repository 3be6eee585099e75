#pragma once

// Reference checks with closed-form or independently integrated answers:
// analytic Laplace pairs, the prescaled/unscaled ILT identity, an SMD
// forecast with the exact transfer function, and the Mackey-Glass delay.

#include <functional>
#include <string>
#include <vector>

#include "lpnet/laplace.hpp"
#include "lpnet/model.hpp"
#include "lpnet/systems.hpp"

namespace lpnet {

struct OracleResult {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct TransformPair {
  std::string name;
  std::function<Complex(Complex)> transform;
  std::function<double(double)> signal;
  double jump = -1.0;  // location of a discontinuity, < 0 if none
};

/// 1/s, 1/s^2, 1/(s+a), w/(s^2+w^2) and e^(-tau s)/s.
std::vector<TransformPair> transform_pair_corpus();

/// Max abs error of the Fourier ILT per pair on `count` points of [t0, t1],
/// skipping +-`band` around jumps.
std::vector<OracleResult> check_transform_pairs(const IltConfig& cfg, double tol, double t0 = 0.1, double t1 = 10.0,
                                                int count = 400, double band = 0.1);

/// Max relative difference between ilt_fourier(Y) and
/// ilt_fourier_prescaled(Y / f_scale) per pair.
std::vector<OracleResult> check_prescaled_equivalence(const IltConfig& cfg, double tol, double t0 = 0.1,
                                                      double t1 = 10.0, int count = 400);

/// Forcing used by the SMD pipeline oracle for one family.
ForcingSignal smd_oracle_forcing(ForcingKind kind);

/// Forecast of an SMD trajectory with H(s) = 1/(m s^2 + c s + k) and
/// P(s) = m (s y0 + v0) + c y0 from the state at the last history point,
/// X(s) from the forward transform of the sampled forcing. Returns the RMSE
/// against RK4 over the forecast horizon.
double smd_pipeline_rmse(const ForcingSignal& forcing, const IltConfig& ilt, LpType type = LpType::Dlt, int q = 1);

/// Fine contour used by the SMD pipeline oracle.
IltConfig oracle_ilt_config();

struct PulseOnset {
  double expected = 0.0;  // t0 + tau
  double measured = 0.0;
  double dt = 0.0;        // sample interval
};

/// Integrates Mackey-Glass with and without a one-sample forcing pulse at
/// t0 and reports the first sample where their difference stops following
/// the delay-free decay exp(-gamma t).
PulseOnset dde_pulse_onset(double t0 = 3.0, double horizon = 20.0, int count = 550);

}  // namespace lpnet
