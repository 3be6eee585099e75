#include "lpnet/oracles.hpp"

#include <cmath>

#include "lpnet/error.hpp"

namespace lpnet {

std::vector<TransformPair> transform_pair_corpus() {
  const double a = 0.5, w = 2.0, tau = 3.0;
  return {
      {"1/s -> 1", [](Complex s) { return 1.0 / s; }, [](double) { return 1.0; }},
      {"1/s^2 -> t", [](Complex s) { return 1.0 / (s * s); }, [](double t) { return t; }},
      {"1/(s+a) -> exp(-a t)", [a](Complex s) { return 1.0 / (s + a); }, [a](double t) { return std::exp(-a * t); }},
      {"w/(s^2+w^2) -> sin(w t)", [w](Complex s) { return w / (s * s + w * w); },
       [w](double t) { return std::sin(w * t); }},
      {"exp(-tau s)/s -> step(t - tau)", [tau](Complex s) { return std::exp(-tau * s) / s; },
       [tau](double t) { return t >= tau ? 1.0 : 0.0; }, tau},
  };
}

namespace {

LaplaceSignal as_signal(const std::function<Complex(Complex)>& f) {
  return [f](Complex s) { return Eigen::VectorXcd::Constant(1, f(s)); };
}

Eigen::VectorXd sample_times(double t0, double t1, int count, double jump, double band) {
  std::vector<double> keep;
  for (int i = 0; i < count; ++i) {
    const double t = t0 + (t1 - t0) * i / (count - 1);
    if (jump >= 0.0 && std::abs(t - jump) <= band) continue;
    keep.push_back(t);
  }
  return Eigen::Map<Eigen::VectorXd>(keep.data(), static_cast<Eigen::Index>(keep.size()));
}

}  // namespace

std::vector<OracleResult> check_transform_pairs(const IltConfig& cfg, double tol, double t0, double t1, int count,
                                                double band) {
  std::vector<OracleResult> out;
  for (const auto& pair : transform_pair_corpus()) {
    const Eigen::VectorXd t = sample_times(t0, t1, count, pair.jump, band);
    const Eigen::VectorXd y = ilt_fourier(as_signal(pair.transform), t, cfg).col(0);
    double err = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i) err = std::max(err, std::abs(y[i] - pair.signal(t[i])));
    out.push_back({pair.name, err, tol, err < tol});
  }
  return out;
}

std::vector<OracleResult> check_prescaled_equivalence(const IltConfig& cfg, double tol, double t0, double t1,
                                                      int count) {
  std::vector<OracleResult> out;
  for (const auto& pair : transform_pair_corpus()) {
    const Eigen::VectorXd t = sample_times(t0, t1, count, -1.0, 0.0);
    const Eigen::VectorXd plain = ilt_fourier(as_signal(pair.transform), t, cfg).col(0);
    const auto f = pair.transform;
    const Eigen::VectorXd scaled =
        ilt_fourier_prescaled([f, &cfg](Complex s, double tt) {
          return Eigen::VectorXcd::Constant(1, f(s) / scale_factor(tt, cfg));
        }, t, cfg).col(0);
    const double denom = std::max(plain.cwiseAbs().maxCoeff(), 1e-300);
    const double err = (plain - scaled).cwiseAbs().maxCoeff() / denom;
    out.push_back({pair.name, err, tol, err < tol});
  }
  return out;
}

ForcingSignal smd_oracle_forcing(ForcingKind kind) {
  ForcingSignal f;
  f.kind = kind;
  f.params["amplitude"] = 1.0;
  switch (kind) {
    case ForcingKind::Sigmoid:
      f.params["period"] = 4.0;
      f.params["kappa"] = 4.0;
      break;
    case ForcingKind::DecayingSine:
      f.params["omega"] = 1.5;
      f.params["decay"] = 0.1;
      break;
    case ForcingKind::Triangular:
      f.params["period"] = 4.0;
      break;
    case ForcingKind::DecayingSinusoid:
      f.params["omega"] = 1.5;
      f.params["decay"] = 0.1;
      f.params["phase"] = 0.3;
      break;
  }
  return f;
}

IltConfig oracle_ilt_config() {
  IltConfig cfg;
  cfg.zeta = 8.0;
  cfg.epsilon = 1e-6;
  cfg.n_ilt = 512;
  cfg.c_shift = 0.0;
  return cfg;
}

double smd_pipeline_rmse(const ForcingSignal& forcing, const IltConfig& ilt, LpType type, int q) {
  const SystemSpec spec = dataset_system(1);
  const double m = spec.param("m"), c = spec.param("c"), k = spec.param("k");
  const int n_hist = 50, n_fore = 500;
  const Eigen::VectorXd t = uniform_grid(20.0, n_hist + n_fore);
  const ForcingFn x = [&forcing](double tt) { return forcing(tt); };
  const Eigen::MatrixXd states = integrate_states(spec, x, t, 10);

  const TransferFn h = [m, c, k](Complex s) { return 1.0 / (m * s * s + c * s + k); };
  double sq = 0.0;
  int start = 0;
  for (int len : window_lengths(n_fore, q)) {
    const int g0 = n_hist + start;
    const double y0 = states(g0 - 1, 0), v0 = states(g0 - 1, 1);
    const InitialTermFn p = [m, c, y0, v0](Complex s) { return m * (s * y0 + v0) + c * y0; };
    const Eigen::VectorXd t_local = local_times(t.segment(g0, len), t[g0 - 1], ilt.c_shift);
    Eigen::VectorXd xw(len);
    for (int i = 0; i < len; ++i) xw[i] = x(t[g0 + i]);
    const Eigen::VectorXd y = forecast_window_frozen(t_local, xw, h, p, type, ilt);
    sq += (y - states.col(0).segment(g0, len)).squaredNorm();
    start += len;
  }
  return std::sqrt(sq / n_fore);
}

PulseOnset dde_pulse_onset(double t0, double horizon, int count) {
  SystemSpec spec = dataset_system(8);
  const double gamma = spec.param("gamma"), tau = spec.param("tau");
  const Eigen::VectorXd t = uniform_grid(horizon, count);
  const double dt = t[1] - t[0];
  const auto i0 = static_cast<Eigen::Index>(std::llround(t0 / dt));
  t0 = t[i0];
  const ForcingFn base = [](double) { return 0.5; };
  const ForcingFn pulse = [t0, dt](double tt) { return tt >= t0 && tt < t0 + dt * (1.0 - 1e-9) ? 1.5 : 0.5; };
  const Eigen::VectorXd yb = integrate_dde(spec, base, t, 1, 20).y.col(0);
  const Eigen::VectorXd yp = integrate_dde(spec, pulse, t, 1, 20).y.col(0);

  // After the pulse the difference decays like exp(-gamma t) until the
  // delayed term sees the pulse.
  const Eigen::Index first = i0 + 1;
  const double d1 = yp[first] - yb[first];
  if (!(std::abs(d1) > 0.0)) throw NumericError("pulse had no effect");
  PulseOnset out{t0 + tau, t[t.size() - 1], dt};
  for (Eigen::Index i = first + 1; i < t.size(); ++i) {
    const double free = d1 * std::exp(-gamma * (t[i] - t[first]));
    if (std::abs(yp[i] - yb[i] - free) > 1e-7 * std::abs(d1)) {
      out.measured = t[i];
      break;
    }
  }
  return out;
}

}  // namespace lpnet
