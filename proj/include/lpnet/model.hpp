#pragma once

// LP-Net forward pass: history encoder, polynomial initial-state term P(s),
// grid-conditioned transfer-function network H(s), complex assembly
// Y(s) = H(s) (B X(s) + P(s)), and a recurrent windowed inverse transform.
//
// All samples of a batch share one time grid. Each window is evaluated for
// the whole batch at once: rows of the s-domain matrices are ordered
// b * R + n * (K + 1) + k for sample b, window time n and ILT term k,
// with R = window_length * (K + 1).

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "lpnet/autodiff.hpp"
#include "lpnet/error.hpp"
#include "lpnet/laplace.hpp"
#include "lpnet/nn.hpp"
#include "lpnet/systems.hpp"

namespace lpnet {

enum class LpType { Dlt, Fflt };

LpType parse_lp_type(const std::string& name);
std::string lp_type_name(LpType type);

/// Structural hyperparameters of one LP-Net.
struct LpNetConfig {
  LpType lp_type = LpType::Dlt;
  IltConfig ilt;
  int enc_width = 56;        // d_Enc
  int enc_layers = 2;        // L_Enc, activated trunk layers
  int p_degree = 3;          // number of polynomial coefficients
  int latent_dim = 1;        // D_z
  double kappa_h = 450.0;
  int q = 3;                 // recurrent windows
  ad::Activation h_activation = ad::Activation::Tanh;
  int h_width = 192;         // d_H
  int h_layers = 4;          // l_H, hidden layers of the H(s) network
  bool use_scaling = true;
  int n_hist = 50;

  void validate() const;
};

nlohmann::json model_config_to_json(const LpNetConfig& cfg);
/// Missing keys keep their defaults; wrong types or values throw ConfigError
/// naming the field.
LpNetConfig model_config_from_json(const nlohmann::json& j);

/// sum_i p_i s^i per output row (Horner); `coeffs` is D_y x P.
Eigen::VectorXcd eval_P(Complex s, const Eigen::MatrixXd& coeffs);

/// Normalized coordinates for the H(s) network.
struct Grid {
  Eigen::VectorXd time_axis;  // window times mapped to [-1, 1]
  Eigen::VectorXd ilt_axis;   // n_ilt + 1 uniform points in [-1, 1]

  /// (n_ilt + 1) x T matrix g_{m,n} (the time value, constant along m).
  Eigen::MatrixXd values() const;
};

Grid build_grid(const Eigen::Ref<const Eigen::VectorXd>& t_window, int n_ilt);

/// Maps t to [-1, 1] with t_min -> -1 and t_max -> 1.
Eigen::VectorXd normalize_axis(const Eigen::Ref<const Eigen::VectorXd>& t);

/// Ceil split of M forecast points into windows of ceil(M / Q) points.
std::vector<int> window_lengths(int n_fore, int q);

/// Window-local ILT times (t - t_start) + c_shift + dt, with dt the spacing
/// between the window start and the preceding sample.
Eigen::VectorXd local_times(const Eigen::Ref<const Eigen::VectorXd>& t_window, double t_prev, double c_shift);

/// Forward transform of a window of forcing samples at local times.
LaplaceSignal forward_transform(LpType type, const Eigen::VectorXd& t_local, const Eigen::MatrixXd& x);

using TransferFn = std::function<Complex(Complex)>;
using InitialTermFn = std::function<Complex(Complex)>;

/// One window with a fixed, non-learned H(s) and P(s); B = 1. Returns the
/// forecast at the given local times.
Eigen::VectorXd forecast_window_frozen(const Eigen::VectorXd& t_local, const Eigen::VectorXd& x_window,
                                       const TransferFn& h, const InitialTermFn& p, LpType type,
                                       const IltConfig& ilt);

/// Per-window constants shared by every forward pass over a batch.
template <typename Scalar>
struct WindowPlan {
  using Mat = ad::Matrix<Scalar>;

  int start = 0;   // first forecast index
  int length = 0;  // number of forecast points
  Eigen::VectorXd t_local;
  Mat hist_t;      // B x N normalized history times
  Mat grid_in;     // (B R) x 2: (ilt axis, time axis)
  Mat pow_re, pow_im;  // R x P: real and imaginary parts of s^i
  Mat x_re, x_im;      // (B R) x 1: X(s) per sample
  Mat w_re, w_nim;     // (B R) x 1: Re{w Y} = w_re Y_re + w_nim Y_im
  Mat h_scale;         // (B R) x 1: 1 / (f_scale kappa) or 1
};

/// A batch of samples with all data-dependent constants precomputed.
template <typename Scalar>
struct PreparedBatch {
  using Mat = ad::Matrix<Scalar>;

  int batch = 0;
  int n_hist = 0;
  int n_fore = 0;
  Mat x;       // B x (N + M)
  Mat y_hist;  // B x N
  Mat y_fore;  // B x M
  std::vector<WindowPlan<Scalar>> windows;
};

/// Builds the per-window constants in double precision and stores them as
/// Scalar. Throws ShapeError if the samples do not share one grid or are not
/// univariate.
template <typename Scalar>
PreparedBatch<Scalar> prepare_batch(const LpNetConfig& cfg, const std::vector<const TimeSeriesSample*>& samples);

namespace detail {

struct WindowData {
  int start, length;
  Eigen::VectorXd t_local;
  Eigen::MatrixXd hist_t, grid_in, pow_re, pow_im, x_re, x_im, w_re, w_nim, h_scale;
};

struct BatchData {
  int batch, n_hist, n_fore;
  Eigen::MatrixXd x, y_hist, y_fore;
  std::vector<WindowData> windows;
};

BatchData prepare_batch_data(const LpNetConfig& cfg, const std::vector<const TimeSeriesSample*>& samples);

}  // namespace detail

template <typename Scalar>
PreparedBatch<Scalar> prepare_batch(const LpNetConfig& cfg, const std::vector<const TimeSeriesSample*>& samples) {
  detail::BatchData d = detail::prepare_batch_data(cfg, samples);
  PreparedBatch<Scalar> out;
  out.batch = d.batch;
  out.n_hist = d.n_hist;
  out.n_fore = d.n_fore;
  out.x = d.x.cast<Scalar>();
  out.y_hist = d.y_hist.cast<Scalar>();
  out.y_fore = d.y_fore.cast<Scalar>();
  for (auto& w : d.windows) {
    WindowPlan<Scalar> p;
    p.start = w.start;
    p.length = w.length;
    p.t_local = w.t_local;
    p.hist_t = w.hist_t.cast<Scalar>();
    p.grid_in = w.grid_in.cast<Scalar>();
    p.pow_re = w.pow_re.cast<Scalar>();
    p.pow_im = w.pow_im.cast<Scalar>();
    p.x_re = w.x_re.cast<Scalar>();
    p.x_im = w.x_im.cast<Scalar>();
    p.w_re = w.w_re.cast<Scalar>();
    p.w_nim = w.w_nim.cast<Scalar>();
    p.h_scale = w.h_scale.cast<Scalar>();
    out.windows.push_back(std::move(p));
  }
  return out;
}

template <typename Scalar>
class LpNet {
public:
  using Mat = ad::Matrix<Scalar>;
  using V = ad::Var<Scalar>;
  using CV = ad::CVar<Scalar>;
  using Params = ad::ParameterSet<Scalar>;

  struct Encoded {
    V p_coeffs;  // B x P
    V z;         // B x D_z
  };

  explicit LpNet(LpNetConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int n = cfg_.n_hist;
    trunk_ = ad::Mlp<Scalar>({3 * n, cfg_.enc_width, cfg_.enc_width, cfg_.enc_layers, ad::Activation::Tanh},
                             "enc.trunk", true);
    p_head_ = ad::Mlp<Scalar>({cfg_.enc_width, cfg_.p_degree, 1, 1, ad::Activation::Identity}, "enc.p");
    z_head_ = ad::Mlp<Scalar>({cfg_.enc_width, cfg_.latent_dim, 1, 1, ad::Activation::Identity}, "enc.z");
    h_net_ = ad::Mlp<Scalar>({2 + cfg_.latent_dim, 2, cfg_.h_width, cfg_.h_layers + 1, cfg_.h_activation}, "hs");
  }

  const LpNetConfig& config() const { return cfg_; }

  void declare(Params& params) const {
    trunk_.declare(params);
    p_head_.declare(params);
    z_head_.declare(params);
    h_net_.declare(params);
  }

  void initialize(Params& params, std::mt19937_64& rng) const {
    trunk_.initialize(params, rng);
    p_head_.initialize(params, rng);
    z_head_.initialize(params, rng);
    h_net_.initialize(params, rng);
    // The scaled output has to reach kappa_h |H|, far outside the default
    // init range.
    if (cfg_.use_scaling) {
      const auto gain = static_cast<Scalar>(std::sqrt(cfg_.kappa_h));
      params.at(h_net_.weight_name(cfg_.h_layers)).value *= gain;
      params.at(h_net_.bias_name(cfg_.h_layers)).value *= gain;
    }
  }

  /// `hist_t`, `x_hist` are constants, `y_hist` may depend on earlier
  /// predictions. All are B x N.
  Encoded encode_history(ad::Tape<Scalar>& tape, Params& params, V hist_t, V x_hist, V y_hist) const {
    if (hist_t.cols() != cfg_.n_hist || x_hist.cols() != cfg_.n_hist || y_hist.cols() != cfg_.n_hist)
      throw ShapeError("encode_history: history must have " + std::to_string(cfg_.n_hist) + " points");
    V h = trunk_.forward(tape, params, ad::concat_cols(std::vector<V>{hist_t, x_hist, y_hist}));
    return {p_head_.forward(tape, params, h), z_head_.forward(tape, params, h)};
  }

  /// Raw network output H^ on the window grid, (B R) x 1 each. With
  /// `effective` the scaling 1 / (f_scale kappa) is applied when enabled.
  CV eval_H(ad::Tape<Scalar>& tape, Params& params, const WindowPlan<Scalar>& w, V z, bool effective) const {
    const Eigen::Index r = static_cast<Eigen::Index>(w.length) * (cfg_.ilt.n_ilt + 1);
    V in = ad::concat_cols(std::vector<V>{tape.constant(w.grid_in), ad::repeat_rows(z, r)});
    V out = h_net_.forward(tape, params, in);
    CV h{ad::slice_cols(out, 0, 1), ad::slice_cols(out, 1, 1)};
    if (effective && cfg_.use_scaling) h = {ad::mul_const(h.re, w.h_scale), ad::mul_const(h.im, w.h_scale)};
    return h;
  }

  /// P(s) on the window queries, (B R) x 1 each.
  CV eval_P(const WindowPlan<Scalar>& w, V p_coeffs) const {
    ad::Tape<Scalar>& tape = *p_coeffs.tape;
    V pt = ad::transpose(p_coeffs);  // P x B
    const Eigen::Index rows = w.pow_re.rows() * p_coeffs.rows();
    V re = ad::reshape(ad::matmul(tape.constant(w.pow_re), pt), rows, 1);
    V im = ad::reshape(ad::matmul(tape.constant(w.pow_im), pt), rows, 1);
    return {re, im};
  }

  /// Predictions for one window, B x length.
  V forecast_window(ad::Tape<Scalar>& tape, Params& params, const PreparedBatch<Scalar>& batch, int window,
                    V y_hist) const {
    const WindowPlan<Scalar>& w = batch.windows.at(static_cast<std::size_t>(window));
    const int n = batch.n_hist;
    V x_hist = tape.constant(batch.x.middleCols(w.start, n));
    Encoded enc = encode_history(tape, params, tape.constant(w.hist_t), x_hist, y_hist);
    CV p = eval_P(w, enc.p_coeffs);
    CV h = eval_H(tape, params, w, enc.z, false);
    CV v = ad::complex_add_const(p, w.x_re, w.x_im);
    CV y = ad::complex_mul(h, v);
    // Scaling is folded into the reconstruction weights.
    const Eigen::Index seg = cfg_.ilt.n_ilt + 1;
    V flat = ad::add(ad::segment_sum(y.re, w.w_re, seg), ad::segment_sum(y.im, w.w_nim, seg));
    return ad::transpose(ad::reshape(flat, w.length, batch.batch));
  }

  /// Full recurrent forecast, B x M.
  V forecast(ad::Tape<Scalar>& tape, Params& params, const PreparedBatch<Scalar>& batch) const {
    const int n = batch.n_hist;
    V y_hist = tape.constant(batch.y_hist);
    std::vector<V> parts;
    for (std::size_t q = 0; q < batch.windows.size(); ++q) {
      V pred = forecast_window(tape, params, batch, static_cast<int>(q), y_hist);
      parts.push_back(pred);
      if (q + 1 < batch.windows.size()) {
        V joined = ad::concat_cols(std::vector<V>{y_hist, pred});
        y_hist = ad::slice_cols(joined, joined.cols() - n, n);
      }
    }
    return parts.size() == 1 ? parts.front() : ad::concat_cols(parts);
  }

private:
  LpNetConfig cfg_;
  ad::Mlp<Scalar> trunk_, p_head_, z_head_, h_net_;
};

/// Model checkpoint: parameters plus a JSON sidecar of the structure.
void save_model(const LpNetConfig& cfg, const ad::ParameterSet<double>& params, const std::string& path);
/// Throws DataError naming the mismatched field if the stored structure
/// differs from `expected` (when given) or the parameter shapes disagree.
std::pair<LpNetConfig, ad::ParameterSet<double>> load_model(const std::string& path,
                                                            const LpNetConfig* expected = nullptr);

}  // namespace lpnet
