#include "lpnet/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace lpnet {

using json = nlohmann::json;

LpType parse_lp_type(const std::string& name) {
  if (name == "DLT" || name == "dlt") return LpType::Dlt;
  if (name == "FFLT" || name == "fflt") return LpType::Fflt;
  throw ConfigError("unknown LP_type '" + name + "' (expected DLT or FFLT)");
}

std::string lp_type_name(LpType type) { return type == LpType::Dlt ? "DLT" : "FFLT"; }

void LpNetConfig::validate() const {
  ilt.validate();
  auto positive = [](int v, const char* field) {
    if (v < 1) throw ConfigError(std::string("model: ") + field + " must be at least 1");
  };
  positive(enc_width, "d_enc");
  positive(enc_layers, "l_enc");
  positive(p_degree, "p");
  positive(latent_dim, "d_z");
  positive(q, "q");
  positive(h_width, "d_h");
  positive(h_layers, "l_h");
  positive(n_hist, "n_hist");
  if (!(kappa_h > 0.0)) throw ConfigError("model: kappa_h must be positive");
}

json model_config_to_json(const LpNetConfig& c) {
  return {{"lp_type", lp_type_name(c.lp_type)},
          {"alpha", c.ilt.alpha},
          {"zeta", c.ilt.zeta},
          {"epsilon", c.ilt.epsilon},
          {"c_shift", c.ilt.c_shift},
          {"n_ilt", c.ilt.n_ilt},
          {"d_enc", c.enc_width},
          {"l_enc", c.enc_layers},
          {"p", c.p_degree},
          {"d_z", c.latent_dim},
          {"kappa_h", c.kappa_h},
          {"q", c.q},
          {"act_h", ad::activation_name(c.h_activation)},
          {"d_h", c.h_width},
          {"l_h", c.h_layers},
          {"use_scaling", c.use_scaling},
          {"n_hist", c.n_hist}};
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

}  // namespace

LpNetConfig model_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  LpNetConfig c;
  std::string lp = lp_type_name(c.lp_type), act = ad::activation_name(c.h_activation);
  read_field(j, "lp_type", lp);
  read_field(j, "alpha", c.ilt.alpha);
  read_field(j, "zeta", c.ilt.zeta);
  read_field(j, "epsilon", c.ilt.epsilon);
  read_field(j, "c_shift", c.ilt.c_shift);
  read_field(j, "n_ilt", c.ilt.n_ilt);
  read_field(j, "d_enc", c.enc_width);
  read_field(j, "l_enc", c.enc_layers);
  read_field(j, "p", c.p_degree);
  read_field(j, "d_z", c.latent_dim);
  read_field(j, "kappa_h", c.kappa_h);
  read_field(j, "q", c.q);
  read_field(j, "act_h", act);
  read_field(j, "d_h", c.h_width);
  read_field(j, "l_h", c.h_layers);
  read_field(j, "use_scaling", c.use_scaling);
  read_field(j, "n_hist", c.n_hist);
  c.lp_type = parse_lp_type(lp);
  c.h_activation = ad::parse_activation(act);
  c.validate();
  return c;
}

Eigen::VectorXcd eval_P(Complex s, const Eigen::MatrixXd& coeffs) {
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(coeffs.rows());
  for (Eigen::Index i = coeffs.cols() - 1; i >= 0; --i) acc = (acc * s + coeffs.col(i).cast<Complex>()).eval();
  return acc;
}

Eigen::VectorXd normalize_axis(const Eigen::Ref<const Eigen::VectorXd>& t) {
  if (t.size() < 2) throw DomainError("grid: window needs at least two points");
  const double lo = t.minCoeff(), hi = t.maxCoeff();
  if (!(hi > lo)) throw DomainError("grid: degenerate window (t_max == t_min)");
  return ((t.array() - lo) * (2.0 / (hi - lo)) - 1.0).matrix();
}

Eigen::MatrixXd Grid::values() const { return Eigen::VectorXd::Ones(ilt_axis.size()) * time_axis.transpose(); }

Grid build_grid(const Eigen::Ref<const Eigen::VectorXd>& t_window, int n_ilt) {
  if (n_ilt < 1) throw ConfigError("grid: n_ilt must be at least 1");
  for (Eigen::Index i = 1; i < t_window.size(); ++i) {
    if (!(t_window[i] > t_window[i - 1])) throw DomainError("grid: window times must increase", i);
  }
  Grid g;
  g.time_axis = normalize_axis(t_window);
  g.ilt_axis.resize(n_ilt + 1);
  for (int k = 0; k <= n_ilt; ++k) g.ilt_axis[k] = 2.0 * k / n_ilt - 1.0;
  return g;
}

std::vector<int> window_lengths(int n_fore, int q) {
  if (q < 1) throw ConfigError("q must be at least 1");
  if (q > n_fore) throw ConfigError("q (" + std::to_string(q) + ") exceeds the forecast length (" +
                                    std::to_string(n_fore) + ")");
  const int step = (n_fore + q - 1) / q;
  std::vector<int> out;
  for (int start = 0; start < n_fore; start += step) out.push_back(std::min(step, n_fore - start));
  return out;
}

Eigen::VectorXd local_times(const Eigen::Ref<const Eigen::VectorXd>& t_window, double t_prev, double c_shift) {
  if (t_window.size() < 1) throw DomainError("window is empty");
  const double dt = t_window[0] - t_prev;
  if (!(dt > 0.0)) throw DomainError("window must start after the history");
  return (t_window.array() - t_window[0] + c_shift + dt).matrix();
}

LaplaceSignal forward_transform(LpType type, const Eigen::VectorXd& t_local, const Eigen::MatrixXd& x) {
  if (type == LpType::Dlt) {
    auto sig = std::make_shared<DltSignal>(t_local, x);
    return [sig](Complex s) { return (*sig)(s); };
  }
  auto sig = std::make_shared<FfltSignal>(t_local, x);
  return [sig](Complex s) { return (*sig)(s); };
}

Eigen::VectorXd forecast_window_frozen(const Eigen::VectorXd& t_local, const Eigen::VectorXd& x_window,
                                       const TransferFn& h, const InitialTermFn& p, LpType type,
                                       const IltConfig& ilt) {
  const LaplaceSignal x = forward_transform(type, t_local, x_window);
  const LaplaceSignal y = [&](Complex s) {
    Eigen::VectorXcd v = x(s);
    v[0] = h(s) * (v[0] + p(s));
    return v;
  };
  return ilt_fourier(y, t_local, ilt).col(0);
}

namespace detail {

BatchData prepare_batch_data(const LpNetConfig& cfg, const std::vector<const TimeSeriesSample*>& samples) {
  cfg.validate();
  if (samples.empty()) throw ShapeError("batch is empty");
  const TimeSeriesSample& first = *samples.front();
  const int n = first.n_hist, m = first.n_fore;
  if (n != cfg.n_hist)
    throw ShapeError("samples have " + std::to_string(n) + " history points, model expects " +
                     std::to_string(cfg.n_hist));
  const auto b = static_cast<Eigen::Index>(samples.size());
  BatchData d;
  d.batch = static_cast<int>(b);
  d.n_hist = n;
  d.n_fore = m;
  d.x.resize(b, n + m);
  d.y_hist.resize(b, n);
  d.y_fore.resize(b, m);
  for (Eigen::Index i = 0; i < b; ++i) {
    const TimeSeriesSample& s = *samples[static_cast<std::size_t>(i)];
    if (s.x.cols() != 1 || s.y.cols() != 1) throw ShapeError("LP-Net supports univariate samples only");
    if (s.n_hist != n || s.n_fore != m || s.t != first.t)
      throw ShapeError("samples in one batch must share the same time grid");
    d.x.row(i) = s.x.col(0).transpose();
    d.y_hist.row(i) = s.y.col(0).head(n).transpose();
    d.y_fore.row(i) = s.y.col(0).tail(m).transpose();
  }

  const Eigen::VectorXd& t = first.t;
  const int k1 = cfg.ilt.n_ilt + 1;
  int start = 0;
  for (int len : window_lengths(m, cfg.q)) {
    WindowData w;
    w.start = start;
    w.length = len;
    const int g0 = n + start;
    const Eigen::VectorXd t_window = t.segment(g0, len);
    w.t_local = local_times(t_window, t[g0 - 1], cfg.ilt.c_shift);
    const Eigen::VectorXd hist_norm = normalize_axis(t.segment(g0 - n, n));
    w.hist_t = Eigen::VectorXd::Ones(b) * hist_norm.transpose();

    const QuerySet queries = build_queries(w.t_local, cfg.ilt);
    const Eigen::Index r = static_cast<Eigen::Index>(len) * k1;
    Eigen::VectorXd grid_time = len >= 2 ? build_grid(t_window, cfg.ilt.n_ilt).time_axis
                                         : Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd grid_in(r, 2), pow_re(r, cfg.p_degree), pow_im(r, cfg.p_degree);
    Eigen::VectorXd w_re(r), w_nim(r), h_scale(r);
    for (int nn = 0; nn < len; ++nn) {
      // With scaling the assembled spectrum is reconstructed without the prefactor.
      const Eigen::VectorXcd wk = ilt_weights(w.t_local[nn], cfg.ilt, cfg.use_scaling);
      const double hs = cfg.use_scaling ? 1.0 / (scale_factor(w.t_local[nn], cfg.ilt) * cfg.kappa_h) : 1.0;
      for (int k = 0; k < k1; ++k) {
        const Eigen::Index j = static_cast<Eigen::Index>(nn) * k1 + k;
        grid_in(j, 0) = 2.0 * k / cfg.ilt.n_ilt - 1.0;
        grid_in(j, 1) = grid_time[nn];
        const Complex s = queries.points(k, nn);
        Complex sp(1.0, 0.0);
        for (int i = 0; i < cfg.p_degree; ++i) {
          pow_re(j, i) = sp.real();
          pow_im(j, i) = sp.imag();
          sp *= s;
        }
        w_re[j] = wk[k].real() * hs;
        w_nim[j] = -wk[k].imag() * hs;
        h_scale[j] = hs;
      }
    }
    w.pow_re = pow_re;
    w.pow_im = pow_im;
    w.grid_in = grid_in.replicate(b, 1);
    w.w_re = w_re.replicate(b, 1);
    w.w_nim = w_nim.replicate(b, 1);
    w.h_scale = h_scale.replicate(b, 1);
    w.x_re.resize(b * r, 1);
    w.x_im.resize(b * r, 1);
    for (Eigen::Index i = 0; i < b; ++i) {
      const LaplaceSignal xs =
          forward_transform(cfg.lp_type, w.t_local, d.x.row(i).segment(g0, len).transpose());
      for (int nn = 0; nn < len; ++nn) {
        for (int k = 0; k < k1; ++k) {
          const Eigen::Index j = i * r + static_cast<Eigen::Index>(nn) * k1 + k;
          const Complex v = xs(queries.points(k, nn))[0];
          w.x_re(j, 0) = v.real();
          w.x_im(j, 0) = v.imag();
        }
      }
    }
    d.windows.push_back(std::move(w));
    start += len;
  }
  return d;
}

}  // namespace detail

namespace {

std::string sidecar_path(const std::string& path) { return path + ".config.json"; }

}  // namespace

void save_model(const LpNetConfig& cfg, const ad::ParameterSet<double>& params, const std::string& path) {
  ad::save_checkpoint(params, path);
  std::ofstream out(sidecar_path(path), std::ios::binary);
  if (!out) throw DataError("cannot write '" + sidecar_path(path) + "'");
  out << model_config_to_json(cfg).dump(2) << '\n';
}

std::pair<LpNetConfig, ad::ParameterSet<double>> load_model(const std::string& path, const LpNetConfig* expected) {
  std::ifstream in(sidecar_path(path), std::ios::binary);
  if (!in) throw DataError("model sidecar not found: '" + sidecar_path(path) + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw DataError("'" + sidecar_path(path) + "': " + e.what());
  }
  LpNetConfig cfg = model_config_from_json(j);
  if (expected) {
    const json want = model_config_to_json(*expected);
    const json have = model_config_to_json(cfg);
    for (auto it = want.begin(); it != want.end(); ++it) {
      if (have.at(it.key()) != it.value())
        throw DataError("checkpoint structure mismatch in field '" + it.key() + "': checkpoint has " +
                        have.at(it.key()).dump() + ", config has " + it.value().dump());
    }
  }
  ad::ParameterSet<double> params = ad::load_checkpoint(path);
  ad::ParameterSet<double> shape;
  LpNet<double>(cfg).declare(shape);
  for (const auto& [name, p] : shape) {
    if (!params.contains(name)) throw DataError("checkpoint is missing parameter '" + name + "'");
    const auto& got = params.at(name).value;
    if (got.rows() != p.value.rows() || got.cols() != p.value.cols())
      throw DataError("checkpoint parameter '" + name + "' has shape " + std::to_string(got.rows()) + "x" +
                      std::to_string(got.cols()) + ", expected " + std::to_string(p.value.rows()) + "x" +
                      std::to_string(p.value.cols()));
  }
  if (params.size() != shape.size()) throw DataError("checkpoint has unexpected extra parameters");
  return {cfg, std::move(params)};
}

}  // namespace lpnet
