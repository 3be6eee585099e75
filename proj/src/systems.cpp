#include "lpnet/systems.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lpnet/error.hpp"

namespace lpnet {

namespace fs = std::filesystem;
using json = nlohmann::json;
using std::numbers::pi;

// ---------------------------------------------------------------------------
// Forcing

ForcingKind parse_forcing_kind(const std::string& name) {
  if (name == "sigmoid") return ForcingKind::Sigmoid;
  if (name == "decaying_sine") return ForcingKind::DecayingSine;
  if (name == "triangular") return ForcingKind::Triangular;
  if (name == "decaying_sinusoid") return ForcingKind::DecayingSinusoid;
  throw ConfigError("unknown forcing kind '" + name + "'");
}

std::string forcing_kind_name(ForcingKind kind) {
  switch (kind) {
    case ForcingKind::Sigmoid:
      return "sigmoid";
    case ForcingKind::DecayingSine:
      return "decaying_sine";
    case ForcingKind::Triangular:
      return "triangular";
    case ForcingKind::DecayingSinusoid:
      return "decaying_sinusoid";
  }
  return "sigmoid";
}

double ForcingSignal::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end())
    throw ConfigError("forcing '" + forcing_kind_name(kind) + "' is missing parameter '" + name + "'");
  return it->second;
}

double ForcingSignal::operator()(double t) const {
  const double a = param("amplitude");
  switch (kind) {
    case ForcingKind::Sigmoid:
      return a / (1.0 + std::exp(-param("kappa") * std::sin(2.0 * pi * t / param("period"))));
    case ForcingKind::DecayingSine:
      return a * std::exp(-param("decay") * t) * std::sin(param("omega") * t);
    case ForcingKind::Triangular: {
      const double u = t / param("period") + 0.75;
      const double frac = u - std::floor(u);
      return a * (4.0 * std::abs(frac - 0.5) - 1.0);
    }
    case ForcingKind::DecayingSinusoid:
      return a * std::exp(-param("decay") * t) * std::sin(param("omega") * t + param("phase"));
  }
  throw ConfigError("unknown forcing kind");
}

double eval_forcing(const ForcingSignal& signal, double t) {
  if (!(t >= 0.0)) throw DomainError("forcing: t must be non-negative");
  return signal(t);
}

// ---------------------------------------------------------------------------
// Systems

SystemKind parse_system_kind(const std::string& name) {
  if (name == "smd") return SystemKind::Smd;
  if (name == "duffing") return SystemKind::Duffing;
  if (name == "lorenz") return SystemKind::Lorenz;
  if (name == "pendulum") return SystemKind::Pendulum;
  if (name == "mackey_glass") return SystemKind::MackeyGlass;
  throw ConfigError("unknown system '" + name + "'");
}

std::string system_kind_name(SystemKind kind) {
  switch (kind) {
    case SystemKind::Smd:
      return "smd";
    case SystemKind::Duffing:
      return "duffing";
    case SystemKind::Lorenz:
      return "lorenz";
    case SystemKind::Pendulum:
      return "pendulum";
    case SystemKind::MackeyGlass:
      return "mackey_glass";
  }
  return "smd";
}

int SystemSpec::state_dim() const {
  switch (system) {
    case SystemKind::Lorenz:
      return 3;
    case SystemKind::MackeyGlass:
      return 1;
    default:
      return 2;
  }
}

double SystemSpec::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw ConfigError("system '" + system_kind_name(system) + "' is missing '" + name + "'");
  return it->second;
}

void SystemSpec::validate() const {
  auto positive = [&](const char* name) {
    if (!(param(name) > 0.0)) throw ConfigError(std::string("system parameter '") + name + "' must be positive");
  };
  auto non_negative = [&](const char* name) {
    if (!(param(name) >= 0.0)) throw ConfigError(std::string("system parameter '") + name + "' must be >= 0");
  };
  switch (system) {
    case SystemKind::Smd:
      positive("m");
      non_negative("c");
      positive("k");
      break;
    case SystemKind::Duffing:
      positive("m");
      non_negative("c");
      positive("k1");
      non_negative("k3");
      break;
    case SystemKind::Lorenz:
      positive("sigma");
      positive("rho");
      positive("beta");
      break;
    case SystemKind::Pendulum:
      positive("g_over_l");
      non_negative("c");
      break;
    case SystemKind::MackeyGlass:
      if (param("tau") < 0.0) throw ConfigError("mackey_glass: tau must be non-negative");
      positive("tau");
      positive("beta");
      positive("gamma");
      positive("n");
      break;
  }
  if (initial_state.size() != state_dim())
    throw ConfigError("system '" + system_kind_name(system) + "' expects " + std::to_string(state_dim()) +
                      " initial state entries, got " + std::to_string(initial_state.size()));
  if (output_index < 0 || output_index >= state_dim()) throw ConfigError("output_index out of range");
}

Eigen::VectorXd SystemSpec::rhs(const Eigen::VectorXd& s, double x) const {
  Eigen::VectorXd d(s.size());
  switch (system) {
    case SystemKind::Smd: {
      const double m = param("m"), c = param("c"), k = param("k");
      d << s[1], (x - c * s[1] - k * s[0]) / m;
      break;
    }
    case SystemKind::Duffing: {
      const double m = param("m"), c = param("c"), k1 = param("k1"), k3 = param("k3");
      d << s[1], (x - c * s[1] - k1 * s[0] - k3 * s[0] * s[0] * s[0]) / m;
      break;
    }
    case SystemKind::Lorenz: {
      // state = (s_x, y, s_z); the forcing enters the s_z equation with a minus sign
      const double sg = param("sigma"), rho = param("rho"), beta = param("beta");
      d << sg * (s[1] - s[0]), s[0] * (rho - s[2]) - s[1], s[0] * s[1] - beta * s[2] - x;
      break;
    }
    case SystemKind::Pendulum: {
      const double c = param("c"), gl = param("g_over_l");
      d << s[1], x - c * s[1] - gl * std::sin(s[0]);
      break;
    }
    case SystemKind::MackeyGlass:
      throw ConfigError("mackey_glass has no delay-free right-hand side; use integrate_dde");
  }
  return d;
}

Eigen::VectorXd uniform_grid(double horizon, int count) {
  if (count < 2 || !(horizon > 0.0)) throw ConfigError("uniform_grid: need count >= 2 and horizon > 0");
  Eigen::VectorXd t(count);
  const double dt = horizon / static_cast<double>(count);
  for (int i = 0; i < count; ++i) t[i] = dt * i;
  return t;
}

namespace {

double grid_step(const Eigen::VectorXd& t_grid) {
  if (t_grid.size() < 2) throw DomainError("integrate: grid needs at least two points");
  const double dt = t_grid[1] - t_grid[0];
  if (!(dt > 0.0)) throw DomainError("integrate: grid must be increasing");
  for (Eigen::Index i = 1; i + 1 < t_grid.size(); ++i) {
    if (std::abs((t_grid[i + 1] - t_grid[i]) - dt) > 1e-9 * dt) throw DomainError("integrate: grid must be uniform", i);
  }
  return dt;
}

void check_finite(const Eigen::VectorXd& state, Eigen::Index step) {
  if (!state.allFinite()) throw NumericError("integration blew up at step " + std::to_string(step));
}

TimeSeriesSample assemble(const Eigen::VectorXd& t_grid, const ForcingFn& forcing, Eigen::VectorXd y, int n_hist) {
  if (n_hist < 1 || n_hist >= t_grid.size()) throw ConfigError("n_hist must lie in [1, grid size)");
  TimeSeriesSample s;
  s.t = t_grid;
  s.x.resize(t_grid.size(), 1);
  for (Eigen::Index i = 0; i < t_grid.size(); ++i) s.x(i, 0) = forcing(t_grid[i]);
  s.y = std::move(y);
  s.n_hist = n_hist;
  s.n_fore = static_cast<int>(t_grid.size()) - n_hist;
  return s;
}

}  // namespace

Eigen::MatrixXd integrate_states(const SystemSpec& spec, const ForcingFn& forcing, const Eigen::VectorXd& t_grid,
                                 int substeps) {
  spec.validate();
  if (spec.system == SystemKind::MackeyGlass) throw ConfigError("integrate_states: use integrate_dde for mackey_glass");
  if (substeps < 1) throw ConfigError("substeps must be positive");
  const double h = grid_step(t_grid) / substeps;
  Eigen::MatrixXd states(t_grid.size(), spec.state_dim());
  Eigen::VectorXd s = spec.initial_state;
  states.row(0) = s.transpose();
  for (Eigen::Index i = 0; i + 1 < t_grid.size(); ++i) {
    for (int j = 0; j < substeps; ++j) {
      const double t = t_grid[i] + j * h;
      const double xm = forcing(t + 0.5 * h);
      const Eigen::VectorXd k1 = spec.rhs(s, forcing(t));
      const Eigen::VectorXd k2 = spec.rhs(s + 0.5 * h * k1, xm);
      const Eigen::VectorXd k3 = spec.rhs(s + 0.5 * h * k2, xm);
      const Eigen::VectorXd k4 = spec.rhs(s + h * k3, forcing(t + h));
      s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    check_finite(s, i + 1);
    states.row(i + 1) = s.transpose();
  }
  return states;
}

TimeSeriesSample integrate_rk4(const SystemSpec& spec, const ForcingFn& forcing, const Eigen::VectorXd& t_grid,
                               int n_hist, int substeps) {
  const Eigen::MatrixXd states = integrate_states(spec, forcing, t_grid, substeps);
  return assemble(t_grid, forcing, states.col(spec.output_index), n_hist);
}

TimeSeriesSample integrate_dde(const SystemSpec& spec, const ForcingFn& forcing, const Eigen::VectorXd& t_grid,
                               int n_hist, int substeps) {
  if (spec.system != SystemKind::MackeyGlass) throw ConfigError("integrate_dde: only mackey_glass has a delay");
  spec.validate();
  if (substeps < 1) throw ConfigError("substeps must be positive");
  const double beta = spec.param("beta"), gamma = spec.param("gamma"), tau = spec.param("tau"), n = spec.param("n");
  const double t0 = t_grid[0];
  const double h = grid_step(t_grid) / substeps;
  const double y_hist = spec.initial_state[0];

  // Stored trajectory on the substep lattice t0 + j h.
  std::vector<double> stored;
  stored.reserve(static_cast<std::size_t>((t_grid.size() - 1) * substeps + 1));
  double y = y_hist;
  stored.push_back(y);

  auto delayed = [&](double t) {
    const double td = t - tau;
    if (td <= t0) return y_hist;
    const double pos = (td - t0) / h;
    auto j = static_cast<std::size_t>(pos);
    if (j + 1 >= stored.size()) return stored.back();
    const double w = pos - static_cast<double>(j);
    return (1.0 - w) * stored[j] + w * stored[j + 1];
  };
  auto f = [&](double t, double yv) {
    const double yd = delayed(t);
    return beta * yd / (1.0 + std::pow(yd, n)) - gamma * yv + forcing(t);
  };

  Eigen::VectorXd out(t_grid.size());
  out[0] = y;
  for (Eigen::Index i = 0; i + 1 < t_grid.size(); ++i) {
    for (int j = 0; j < substeps; ++j) {
      const double t = t0 + static_cast<double>(i * substeps + j) * h;
      const double k1 = f(t, y);
      const double k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
      const double k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
      const double k4 = f(t + h, y + h * k3);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      stored.push_back(y);
    }
    if (!std::isfinite(y)) throw NumericError("integration blew up at step " + std::to_string(i + 1));
    out[i + 1] = y;
  }
  return assemble(t_grid, forcing, out, n_hist);
}

// ---------------------------------------------------------------------------
// Datasets

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  // splitmix64 over a mixed key
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ stream) ^ index);
}

DatasetInfo dataset_info(int ds_id) {
  switch (ds_id) {
    case 1:
      return {1, "SMD", 10, 5, 15, 20.0};
    case 2:
      return {2, "Duffing c=0", 200, 50, 130, 20.47};
    case 3:
      return {3, "Duffing c=0.5", 200, 50, 130, 20.47};
    case 4:
      return {4, "Lorenz rho=5", 200, 50, 130, 20.47};
    case 5:
      return {5, "Lorenz rho=10", 200, 50, 130, 20.47};
    case 6:
      return {6, "Pendulum c=0", 200, 50, 130, 20.47};
    case 7:
      return {7, "Pendulum c=0.5", 200, 50, 130, 20.47};
    case 8:
      return {8, "Mackey-Glass", 10, 5, 5, 20.0};
    default:
      throw ConfigError("dataset id must be in 1..8, got " + std::to_string(ds_id));
  }
}

SystemSpec dataset_system(int ds_id) {
  SystemSpec s;
  switch (ds_id) {
    case 1:
      s.system = SystemKind::Smd;
      s.params = {{"m", 1.0}, {"c", 0.5}, {"k", 5.0}};
      break;
    case 2:
    case 3:
      s.system = SystemKind::Duffing;
      s.params = {{"m", 1.0}, {"c", ds_id == 2 ? 0.0 : 0.5}, {"k1", 1.0}, {"k3", 1.0}};
      break;
    case 4:
    case 5:
      s.system = SystemKind::Lorenz;
      s.params = {{"sigma", 10.0}, {"beta", 8.0 / 3.0}, {"rho", ds_id == 4 ? 5.0 : 10.0}};
      break;
    case 6:
    case 7:
      s.system = SystemKind::Pendulum;
      s.params = {{"g_over_l", 1.0}, {"c", ds_id == 6 ? 0.0 : 0.5}};
      break;
    case 8:
      s.system = SystemKind::MackeyGlass;
      s.params = {{"beta", 0.1}, {"gamma", 0.2}, {"tau", 7.0}, {"n", 2.0}};
      break;
    default:
      throw ConfigError("dataset id must be in 1..8, got " + std::to_string(ds_id));
  }
  s.initial_state = Eigen::VectorXd::Zero(s.state_dim());
  if (s.system == SystemKind::Lorenz) {
    s.initial_state[0] = 1.0;
    s.output_index = 1;
  }
  return s;
}

namespace {

ForcingSignal draw_forcing(ForcingKind kind, double amplitude_scale, std::mt19937_64& rng) {
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  ForcingSignal f;
  f.kind = kind;
  f.params["amplitude"] = amplitude_scale * uni(0.5, 1.5);
  switch (kind) {
    case ForcingKind::Sigmoid:
      f.params["period"] = uni(2.0, 6.0);
      f.params["kappa"] = uni(2.0, 6.0);
      break;
    case ForcingKind::DecayingSine:
      f.params["omega"] = uni(0.5, 3.0);
      f.params["decay"] = uni(0.05, 0.3);
      break;
    case ForcingKind::Triangular:
      f.params["period"] = uni(2.0, 6.0);
      break;
    case ForcingKind::DecayingSinusoid:
      f.params["omega"] = uni(0.5, 3.0);
      f.params["decay"] = uni(0.05, 0.5);
      f.params["phase"] = uni(0.0, 2.0 * pi);
      break;
  }
  return f;
}

TimeSeriesSample simulate(const SystemSpec& spec, const ForcingFn& forcing, const Eigen::VectorXd& grid, int n_hist,
                          int substeps) {
  if (spec.system == SystemKind::MackeyGlass) return integrate_dde(spec, forcing, grid, n_hist, substeps);
  return integrate_rk4(spec, forcing, grid, n_hist, substeps);
}

}  // namespace

const std::vector<SampleRecord>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

Dataset build_dataset(int ds_id, std::uint64_t seed) {
  const DatasetInfo info = dataset_info(ds_id);
  Dataset ds;
  ds.id = ds_id;
  ds.name = info.name;
  ds.system = dataset_system(ds_id);
  ds.seed = seed;
  ds.horizon = info.horizon;
  const Eigen::VectorXd grid = uniform_grid(ds.horizon, ds.n_hist + ds.n_fore);

  const bool own_data = (ds.system.system == SystemKind::Smd || ds.system.system == SystemKind::MackeyGlass);
  const double amplitude_scale = ds.system.system == SystemKind::MackeyGlass ? 0.2 : 1.0;
  struct SplitPlan {
    std::vector<SampleRecord>* out;
    int count;
    ForcingKind kind;
  };
  const SplitPlan plan[] = {
      {&ds.train, info.n_train, own_data ? ForcingKind::Sigmoid : ForcingKind::DecayingSinusoid},
      {&ds.val, info.n_val, own_data ? ForcingKind::DecayingSine : ForcingKind::DecayingSinusoid},
      {&ds.test, info.n_test, own_data ? ForcingKind::Triangular : ForcingKind::DecayingSinusoid},
  };
  for (std::uint64_t split = 0; split < 3; ++split) {
    const SplitPlan& p = plan[split];
    p.out->reserve(static_cast<std::size_t>(p.count));
    for (int i = 0; i < p.count; ++i) {
      SampleRecord rec;
      rec.seed = derive_seed(seed, split, static_cast<std::uint64_t>(i));
      std::mt19937_64 rng(rec.seed);
      rec.forcing = draw_forcing(p.kind, amplitude_scale, rng);
      rec.sample = simulate(ds.system, rec.forcing, grid, ds.n_hist, ds.substeps);
      p.out->push_back(std::move(rec));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json forcing_to_json(const ForcingSignal& f) { return {{"kind", forcing_kind_name(f.kind)}, {"params", f.params}}; }

ForcingSignal forcing_from_json(const json& j) {
  ForcingSignal f;
  f.kind = parse_forcing_kind(j.at("kind").get<std::string>());
  f.params = j.at("params").get<std::map<std::string, double>>();
  return f;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open '" + p.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + p.string() + "' for writing");
  out << text;
  if (!out) throw DataError("write to '" + p.string() + "' failed");
}

}  // namespace

std::string sample_to_csv(const TimeSeriesSample& s) {
  std::string out = "t";
  const auto dx = s.x.cols(), dy = s.y.cols();
  for (Eigen::Index d = 0; d < dx; ++d) out += dx == 1 ? ",x" : ",x_" + std::to_string(d);
  for (Eigen::Index d = 0; d < dy; ++d) out += dy == 1 ? ",y" : ",y_" + std::to_string(d);
  out += '\n';
  for (Eigen::Index i = 0; i < s.t.size(); ++i) {
    out += fmt17(s.t[i]);
    for (Eigen::Index d = 0; d < dx; ++d) out += ',' + fmt17(s.x(i, d));
    for (Eigen::Index d = 0; d < dy; ++d) out += ',' + fmt17(s.y(i, d));
    out += '\n';
  }
  return out;
}

TimeSeriesSample sample_from_csv(const std::string& text, int n_hist, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError(origin + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) {
      if (!col.empty() && col.back() == '\r') col.pop_back();
      header.push_back(col);
    }
  }
  if (header.empty() || header[0] != "t") throw DataError(origin + ":1: header must start with 't'");
  std::vector<int> xs, ys;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] == "x" || header[c].rfind("x_", 0) == 0) {
      xs.push_back(static_cast<int>(c));
    } else if (header[c] == "y" || header[c].rfind("y_", 0) == 0) {
      ys.push_back(static_cast<int>(c));
    } else {
      throw DataError(origin + ":1: unexpected column '" + header[c] + "'");
    }
  }
  if (xs.empty() || ys.empty()) throw DataError(origin + ":1: need x and y columns");
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<double> vals;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (used != cell.size() && !(used + 1 == cell.size() && cell.back() == '\r')) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DataError(origin + ":" + std::to_string(lineno) + ": malformed number '" + cell + "'");
      }
    }
    if (vals.size() != header.size())
      throw DataError(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                      " columns, got " + std::to_string(vals.size()));
    rows.push_back(std::move(vals));
  }
  TimeSeriesSample s;
  const auto n = static_cast<Eigen::Index>(rows.size());
  s.t.resize(n);
  s.x.resize(n, static_cast<Eigen::Index>(xs.size()));
  s.y.resize(n, static_cast<Eigen::Index>(ys.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    s.t[i] = r[0];
    for (std::size_t d = 0; d < xs.size(); ++d) s.x(i, static_cast<Eigen::Index>(d)) = r[static_cast<std::size_t>(xs[d])];
    for (std::size_t d = 0; d < ys.size(); ++d) s.y(i, static_cast<Eigen::Index>(d)) = r[static_cast<std::size_t>(ys[d])];
    if (i > 0 && !(s.t[i] > s.t[i - 1])) throw DataError(origin + ":" + std::to_string(i + 2) + ": t is not increasing");
  }
  if (n_hist < 1 || n_hist >= n) throw DataError(origin + ": history length does not fit the sample");
  s.n_hist = n_hist;
  s.n_fore = static_cast<int>(n) - n_hist;
  return s;
}

std::string write_dataset(const Dataset& ds, const std::string& root) {
  const fs::path dir = fs::path(root) / ("ds" + std::to_string(ds.id));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());

  json manifest;
  manifest["dataset_id"] = ds.id;
  manifest["name"] = ds.name;
  manifest["seed"] = ds.seed;
  manifest["N"] = ds.n_hist;
  manifest["M"] = ds.n_fore;
  manifest["T"] = ds.horizon;
  manifest["dt"] = ds.dt();
  manifest["substeps"] = ds.substeps;
  manifest["system"] = {{"kind", system_kind_name(ds.system.system)},
                        {"params", ds.system.params},
                        {"initial_state", std::vector<double>(ds.system.initial_state.data(),
                                                              ds.system.initial_state.data() +
                                                                  ds.system.initial_state.size())},
                        {"output_index", ds.system.output_index}};
  for (const char* split : {"train", "val", "test"}) {
    fs::create_directories(dir / split, ec);
    if (ec) throw DataError("cannot create '" + (dir / split).string() + "': " + ec.message());
    json entries = json::array();
    const auto& records = ds.split(split);
    for (std::size_t i = 0; i < records.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "sample_%03zu.csv", i);
      const std::string rel = std::string(split) + "/" + name;
      write_file(dir / rel, sample_to_csv(records[i].sample));
      entries.push_back({{"file", rel}, {"seed", records[i].seed}, {"forcing", forcing_to_json(records[i].forcing)}});
    }
    manifest["splits"][split] = entries;
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return dir.string();
}

Dataset read_dataset(const std::string& dir_name) {
  const fs::path dir(dir_name);
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw DataError("dataset manifest not found: '" + mpath.string() + "'");
  json m;
  try {
    m = json::parse(read_file(mpath));
  } catch (const json::parse_error& e) {
    throw DataError("'" + mpath.string() + "': " + e.what());
  }
  Dataset ds;
  try {
    ds.id = m.at("dataset_id").get<int>();
    ds.name = m.at("name").get<std::string>();
    ds.seed = m.at("seed").get<std::uint64_t>();
    ds.n_hist = m.at("N").get<int>();
    ds.n_fore = m.at("M").get<int>();
    ds.horizon = m.at("T").get<double>();
    ds.substeps = m.value("substeps", 10);
    const json& sys = m.at("system");
    ds.system.system = parse_system_kind(sys.at("kind").get<std::string>());
    ds.system.params = sys.at("params").get<std::map<std::string, double>>();
    const auto init = sys.at("initial_state").get<std::vector<double>>();
    ds.system.initial_state = Eigen::Map<const Eigen::VectorXd>(init.data(), static_cast<Eigen::Index>(init.size()));
    ds.system.output_index = sys.at("output_index").get<int>();
    for (const char* split : {"train", "val", "test"}) {
      auto& out = const_cast<std::vector<SampleRecord>&>(ds.split(split));
      for (const json& e : m.at("splits").at(split)) {
        SampleRecord rec;
        const std::string rel = e.at("file").get<std::string>();
        rec.seed = e.at("seed").get<std::uint64_t>();
        rec.forcing = forcing_from_json(e.at("forcing"));
        rec.sample = sample_from_csv(read_file(dir / rel), ds.n_hist, (dir / rel).string());
        if (rec.sample.n_fore != ds.n_fore) throw DataError("'" + (dir / rel).string() + "': forecast length mismatch");
        out.push_back(std::move(rec));
      }
    }
  } catch (const json::exception& e) {
    throw DataError("'" + mpath.string() + "': " + e.what());
  }
  return ds;
}

}  // namespace lpnet
