#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lpnet/error.hpp"
#include "lpnet/laplace.hpp"
#include "lpnet/model.hpp"
#include "lpnet/oracles.hpp"
#include "lpnet/systems.hpp"
#include "lpnet/training.hpp"

using namespace lpnet;
using json = nlohmann::json;

namespace {

constexpr int kUsage = 2, kData = 3, kNumeric = 4;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

// Named numeric columns of a CSV file with a header row.
std::map<std::string, std::vector<double>> read_columns(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  std::vector<std::string> names;
  {
    std::stringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) {
      if (!col.empty() && col.back() == '\r') col.pop_back();
      names.push_back(col);
    }
  }
  std::map<std::string, std::vector<double>> cols;
  for (const auto& n : names) cols[n];
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::stringstream ls(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ls, cell, ',')) {
      if (c >= names.size()) throw DataError(path + ":" + std::to_string(lineno) + ": too many columns");
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (cell.find_first_not_of(" \r", used) != std::string::npos) throw std::invalid_argument(cell);
        cols[names[c]].push_back(v);
      } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(lineno) + ": cannot parse '" + cell + "' as a number");
      }
      ++c;
    }
    if (c != names.size()) throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                                           std::to_string(names.size()) + " columns, got " + std::to_string(c));
  }
  return cols;
}

const std::vector<double>& column(const std::map<std::string, std::vector<double>>& cols, const std::string& name,
                                  const std::string& path) {
  auto it = cols.find(name);
  if (it == cols.end()) throw DataError(path + ":1: missing column '" + name + "'");
  return it->second;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json parse_params(const std::string& arg) {
  const std::string text = !arg.empty() && arg.front() == '{' ? arg : read_text(arg);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("--params: ") + e.what());
  }
}

template <typename T>
T param_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("params field '") + key + "' has the wrong type");
  }
}

IltConfig ilt_from_params(const json& j) {
  IltConfig c;
  c.alpha = param_or(j, "alpha", c.alpha);
  c.zeta = param_or(j, "zeta", c.zeta);
  c.epsilon = param_or(j, "epsilon", c.epsilon);
  c.n_ilt = param_or(j, "n_ilt", c.n_ilt);
  c.validate();
  return c;
}

std::vector<Complex> query_points(const json& j) {
  if (!j.contains("s")) throw ConfigError("params need an 's' list of query points");
  std::vector<Complex> out;
  for (const auto& v : j.at("s")) {
    if (v.is_number()) {
      out.emplace_back(v.get<double>(), 0.0);
    } else if (v.is_array() && v.size() == 2) {
      out.emplace_back(v[0].get<double>(), v[1].get<double>());
    } else {
      throw ConfigError("params field 's' must hold numbers or [re, im] pairs");
    }
  }
  return out;
}

Eigen::VectorXd ilt_times(const json& j, const std::string& in) {
  if (j.contains("times")) return to_vector(j.at("times").get<std::vector<double>>());
  if (j.contains("t_start")) {
    const int count = param_or(j, "count", 100);
    if (count < 2) throw ConfigError("params field 'count' must be at least 2");
    return Eigen::VectorXd::LinSpaced(count, j.at("t_start").get<double>(), param_or(j, "t_end", 1.0));
  }
  if (in.empty()) throw ConfigError("ilt needs times: 'times', 't_start'/'t_end'/'count' or --in with a t column");
  return to_vector(column(read_columns(in), "t", in));
}

Complex poly(const std::vector<double>& c, Complex s) {
  Complex acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * s + *it;
  return acc;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void run_transform(const std::string& in, const std::string& mode, const std::string& params_arg,
                   const std::string& out) {
  const json params = parse_params(params_arg);
  std::string csv;
  if (mode == "dlt" || mode == "fflt") {
    if (in.empty()) throw ConfigError("--in is required for forward transforms");
    const auto cols = read_columns(in);
    const Eigen::VectorXd t = to_vector(column(cols, "t", in));
    const Eigen::MatrixXd x = to_vector(column(cols, "x", in));
    const LaplaceSignal sig = forward_transform(mode == "dlt" ? LpType::Dlt : LpType::Fflt, t, x);
    csv = "re,im\n";
    for (Complex s : query_points(params)) {
      const Complex v = sig(s)[0];
      csv += fmt(v.real()) + "," + fmt(v.imag()) + "\n";
    }
  } else if (mode == "ilt") {
    const IltConfig cfg = ilt_from_params(params);
    Eigen::VectorXd t, y;
    if (params.contains("num") || params.contains("den")) {
      const auto num = param_or(params, "num", std::vector<double>{1.0});
      const auto den = param_or(params, "den", std::vector<double>{1.0});
      t = ilt_times(params, in);
      y = ilt_fourier([&](Complex s) { return Eigen::VectorXcd::Constant(1, poly(num, s) / poly(den, s)); }, t, cfg)
              .col(0);
    } else {
      // Sampled values Y(s_k(t)) given as rows t,k,re,im.
      if (in.empty()) throw ConfigError("ilt needs 'num'/'den' in --params or sampled values via --in");
      const auto cols = read_columns(in);
      const auto& tc = column(cols, "t", in);
      const auto& kc = column(cols, "k", in);
      const auto& re = column(cols, "re", in);
      const auto& im = column(cols, "im", in);
      std::map<double, std::map<int, Complex>> table;
      for (std::size_t r = 0; r < tc.size(); ++r) table[tc[r]][static_cast<int>(kc[r])] = Complex(re[r], im[r]);
      t.resize(static_cast<Eigen::Index>(table.size()));
      y.resize(t.size());
      Eigen::Index i = 0;
      for (const auto& [tt, terms] : table) {
        const Eigen::VectorXcd w = ilt_weights(tt, cfg);
        double acc = 0.0;
        for (int k = 0; k <= cfg.n_ilt; ++k) {
          auto it = terms.find(k);
          if (it == terms.end())
            throw DataError(in + ": missing term k=" + std::to_string(k) + " for t=" + fmt(tt));
          acc += (w[k] * it->second).real();
        }
        t[i] = tt;
        y[i++] = acc;
      }
    }
    csv = "t,y\n";
    for (Eigen::Index i = 0; i < t.size(); ++i) csv += fmt(t[i]) + "," + fmt(y[i]) + "\n";
  } else {
    throw ConfigError("--mode must be dlt, fflt or ilt");
  }
  write_text(out, csv);
}

int run_oracles(const IltConfig& corpus_cfg) {
  corpus_cfg.validate();
  int failed = 0;
  auto report = [&](const std::string& group, const OracleResult& r) {
    std::printf("%s %-14s %-34s error %.3e (tol %.1e)\n", r.pass ? "PASS" : "FAIL", group.c_str(), r.name.c_str(),
                r.error, r.tolerance);
    if (!r.pass) ++failed;
  };
  for (const auto& r : check_transform_pairs(corpus_cfg, 1e-3)) report("transform-pair", r);
  for (const auto& r : check_prescaled_equivalence(corpus_cfg, 1e-10)) report("prescaled", r);
  for (ForcingKind kind : {ForcingKind::Sigmoid, ForcingKind::DecayingSine, ForcingKind::Triangular}) {
    const double rmse = smd_pipeline_rmse(smd_oracle_forcing(kind), oracle_ilt_config());
    report("smd-pipeline", {forcing_kind_name(kind), rmse, 1e-2, rmse < 1e-2});
  }
  std::printf("%d failed\n", failed);
  return failed == 0 ? 0 : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LP-Net: Laplace-domain forecasting of forced dynamical systems"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Simulate a benchmark dataset and write it as CSV");
  int gen_id = 1;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--dataset", gen_id, "Dataset id")->required()->check(CLI::Range(1, 8));
  gen->add_option("--seed", gen_seed, "Dataset seed")->required();
  gen->add_option("--out", gen_out, "Output root directory")->required();

  auto* train = app.add_subcommand("train", "Train one model per seed");
  std::string train_config, train_out;
  std::vector<std::uint64_t> train_seeds_arg;
  int train_epochs = -1;
  bool train_verbose = false;
  train->add_option("--config", train_config, "Run config JSON")->required();
  train->add_option("--seeds", train_seeds_arg, "Seeds (overrides the config)")->delimiter(',');
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--epochs", train_epochs, "Epochs (overrides the config)")->check(CLI::NonNegativeNumber);
  train->add_flag("--verbose", train_verbose, "Log progress to stderr");

  auto* eval = app.add_subcommand("evaluate", "MSE of a checkpoint on one split");
  std::string eval_ckpt, eval_config, eval_split = "test";
  eval->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
  eval->add_option("--config", eval_config, "Run config JSON")->required();
  eval->add_option("--split", eval_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

  auto* tr = app.add_subcommand("transform", "Forward or inverse Laplace transform of CSV data");
  std::string tr_in, tr_mode, tr_params = "{}", tr_out;
  tr->add_option("--in", tr_in, "Input CSV");
  tr->add_option("--mode", tr_mode, "dlt, fflt or ilt")->required()->check(CLI::IsMember({"dlt", "fflt", "ilt"}));
  tr->add_option("--params", tr_params, "JSON text or file");
  tr->add_option("--out", tr_out, "Output CSV")->required();

  auto* orc = app.add_subcommand("oracle-check", "Run the analytic reference checks");
  IltConfig orc_cfg = oracle_ilt_config();
  orc_cfg.n_ilt = 32768;
  orc->add_option("--alpha", orc_cfg.alpha, "Contour shift for the transform-pair corpus");
  orc->add_option("--zeta", orc_cfg.zeta, "Contour zeta for the transform-pair corpus");
  orc->add_option("--epsilon", orc_cfg.epsilon, "Contour epsilon for the transform-pair corpus");
  orc->add_option("--n-ilt", orc_cfg.n_ilt, "Terms for the transform-pair corpus");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (*gen) {
      const Dataset ds = build_dataset(gen_id, gen_seed);
      std::cout << write_dataset(ds, gen_out) << '\n';
    } else if (*train) {
      RunConfig cfg = load_run_config(train_config);
      if (!train_seeds_arg.empty()) cfg.seeds = train_seeds_arg;
      if (train_epochs >= 0) cfg.epochs = train_epochs;
      const json summary = train_seeds(cfg, train_out, train_verbose);
      for (const auto& r : summary.at("runs"))
        std::printf("seed %llu test_mse %.6e\n", r.at("seed").get<unsigned long long>(), r.at("test_mse").get<double>());
      std::printf("test_mse %.3e +- %.3e (median %.3e, %zu seeds)\n", summary.at("test_mse_mean").get<double>(),
                  summary.at("test_mse_std").get<double>(), summary.at("test_mse_median").get<double>(),
                  summary.at("runs").size());
    } else if (*eval) {
      const RunConfig cfg = load_run_config(eval_config);
      const auto [model_cfg, params] = load_model(eval_ckpt, &cfg.model);
      const Dataset ds = load_run_dataset(cfg);
      std::printf("%s_mse %.17g\n", eval_split.c_str(), evaluate(cfg, params, ds.split(eval_split)));
    } else if (*tr) {
      run_transform(tr_in, tr_mode, tr_params, tr_out);
    } else if (*orc) {
      return run_oracles(orc_cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "lpnet " << stage << ": config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ShapeError& e) {
    std::cerr << "lpnet " << stage << ": shape error: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "lpnet " << stage << ": domain error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "lpnet " << stage << ": data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "lpnet " << stage << ": numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "lpnet " << stage << ": data error: " << e.what() << '\n';
    return kData;
  }
  return 0;
}
