#include "lpnet/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace lpnet {

using json = nlohmann::json;

namespace {

struct PresetRow {
  LpType lp;
  double alpha_e3, zeta, c_shift;
  int n_ilt, d_enc, l_enc, p;
  double kappa, lr_e3;
  int q;
  ad::Activation act;
  int d_h, l_h;
};

const PresetRow kPresets[8] = {
    {LpType::Dlt, 4.51, 2.0, 2.7, 41, 56, 2, 3, 450, 4.40, 3, ad::Activation::Tanh, 192, 4},
    {LpType::Dlt, 2.26, 2.7, 1.5, 37, 64, 4, 1, 330, 1.86, 2, ad::Activation::Tanh, 144, 2},
    {LpType::Fflt, 9.81, 2.5, 4.5, 41, 40, 2, 3, 270, 3.98, 4, ad::Activation::Softsign, 96, 2},
    {LpType::Dlt, 6.46, 1.5, 4.4, 43, 24, 1, 2, 100, 3.73, 5, ad::Activation::Silu, 144, 4},
    {LpType::Fflt, 3.46, 2.7, 7.4, 67, 48, 1, 3, 440, 0.74, 2, ad::Activation::Silu, 160, 6},
    {LpType::Fflt, 2.81, 2.1, 4.3, 67, 56, 1, 2, 380, 2.5, 1, ad::Activation::Silu, 64, 6},
    {LpType::Fflt, 9.71, 1.7, 8.2, 75, 20, 5, 3, 400, 3.95, 8, ad::Activation::Softsign, 48, 6},
    {LpType::Fflt, 7.26, 2.6, 9.6, 79, 16, 2, 3, 110, 5.88, 10, ad::Activation::Silu, 64, 1},
};

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

const std::set<std::string> kRunKeys = {"dataset", "data_dir", "data_seed", "lr", "epochs", "seeds", "chunk",
                                        "clip_norm"};

void tune_allocator() {
#if defined(__GLIBC__)
  // Large tape buffers are reused between epochs instead of being returned
  // to the kernel and faulted in again.
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}

std::vector<PreparedBatch<float>> prepare_chunks(const RunConfig& cfg, const std::vector<SampleRecord>& split) {
  std::vector<PreparedBatch<float>> out;
  const std::size_t chunk = static_cast<std::size_t>(cfg.chunk);
  for (std::size_t i = 0; i < split.size(); i += chunk) {
    std::vector<const TimeSeriesSample*> samples;
    for (std::size_t j = i; j < std::min(split.size(), i + chunk); ++j) samples.push_back(&split[j].sample);
    out.push_back(prepare_batch<float>(cfg.model, samples));
  }
  return out;
}

double chunk_sse(const ad::Matrix<float>& pred, const ad::Matrix<float>& target) {
  return (pred.cast<double>() - target.cast<double>()).squaredNorm();
}

double total_points(const std::vector<PreparedBatch<float>>& chunks) {
  double n = 0.0;
  for (const auto& c : chunks) n += static_cast<double>(c.y_fore.size());
  return n;
}

double evaluate_chunks(const LpNet<float>& net, ad::ParameterSet<float>& params,
                       const std::vector<PreparedBatch<float>>& chunks) {
  double sse = 0.0;
  for (const auto& c : chunks) {
    ad::Tape<float> tape;
    sse += chunk_sse(net.forecast(tape, params, c).value(), c.y_fore);
  }
  return sse / total_points(chunks);
}

}  // namespace

void RunConfig::validate() const {
  if (dataset_id < 1 || dataset_id > 8) throw ConfigError("config field 'dataset' must be in 1..8");
  model.validate();
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("config field 'lr' must be positive");
  if (epochs < 0) throw ConfigError("config field 'epochs' must be non-negative");
  if (seeds.empty()) throw ConfigError("config field 'seeds' must not be empty");
  if (chunk < 1) throw ConfigError("config field 'chunk' must be at least 1");
  if (!(clip_norm > 0.0)) throw ConfigError("config field 'clip_norm' must be positive");
}

RunConfig preset_config(int dataset_id) {
  if (dataset_id < 1 || dataset_id > 8) throw ConfigError("config field 'dataset' must be in 1..8");
  const PresetRow& r = kPresets[dataset_id - 1];
  RunConfig c;
  c.dataset_id = dataset_id;
  c.model.lp_type = r.lp;
  c.model.ilt.alpha = r.alpha_e3 * 1e-3;
  c.model.ilt.zeta = r.zeta;
  c.model.ilt.c_shift = r.c_shift;
  c.model.ilt.n_ilt = r.n_ilt;
  c.model.ilt.epsilon = 1e-3;
  c.model.enc_width = r.d_enc;
  c.model.enc_layers = r.l_enc;
  c.model.p_degree = r.p;
  c.model.kappa_h = r.kappa;
  c.model.q = r.q;
  c.model.h_activation = r.act;
  c.model.h_width = r.d_h;
  c.model.h_layers = r.l_h;
  c.lr = r.lr_e3 * 1e-3;
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json j = model_config_to_json(c.model);
  j["dataset"] = c.dataset_id;
  j["data_dir"] = c.data_dir;
  j["data_seed"] = c.data_seed;
  j["lr"] = c.lr;
  j["epochs"] = c.epochs;
  j["seeds"] = c.seeds;
  j["chunk"] = c.chunk;
  j["clip_norm"] = c.clip_norm;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  const json model_keys = model_config_to_json(LpNetConfig{});
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!kRunKeys.count(it.key()) && !model_keys.contains(it.key()))
      throw ConfigError("unknown config field '" + it.key() + "'");
  }
  int id = 1;
  read_field(j, "dataset", id);
  RunConfig c = preset_config(id);
  json model = model_config_to_json(c.model);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (model.contains(it.key())) model[it.key()] = it.value();
  }
  c.model = model_config_from_json(model);
  read_field(j, "data_dir", c.data_dir);
  read_field(j, "data_seed", c.data_seed);
  read_field(j, "lr", c.lr);
  read_field(j, "epochs", c.epochs);
  read_field(j, "seeds", c.seeds);
  read_field(j, "chunk", c.chunk);
  read_field(j, "clip_norm", c.clip_norm);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return run_config_from_json(json::parse(buf.str()));
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
}

double mse(const Eigen::Ref<const Eigen::MatrixXd>& pred, const Eigen::Ref<const Eigen::MatrixXd>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("mse: prediction is " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                     ", target is " + std::to_string(target.rows()) + "x" + std::to_string(target.cols()));
  if (pred.size() == 0) throw ShapeError("mse: empty input");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

Dataset load_run_dataset(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) return build_dataset(cfg.dataset_id, cfg.data_seed);
  if (!std::filesystem::exists(std::filesystem::path(cfg.data_dir) / "manifest.json"))
    throw DataError("dataset not found: '" + cfg.data_dir + "' has no manifest.json");
  Dataset ds = read_dataset(cfg.data_dir);
  if (ds.id != cfg.dataset_id)
    throw ConfigError("config field 'dataset' is " + std::to_string(cfg.dataset_id) + " but '" + cfg.data_dir +
                      "' holds dataset " + std::to_string(ds.id));
  return ds;
}

TrainResult train_run(const RunConfig& cfg, const Dataset& ds, std::uint64_t seed, bool verbose) {
  cfg.validate();
  tune_allocator();
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<PreparedBatch<float>> train = prepare_chunks(cfg, ds.train);
  const std::vector<PreparedBatch<float>> val = prepare_chunks(cfg, ds.val);
  const double n_train = total_points(train);

  LpNet<float> net(cfg.model);
  ad::ParameterSet<float> params;
  net.declare(params);
  std::mt19937_64 rng(seed);
  net.initialize(params, rng);
  ad::Adam<float> opt(ad::AdamConfig{cfg.lr});

  TrainResult result;
  Metrics& m = result.metrics;
  m.seed = seed;
  ad::ParameterSet<float> best;
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    const bool step = epoch < cfg.epochs;
    double sse = 0.0;
    params.zero_grad();
    for (const auto& c : train) {
      ad::Tape<float> tape;
      ad::Var<float> pred = net.forecast(tape, params, c);
      sse += chunk_sse(pred.value(), c.y_fore);
      if (!step) continue;
      ad::Var<float> loss = ad::scale(ad::sum(ad::square(ad::add_const(pred, ad::Matrix<float>(-c.y_fore)))),
                                      static_cast<float>(1.0 / n_train));
      tape.backward(loss, true);
    }
    const double train_mse = sse / n_train;
    if (!std::isfinite(train_mse))
      throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
    const double val_mse = evaluate_chunks(net, params, val);
    m.curve.push_back({epoch, train_mse, val_mse});
    if (val_mse < best_val) {
      best_val = val_mse;
      m.best_epoch = epoch;
      best = params.cast<float>();
    }
    if (verbose && (epoch % 50 == 0 || !step))
      std::fprintf(stderr, "seed %llu epoch %d train_mse %.6g val_mse %.6g\n", static_cast<unsigned long long>(seed),
                   epoch, train_mse, val_mse);
    if (!step) break;
    ad::clip_grad_norm(params, cfg.clip_norm);
    opt.step(params);
  }
  if (!std::isfinite(best_val)) throw NumericError("training diverged: validation MSE is never finite");
  m.best_val_mse = best_val;
  result.best_params = best.cast<double>();
  m.test_mse = evaluate(cfg, result.best_params, ds.test);
  m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

double evaluate(const RunConfig& cfg, const ad::ParameterSet<double>& params, const std::vector<SampleRecord>& split) {
  if (split.empty()) throw DataError("evaluate: split is empty");
  tune_allocator();
  LpNet<float> net(cfg.model);
  ad::ParameterSet<float> p = params.cast<float>();
  ad::ParameterSet<float> shape;
  net.declare(shape);
  for (const auto& [name, q] : shape) {
    if (!p.contains(name)) throw DataError("parameters are missing '" + name + "'");
    if (p.at(name).value.rows() != q.value.rows() || p.at(name).value.cols() != q.value.cols())
      throw DataError("parameter '" + name + "' does not match the model structure");
  }
  return evaluate_chunks(net, p, prepare_chunks(cfg, split));
}

ad::ParameterSet<double> zero_parameters(const LpNetConfig& cfg) {
  ad::ParameterSet<double> params;
  LpNet<double>(cfg).declare(params);
  for (auto& [_, p] : params) p.value.setZero();
  return params;
}

std::string metrics_csv(const Metrics& m) {
  std::string out = "epoch,train_mse,val_mse\n";
  char line[96];
  for (const auto& e : m.curve) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", e.epoch, e.train_mse, e.val_mse);
    out += line;
  }
  return out;
}

json metrics_summary(const Metrics& m) {
  return {{"seed", m.seed},
          {"test_mse", m.test_mse},
          {"best_val_mse", m.best_val_mse},
          {"best_epoch", m.best_epoch},
          {"wall_clock_s", m.wall_clock_s}};
}

void write_run(const RunConfig& cfg, const TrainResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string csv = dir + "/metrics.csv";
  std::ofstream out(csv, std::ios::binary);
  if (!out) throw DataError("cannot write '" + csv + "'");
  out << metrics_csv(result.metrics);
  std::ofstream sum(dir + "/summary.json", std::ios::binary);
  if (!sum) throw DataError("cannot write '" + dir + "/summary.json'");
  sum << metrics_summary(result.metrics).dump(2) << '\n';
  save_model(cfg.model, result.best_params, dir + "/model.ckpt");
}

SeedSummary summarize(const std::vector<double>& values) {
  if (values.empty()) throw ShapeError("summarize: no values");
  SeedSummary s;
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / (n - 1.0));
  }
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return s;
}

json train_seeds(const RunConfig& cfg, const std::string& out, bool verbose) {
  cfg.validate();
  const Dataset ds = load_run_dataset(cfg);
  std::filesystem::create_directories(out);

  int workers = 1;
  if (const char* env = std::getenv("LPNET_THREADS")) {
    try {
      workers = std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw ConfigError("LPNET_THREADS must be a positive integer");
    }
  }
  workers = std::min<int>(workers, static_cast<int>(cfg.seeds.size()));

  std::vector<Metrics> metrics(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      try {
        TrainResult r = train_run(cfg, ds, cfg.seeds[i], verbose);
        write_run(cfg, r, out + "/seed_" + std::to_string(cfg.seeds[i]));
        metrics[i] = r.metrics;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> test;
  json runs = json::array();
  for (const auto& m : metrics) {
    test.push_back(m.test_mse);
    runs.push_back(metrics_summary(m));
  }
  const SeedSummary s = summarize(test);
  json summary = {{"dataset", cfg.dataset_id},
                  {"config", run_config_to_json(cfg)},
                  {"runs", runs},
                  {"test_mse_mean", s.mean},
                  {"test_mse_std", s.std},
                  {"test_mse_median", s.median}};
  std::ofstream f(out + "/summary.json", std::ios::binary);
  if (!f) throw DataError("cannot write '" + out + "/summary.json'");
  f << summary.dump(2) << '\n';
  return summary;
}

}  // namespace lpnet
