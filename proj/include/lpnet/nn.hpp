#pragma once

// Parameter storage, multilayer perceptrons, Adam, gradient clipping,
// finite-difference gradient checks and the checkpoint format.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "lpnet/autodiff.hpp"

namespace lpnet::ad {

/// Ordered name -> parameter map. Iteration order is lexicographic, which
/// fixes the order of every reduction over parameters.
template <typename Scalar>
class ParameterSet {
public:
  using Mat = Matrix<Scalar>;

  Parameter<Scalar>& add(const std::string& name, Mat value) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw ConfigError("parameter '" + name + "' already exists");
    it->second.name = name;
    it->second.value = std::move(value);
    it->second.zero_grad();
    return it->second;
  }

  Parameter<Scalar>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Parameter<Scalar>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grad() {
    for (auto& [_, p] : params_) p.zero_grad();
  }

  std::size_t size() const { return params_.size(); }
  Eigen::Index element_count() const {
    Eigen::Index n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Same names and shapes, values converted to another scalar type.
  template <typename Other>
  ParameterSet<Other> cast() const {
    ParameterSet<Other> out;
    for (const auto& [name, p] : params_) out.add(name, p.value.template cast<Other>());
    return out;
  }

private:
  std::map<std::string, Parameter<Scalar>> params_;
};

/// Shape of a fully connected network.
struct MlpSpec {
  int input_dim = 1;
  int output_dim = 1;
  int hidden_dim = 1;
  int layer_count = 1;  // number of affine layers
  Activation activation = Activation::Tanh;

  void validate() const {
    if (input_dim < 1 || output_dim < 1 || hidden_dim < 1)
      throw ConfigError("mlp: dimensions must be at least 1");
    if (layer_count < 1) throw ConfigError("mlp: layer_count must be at least 1");
  }
};

Activation parse_activation(const std::string& name);
std::string activation_name(Activation act);

/// Affine layers with `activation` between them. The last layer is linear
/// unless `activate_output` is set (used for encoder trunks).
template <typename Scalar>
class Mlp {
public:
  using Mat = Matrix<Scalar>;

  Mlp() = default;
  Mlp(MlpSpec spec, std::string prefix, bool activate_output = false)
      : spec_(spec), prefix_(std::move(prefix)), activate_output_(activate_output) {
    spec_.validate();
  }

  const MlpSpec& spec() const { return spec_; }
  int output_width() const { return activate_output_ ? spec_.hidden_dim : spec_.output_dim; }

  std::string weight_name(int layer) const { return prefix_ + ".w" + std::to_string(layer); }
  std::string bias_name(int layer) const { return prefix_ + ".b" + std::to_string(layer); }

  /// Registers zero-valued weights and biases.
  void declare(ParameterSet<Scalar>& params) const {
    for (int l = 0; l < spec_.layer_count; ++l) {
      params.add(weight_name(l), Mat::Zero(in_dim(l), out_dim(l)));
      params.add(bias_name(l), Mat::Zero(1, out_dim(l)));
    }
  }

  /// Uniform in +-sqrt(1 / fan_in) for every weight and bias.
  void initialize(ParameterSet<Scalar>& params, std::mt19937_64& rng) const {
    for (int l = 0; l < spec_.layer_count; ++l) {
      const double bound = std::sqrt(1.0 / static_cast<double>(in_dim(l)));
      std::uniform_real_distribution<double> dist(-bound, bound);
      auto fill = [&](Mat& m) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
          for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(dist(rng));
      };
      fill(params.at(weight_name(l)).value);
      fill(params.at(bias_name(l)).value);
    }
  }

  /// `input` is batch x input_dim; returns batch x output width.
  Var<Scalar> forward(Tape<Scalar>& tape, ParameterSet<Scalar>& params, Var<Scalar> input) const {
    if (input.cols() != spec_.input_dim)
      throw ShapeError("mlp '" + prefix_ + "': expected input width " + std::to_string(spec_.input_dim) + ", got " +
                       std::to_string(input.cols()));
    Var<Scalar> h = input;
    for (int l = 0; l < spec_.layer_count; ++l) {
      const bool last = (l == spec_.layer_count - 1);
      const Activation act = (!last || activate_output_) ? spec_.activation : Activation::Identity;
      h = dense(h, tape.parameter(params.at(weight_name(l))), tape.parameter(params.at(bias_name(l))), act);
    }
    return h;
  }

private:
  int in_dim(int layer) const { return layer == 0 ? spec_.input_dim : spec_.hidden_dim; }
  int out_dim(int layer) const {
    if (layer == spec_.layer_count - 1) return activate_output_ ? spec_.hidden_dim : spec_.output_dim;
    return spec_.hidden_dim;
  }

  MlpSpec spec_;
  std::string prefix_;
  bool activate_output_ = false;
};

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename Scalar>
double clip_grad_norm(ParameterSet<Scalar>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, p] : params) sq += p.grad.template cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const Scalar factor = static_cast<Scalar>(max_norm / norm);
    for (auto& [_, p] : params) p.grad *= factor;
  }
  return norm;
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
class Adam {
public:
  using Mat = Matrix<Scalar>;

  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParameterSet<Scalar>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    const Scalar b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
    for (auto& [name, p] : params) {
      if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
        throw ShapeError("adam: gradient shape differs from value for '" + name + "'");
      auto [it, fresh] = moments_.try_emplace(name);
      if (fresh) {
        it->second.first = Mat::Zero(p.value.rows(), p.value.cols());
        it->second.second = Mat::Zero(p.value.rows(), p.value.cols());
      }
      Mat& m = it->second.first;
      Mat& v = it->second.second;
      m = b1 * m + (Scalar(1) - b1) * p.grad;
      v = b2 * v + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      const Scalar lr = static_cast<Scalar>(cfg_.lr / bc1);
      const Scalar inv_bc2 = static_cast<Scalar>(1.0 / bc2);
      const Scalar eps = static_cast<Scalar>(cfg_.eps);
      p.value.array() -= lr * m.array() / ((v.array() * inv_bc2).sqrt() + eps);
    }
  }

  int steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

private:
  AdamConfig cfg_;
  int t_ = 0;
  std::map<std::string, std::pair<Mat, Mat>> moments_;
};

/// Result of comparing reverse-mode gradients with central differences.
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Relative error |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

/// Gradient check of a scalar function of one matrix argument.
GradCheckResult grad_check(const std::function<Var<double>(Tape<double>&, Var<double>)>& f,
                           const Eigen::MatrixXd& point, double h = 1e-5);

/// Gradient check of a loss over parameters. At most `max_coords` entries
/// (chosen with `rng`, all if <= 0) are perturbed. Entries whose gradient is
/// below `floor_ratio` times the largest gradient magnitude are compared
/// against that floor instead.
GradCheckResult grad_check_parameters(const std::function<Var<double>(Tape<double>&)>& loss,
                                      ParameterSet<double>& params, double h, int max_coords, std::mt19937_64& rng,
                                      double floor_ratio = 1e-6);

/// Checkpoint = JSON map name -> {rows, cols, row-major values}.
/// Values are stored as doubles; float parameters round-trip exactly.
void save_checkpoint(const ParameterSet<double>& params, const std::string& path);
ParameterSet<double> load_checkpoint(const std::string& path);

std::string checkpoint_to_string(const ParameterSet<double>& params);
ParameterSet<double> checkpoint_from_string(const std::string& text);

}  // namespace lpnet::ad
