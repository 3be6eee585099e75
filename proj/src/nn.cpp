#include "lpnet/nn.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lpnet::ad {

using json = nlohmann::json;

Activation parse_activation(const std::string& name) {
  if (name == "identity" || name == "linear") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "softsign") return Activation::Softsign;
  if (name == "silu") return Activation::Silu;
  if (name == "sin") return Activation::Sin;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string activation_name(Activation act) {
  switch (act) {
    case Activation::Identity:
      return "identity";
    case Activation::Tanh:
      return "tanh";
    case Activation::Softsign:
      return "softsign";
    case Activation::Silu:
      return "silu";
    case Activation::Sin:
      return "sin";
  }
  return "identity";
}

GradCheckResult grad_check(const std::function<Var<double>(Tape<double>&, Var<double>)>& f,
                           const Eigen::MatrixXd& point, double h) {
  Eigen::MatrixXd analytic;
  {
    Tape<double> tape;
    Var<double> x = tape.variable(point);
    Var<double> y = f(tape, x);
    tape.backward(y);
    analytic = tape.grad(x);
  }
  auto eval = [&](const Eigen::MatrixXd& p) {
    Tape<double> tape;
    return f(tape, tape.constant(p)).value()(0, 0);
  };
  const double floor = 1e-6 * std::max(analytic.cwiseAbs().maxCoeff(), 1e-300);
  GradCheckResult r;
  Eigen::MatrixXd probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double x0 = probe(i);
    probe(i) = x0 + h;
    const double fp = eval(probe);
    probe(i) = x0 - h;
    const double fm = eval(probe);
    probe(i) = x0;
    const double numeric = (fp - fm) / (2.0 * h);
    r.max_rel_error = std::max(r.max_rel_error, relative_error(numeric, analytic(i), floor));
    ++r.checked;
  }
  return r;
}

GradCheckResult grad_check_parameters(const std::function<Var<double>(Tape<double>&)>& loss,
                                      ParameterSet<double>& params, double h, int max_coords, std::mt19937_64& rng,
                                      double floor_ratio) {
  params.zero_grad();
  {
    Tape<double> tape;
    Var<double> l = loss(tape);
    tape.backward(l);
  }
  struct Coord {
    Parameter<double>* p;
    Eigen::Index i;
  };
  std::vector<Coord> coords;
  double gmax = 0.0;
  for (auto& [_, p] : params) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) coords.push_back({&p, i});
    if (p.grad.size() > 0) gmax = std::max(gmax, p.grad.cwiseAbs().maxCoeff());
  }
  if (max_coords > 0 && coords.size() > static_cast<std::size_t>(max_coords)) {
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(static_cast<std::size_t>(max_coords));
  }
  auto eval = [&]() {
    Tape<double> tape;
    return loss(tape).value()(0, 0);
  };
  const double floor = floor_ratio * std::max(gmax, 1e-300);
  GradCheckResult r;
  for (const Coord& c : coords) {
    double& x = c.p->value(c.i);
    const double x0 = x;
    x = x0 + h;
    const double fp = eval();
    x = x0 - h;
    const double fm = eval();
    x = x0;
    const double numeric = (fp - fm) / (2.0 * h);
    r.max_rel_error = std::max(r.max_rel_error, relative_error(numeric, c.p->grad(c.i), floor));
    ++r.checked;
  }
  return r;
}

std::string checkpoint_to_string(const ParameterSet<double>& params) {
  json doc;
  doc["format"] = "lpnet-checkpoint";
  doc["version"] = 1;
  json& entries = doc["parameters"];
  entries = json::object();
  for (const auto& [name, p] : params) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) values.push_back(p.value(r, c));
    entries[name] = {{"rows", p.value.rows()}, {"cols", p.value.cols()}, {"values", values}};
  }
  return doc.dump(1);
}

ParameterSet<double> checkpoint_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  if (doc.value("format", "") != "lpnet-checkpoint") throw DataError("checkpoint: missing format tag");
  ParameterSet<double> params;
  for (const auto& [name, entry] : doc.at("parameters").items()) {
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const auto values = entry.at("values").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != rows * cols)
      throw DataError("checkpoint: '" + name + "' has " + std::to_string(values.size()) + " values for shape " +
                      std::to_string(rows) + "x" + std::to_string(cols));
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[k++];
    params.add(name, std::move(m));
  }
  return params;
}

void save_checkpoint(const ParameterSet<double>& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot open '" + path + "' for writing");
  out << checkpoint_to_string(params) << '\n';
  if (!out) throw DataError("checkpoint: write to '" + path + "' failed");
}

ParameterSet<double> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace lpnet::ad
