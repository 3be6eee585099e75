#pragma once

// Reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records every operation in insertion order; backward() walks the
// records in strict reverse order, so the graph is topologically sorted by
// construction. Complex values are carried as (re, im) pairs of real nodes.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "lpnet/error.hpp"

namespace lpnet::ad {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class Op : std::uint8_t {
  Constant,
  Variable,
  Parameter,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Exp,
  Log,
  Sin,
  Cos,
  Tanh,
  Softsign,
  Silu,
  Matmul,
  Sum,
  Mean,
  Square,
  Transpose,
  Scale,
  AddConst,
  MulConst,
  AddRow,
  ConcatCols,
  SliceCols,
  Reshape,
  RepeatRows,
  Dense,
  SegmentSum,
};

enum class Activation : std::uint8_t { Identity, Tanh, Softsign, Silu, Sin };

/// Named trainable tensor. The gradient always has the shape of the value.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename Scalar>
class Tape;

/// Handle to a tape node.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  int index = -1;

  const Matrix<Scalar>& value() const { return tape->value(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Elementwise activation kernels shared by the primitive ops and the fused
// dense layer. Eigen only vectorizes tanh for float, so double goes through exp.
namespace detail {

template <typename Derived>
auto tanh_of(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  using Arr = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if constexpr (std::is_same_v<Scalar, float>) {
    return Arr(x.tanh());
  } else {
    return Arr(Scalar(1) - Scalar(2) / ((Scalar(2) * x).exp() + Scalar(1)));
  }
}

template <typename Derived>
auto sigmoid_of(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  using Arr = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  return Arr(Scalar(1) / (Scalar(1) + (-x).exp()));
}

template <typename Scalar>
Matrix<Scalar> activate(Activation act, const Matrix<Scalar>& u) {
  switch (act) {
    case Activation::Identity:
      return u;
    case Activation::Tanh:
      return tanh_of(u.array()).matrix();
    case Activation::Softsign:
      return (u.array() / (Scalar(1) + u.array().abs())).matrix();
    case Activation::Silu:
      return (u.array() * sigmoid_of(u.array())).matrix();
    case Activation::Sin:
      return u.array().sin().matrix();
  }
  return u;
}

/// Derivative of the activation, from the pre-activation `u` and output `y`.
template <typename Scalar>
Matrix<Scalar> activation_slope(Activation act, const Matrix<Scalar>& u, const Matrix<Scalar>& y) {
  switch (act) {
    case Activation::Identity:
      return Matrix<Scalar>::Ones(y.rows(), y.cols());
    case Activation::Tanh:
      return (Scalar(1) - y.array().square()).matrix();
    case Activation::Softsign:
      return (Scalar(1) - y.array().abs()).square().matrix();
    case Activation::Silu: {
      const auto sg = sigmoid_of(u.array());
      return (sg * (Scalar(1) + u.array() * (Scalar(1) - sg))).matrix();
    }
    case Activation::Sin:
      return u.array().cos().matrix();
  }
  return Matrix<Scalar>();
}

/// g *= slope, without materializing the slope.
template <typename Scalar>
void scale_by_slope(Activation act, Matrix<Scalar>& g, const Matrix<Scalar>& u, const Matrix<Scalar>& y) {
  switch (act) {
    case Activation::Identity:
      return;
    case Activation::Tanh:
      g.array() *= Scalar(1) - y.array().square();
      return;
    case Activation::Softsign:
      g.array() *= (Scalar(1) - y.array().abs()).square();
      return;
    case Activation::Silu: {
      const auto sg = sigmoid_of(u.array());
      g.array() *= sg * (Scalar(1) + u.array() * (Scalar(1) - sg));
      return;
    }
    case Activation::Sin:
      g.array() *= u.array().cos();
      return;
  }
}

/// Pre-activation is kept only where the slope cannot be recovered from y.
inline bool needs_preactivation(Activation act) { return act == Activation::Silu || act == Activation::Sin; }

}  // namespace detail

template <typename Scalar>
class Tape {
public:
  using Mat = Matrix<Scalar>;
  using BackwardFn = void (*)(Tape&, int);

  struct Node {
    Op op = Op::Constant;
    std::array<int, 2> parents{-1, -1};
    Mat value;
    Mat grad;
    Mat aux;  // op-specific saved data (constants, pre-activations, weights)
    Eigen::Index i0 = 0, i1 = 0;  // op-specific integers
    Activation act = Activation::Identity;
    bool requires_grad = false;
    Parameter<Scalar>* param = nullptr;
    BackwardFn backward = nullptr;
    std::vector<int> extra_parents;  // variadic ops (concat)
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Mat value) { return push(Op::Constant, std::move(value), {}, false, nullptr); }

  /// Leaf whose gradient is retained after backward().
  Var<Scalar> variable(Mat value) { return push(Op::Variable, std::move(value), {}, true, nullptr); }

  /// Leaf bound to a parameter; backward() accumulates into `p.grad`.
  Var<Scalar> parameter(Parameter<Scalar>& p) {
    Var<Scalar> v = push(Op::Parameter, p.value, {}, true, nullptr);
    nodes_[v.index].param = &p;
    return v;
  }

  /// Records a derived node; requires_grad is inherited from the parents.
  Var<Scalar> record(Op op, Mat value, std::initializer_list<Var<Scalar>> parents, BackwardFn fn) {
    bool rg = false;
    for (const auto& p : parents) {
      check_owner(p);
      rg = rg || nodes_[p.index].requires_grad;
    }
    Var<Scalar> v = push(op, std::move(value), parents, rg, fn);
    return v;
  }

  Node& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  Node& node(Var<Scalar> v) { return node(v.index); }

  const Mat& value(Var<Scalar> v) const {
    check_owner(v);
    return node(v.index).value;
  }

  /// Gradient of the last backward() root with respect to `v` (zeros if unused).
  Mat grad(Var<Scalar> v) const {
    check_owner(v);
    const Node& n = node(v.index);
    if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  /// True inside backward(root, true); ops may then consume their own grad.
  bool releasing() const { return releasing_; }

  void accumulate(int i, Mat&& g) {
    if (i < 0) return;
    Node& n = node(i);
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = std::move(g);
    } else {
      n.grad += g;
    }
  }

  template <typename Derived>
  void accumulate(int i, const Eigen::MatrixBase<Derived>& g) {
    if (i < 0) return;
    Node& n = node(i);
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Seeds d(root)/d(root) = 1 and propagates in reverse insertion order.
  /// With `release`, intermediate values and gradients are freed as soon as
  /// they are no longer needed; leaf gradients are always kept.
  void backward(Var<Scalar> root, bool release = false) {
    check_owner(root);
    if (value(root).size() != 1) throw ShapeError("backward: root must be a scalar (1 x 1)");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    releasing_ = release;
    node(root.index).grad = Mat::Ones(1, 1);
    for (int i = root.index; i >= 0; --i) {
      Node& n = node(i);
      if (n.grad.size() != 0) {
        if (n.op == Op::Parameter) {
          if (n.param->grad.size() == 0) n.param->zero_grad();
          n.param->grad += n.grad;
        } else if (n.backward != nullptr) {
          n.backward(*this, i);
        }
      }
      if (release && n.op != Op::Variable && n.op != Op::Parameter && i != root.index) {
        n.grad.resize(0, 0);
        n.value.resize(0, 0);
        n.aux.resize(0, 0);
      }
    }
  }

private:
  Var<Scalar> push(Op op, Mat value, std::initializer_list<Var<Scalar>> parents, bool rg, BackwardFn fn) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.requires_grad = rg;
    n.backward = fn;
    int slot = 0;
    for (const auto& p : parents) {
      if (slot < 2) {
        n.parents[static_cast<std::size_t>(slot)] = p.index;
      } else {
        n.extra_parents.push_back(p.index);
      }
      ++slot;
    }
    nodes_.push_back(std::move(n));
    return Var<Scalar>{this, static_cast<int>(nodes_.size() - 1)};
  }

  void check_owner(Var<Scalar> v) const {
    if (v.tape != this || v.index < 0 || static_cast<std::size_t>(v.index) >= nodes_.size())
      throw std::logic_error("autodiff: variable does not belong to this tape");
  }

  std::vector<Node> nodes_;
  bool releasing_ = false;
};

// ---------------------------------------------------------------------------
// Primitive operations

namespace detail {

template <typename Scalar>
void same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.tape != b.tape) throw std::logic_error(std::string(op) + ": operands live on different tapes");
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

template <typename Scalar>
const Matrix<Scalar>& parent_value(Tape<Scalar>& t, int self, int which) {
  return t.node(t.node(self).parents[static_cast<std::size_t>(which)]).value;
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::same_shape("add", a, b);
  return a.tape->record(Op::Add, a.value() + b.value(), {a, b}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], n.grad);
    t.accumulate(n.parents[1], n.grad);
  });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  detail::same_shape("sub", a, b);
  return a.tape->record(Op::Sub, a.value() - b.value(), {a, b}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], n.grad);
    t.accumulate(n.parents[1], -n.grad);
  });
}

template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  detail::same_shape("mul", a, b);
  return a.tape->record(Op::Mul, a.value().cwiseProduct(b.value()), {a, b}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], n.grad.cwiseProduct(detail::parent_value(t, i, 1)));
    t.accumulate(n.parents[1], n.grad.cwiseProduct(detail::parent_value(t, i, 0)));
  });
}

template <typename Scalar>
Var<Scalar> div(Var<Scalar> a, Var<Scalar> b) {
  detail::same_shape("div", a, b);
  return a.tape->record(Op::Div, a.value().cwiseQuotient(b.value()), {a, b}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    const auto& bv = detail::parent_value(t, i, 1);
    t.accumulate(n.parents[0], n.grad.cwiseQuotient(bv));
    t.accumulate(n.parents[1], -(n.grad.cwiseProduct(n.value)).cwiseQuotient(bv));
  });
}

template <typename Scalar>
Var<Scalar> neg(Var<Scalar> a) {
  return a.tape->record(Op::Neg, -a.value(), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], -n.grad);
  });
}

template <typename Scalar>
Var<Scalar> exp(Var<Scalar> a) {
  return a.tape->record(Op::Exp, a.value().array().exp().matrix(), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], n.grad.cwiseProduct(n.value));
  });
}

template <typename Scalar>
Var<Scalar> log(Var<Scalar> a) {
  return a.tape->record(Op::Log, a.value().array().log().matrix(), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], n.grad.cwiseQuotient(detail::parent_value(t, i, 0)));
  });
}

template <typename Scalar>
Var<Scalar> sin(Var<Scalar> a) {
  return a.tape->record(Op::Sin, a.value().array().sin().matrix(), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], n.grad.cwiseProduct(detail::parent_value(t, i, 0).array().cos().matrix()));
  });
}

template <typename Scalar>
Var<Scalar> cos(Var<Scalar> a) {
  return a.tape->record(Op::Cos, a.value().array().cos().matrix(), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], -n.grad.cwiseProduct(detail::parent_value(t, i, 0).array().sin().matrix()));
  });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
  return a.tape->record(Op::Tanh, detail::activate(Activation::Tanh, a.value()), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], n.grad.cwiseProduct(detail::activation_slope(Activation::Tanh, Matrix<Scalar>(), n.value)));
  });
}

template <typename Scalar>
Var<Scalar> softsign(Var<Scalar> a) {
  return a.tape->record(Op::Softsign, detail::activate(Activation::Softsign, a.value()), {a},
                        [](Tape<Scalar>& t, int i) {
                          auto& n = t.node(i);
                          t.accumulate(n.parents[0],
                                       n.grad.cwiseProduct(detail::activation_slope(Activation::Softsign,
                                                                                    Matrix<Scalar>(), n.value)));
                        });
}

template <typename Scalar>
Var<Scalar> silu(Var<Scalar> a) {
  return a.tape->record(Op::Silu, detail::activate(Activation::Silu, a.value()), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    const auto& u = detail::parent_value(t, i, 0);
    t.accumulate(n.parents[0], n.grad.cwiseProduct(detail::activation_slope(Activation::Silu, u, n.value)));
  });
}

template <typename Scalar>
Var<Scalar> square(Var<Scalar> a) {
  return a.tape->record(Op::Square, a.value().array().square().matrix(), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], Scalar(2) * n.grad.cwiseProduct(detail::parent_value(t, i, 0)));
  });
}

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + ")");
  Matrix<Scalar> out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  return a.tape->record(Op::Matmul, std::move(out), {a, b}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    const auto& av = detail::parent_value(t, i, 0);
    const auto& bv = detail::parent_value(t, i, 1);
    if (t.node(n.parents[0]).requires_grad) {
      Matrix<Scalar> ga(av.rows(), av.cols());
      ga.noalias() = n.grad * bv.transpose();
      t.accumulate(n.parents[0], ga);
    }
    if (t.node(n.parents[1]).requires_grad) {
      Matrix<Scalar> gb(bv.rows(), bv.cols());
      gb.noalias() = av.transpose() * n.grad;
      t.accumulate(n.parents[1], gb);
    }
  });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  Matrix<Scalar> v(1, 1);
  v(0, 0) = a.value().sum();
  return a.tape->record(Op::Sum, std::move(v), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    const auto& av = detail::parent_value(t, i, 0);
    t.accumulate(n.parents[0], Matrix<Scalar>::Constant(av.rows(), av.cols(), n.grad(0, 0)));
  });
}

template <typename Scalar>
Var<Scalar> mean(Var<Scalar> a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty operand");
  Matrix<Scalar> v(1, 1);
  v(0, 0) = a.value().mean();
  return a.tape->record(Op::Mean, std::move(v), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    const auto& av = detail::parent_value(t, i, 0);
    const Scalar g = n.grad(0, 0) / static_cast<Scalar>(av.size());
    t.accumulate(n.parents[0], Matrix<Scalar>::Constant(av.rows(), av.cols(), g));
  });
}

template <typename Scalar>
Var<Scalar> transpose(Var<Scalar> a) {
  return a.tape->record(Op::Transpose, a.value().transpose(), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], n.grad.transpose());
  });
}

/// c * a for a fixed scalar c.
template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar c) {
  Var<Scalar> v = a.tape->record(Op::Scale, c * a.value(), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], n.aux(0, 0) * n.grad);
  });
  a.tape->node(v).aux = Matrix<Scalar>::Constant(1, 1, c);
  return v;
}

/// a + C for a constant matrix C of the same shape.
template <typename Scalar>
Var<Scalar> add_const(Var<Scalar> a, const Matrix<Scalar>& c) {
  if (c.rows() != a.rows() || c.cols() != a.cols()) throw ShapeError("add_const: shape mismatch");
  return a.tape->record(Op::AddConst, a.value() + c, {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], n.grad);
  });
}

/// a (elementwise) C for a constant matrix C of the same shape.
template <typename Scalar>
Var<Scalar> mul_const(Var<Scalar> a, const Matrix<Scalar>& c) {
  if (c.rows() != a.rows() || c.cols() != a.cols()) throw ShapeError("mul_const: shape mismatch");
  Var<Scalar> v = a.tape->record(Op::MulConst, a.value().cwiseProduct(c), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], n.grad.cwiseProduct(n.aux));
  });
  a.tape->node(v).aux = c;
  return v;
}

/// a + 1 * bias, broadcasting a 1 x cols row over every row of a.
template <typename Scalar>
Var<Scalar> add_row(Var<Scalar> a, Var<Scalar> bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw ShapeError("add_row: bias must be 1 x cols(a)");
  Matrix<Scalar> out = a.value();
  out.rowwise() += bias.value().row(0);
  return a.tape->record(Op::AddRow, std::move(out), {a, bias}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    t.accumulate(n.parents[0], n.grad);
    if (t.node(n.parents[1]).requires_grad) t.accumulate(n.parents[1], n.grad.colwise().sum());
  });
}

/// Horizontal concatenation of operands with equal row counts.
template <typename Scalar>
Var<Scalar> concat_cols(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Tape<Scalar>& tape = *parts.front().tape;
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.tape != &tape) throw std::logic_error("concat_cols: operands live on different tapes");
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
    rg = rg || tape.node(p).requires_grad;
  }
  Matrix<Scalar> out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  Var<Scalar> v = tape.record(Op::ConcatCols, std::move(out), {}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    Eigen::Index off = 0;
    for (int p : n.extra_parents) {
      const Eigen::Index w = t.node(p).value.cols();
      if (t.node(p).requires_grad) t.accumulate(p, n.grad.middleCols(off, w));
      off += w;
    }
  });
  auto& node = tape.node(v);
  node.requires_grad = rg;
  for (const auto& p : parts) node.extra_parents.push_back(p.index);
  return v;
}

/// Columns [start, start + count).
template <typename Scalar>
Var<Scalar> slice_cols(Var<Scalar> a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: range out of bounds");
  Var<Scalar> v = a.tape->record(Op::SliceCols, a.value().middleCols(start, count), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    const auto& av = detail::parent_value(t, i, 0);
    Matrix<Scalar> g = Matrix<Scalar>::Zero(av.rows(), av.cols());
    g.middleCols(n.i0, n.i1) = n.grad;
    t.accumulate(n.parents[0], std::move(g));
  });
  a.tape->node(v).i0 = start;
  a.tape->node(v).i1 = count;
  return v;
}

/// Column-major reshape (storage order is unchanged).
template <typename Scalar>
Var<Scalar> reshape(Var<Scalar> a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw ShapeError("reshape: element count changes");
  Matrix<Scalar> out = Eigen::Map<const Matrix<Scalar>>(a.value().data(), rows, cols);
  return a.tape->record(Op::Reshape, std::move(out), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    const auto& av = detail::parent_value(t, i, 0);
    t.accumulate(n.parents[0], Eigen::Map<const Matrix<Scalar>>(n.grad.data(), av.rows(), av.cols()));
  });
}

/// Repeats each row `times` times consecutively: row r lands in rows
/// [r * times, (r + 1) * times).
template <typename Scalar>
Var<Scalar> repeat_rows(Var<Scalar> a, Eigen::Index times) {
  if (times < 1) throw ShapeError("repeat_rows: times must be positive");
  const auto& av = a.value();
  Matrix<Scalar> out(av.rows() * times, av.cols());
  for (Eigen::Index r = 0; r < av.rows(); ++r) out.middleRows(r * times, times).rowwise() = av.row(r);
  Var<Scalar> v = a.tape->record(Op::RepeatRows, std::move(out), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    const Eigen::Index times = n.i0;
    const Eigen::Index rows = n.grad.rows() / times;
    Matrix<Scalar> g(rows, n.grad.cols());
    for (Eigen::Index r = 0; r < rows; ++r) g.row(r) = n.grad.middleRows(r * times, times).colwise().sum();
    t.accumulate(n.parents[0], std::move(g));
  });
  a.tape->node(v).i0 = times;
  return v;
}

/// Fused affine layer act(x W + 1 b).
template <typename Scalar>
Var<Scalar> dense(Var<Scalar> x, Var<Scalar> w, Var<Scalar> b, Activation act) {
  if (x.cols() != w.rows()) throw ShapeError("dense: input width does not match weight rows");
  if (b.rows() != 1 || b.cols() != w.cols()) throw ShapeError("dense: bias must be 1 x cols(W)");
  Matrix<Scalar> u(x.rows(), w.cols());
  u.noalias() = x.value() * w.value();
  u.rowwise() += b.value().row(0);
  Matrix<Scalar> y = detail::activate(act, u);
  Tape<Scalar>& tape = *x.tape;
  Var<Scalar> v = tape.record(Op::Dense, std::move(y), {x, w}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    Matrix<Scalar> gu_copy;
    if (!t.releasing()) gu_copy = n.grad;
    Matrix<Scalar>& gu = t.releasing() ? n.grad : gu_copy;
    detail::scale_by_slope(n.act, gu, n.aux, n.value);
    const int xi = n.parents[0], wi = n.parents[1], bi = n.extra_parents.front();
    const auto& xv = t.node(xi).value;
    const auto& wv = t.node(wi).value;
    if (t.node(bi).requires_grad) t.accumulate(bi, gu.colwise().sum());
    if (t.node(wi).requires_grad) {
      Matrix<Scalar> gw(wv.rows(), wv.cols());
      gw.noalias() = xv.transpose() * gu;
      t.accumulate(wi, std::move(gw));
    }
    if (t.node(xi).requires_grad) {
      Matrix<Scalar> gx(xv.rows(), xv.cols());
      gx.noalias() = gu * wv.transpose();
      t.accumulate(xi, std::move(gx));
    }
  });
  auto& node = tape.node(v);
  node.act = act;
  node.extra_parents.push_back(b.index);
  node.requires_grad = node.requires_grad || tape.node(b).requires_grad;
  if (detail::needs_preactivation(act)) node.aux = std::move(u);
  return v;
}

/// Weighted segment reduction: out(n, c) = sum_{k < seg} w[n seg + k] a(n seg + k, c).
/// `weights` is a constant column of length rows(a).
template <typename Scalar>
Var<Scalar> segment_sum(Var<Scalar> a, const Matrix<Scalar>& weights, Eigen::Index seg) {
  const auto& av = a.value();
  if (seg < 1 || av.rows() % seg != 0) throw ShapeError("segment_sum: rows must be a multiple of seg");
  if (weights.rows() != av.rows() || weights.cols() != 1) throw ShapeError("segment_sum: weights must be rows(a) x 1");
  const Eigen::Index segments = av.rows() / seg;
  Matrix<Scalar> out = Matrix<Scalar>::Zero(segments, av.cols());
  for (Eigen::Index c = 0; c < av.cols(); ++c) {
    for (Eigen::Index n = 0; n < segments; ++n) {
      Scalar acc = 0;
      for (Eigen::Index k = 0; k < seg; ++k) acc += weights(n * seg + k, 0) * av(n * seg + k, c);
      out(n, c) = acc;
    }
  }
  Var<Scalar> v = a.tape->record(Op::SegmentSum, std::move(out), {a}, [](Tape<Scalar>& t, int i) {
    auto& n = t.node(i);
    const Eigen::Index seg = n.i0;
    Matrix<Scalar> g(n.grad.rows() * seg, n.grad.cols());
    for (Eigen::Index c = 0; c < g.cols(); ++c)
      for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = n.aux(r, 0) * n.grad(r / seg, c);
    t.accumulate(n.parents[0], std::move(g));
  });
  a.tape->node(v).aux = weights;
  a.tape->node(v).i0 = seg;
  return v;
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  return add(a, b);
}
template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  return sub(a, b);
}
template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a) {
  return neg(a);
}

template <typename Scalar>
Var<Scalar> activation(Var<Scalar> a, Activation act) {
  switch (act) {
    case Activation::Identity:
      return a;
    case Activation::Tanh:
      return tanh(a);
    case Activation::Softsign:
      return softsign(a);
    case Activation::Silu:
      return silu(a);
    case Activation::Sin:
      return sin(a);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Complex values as (re, im) pairs

template <typename Scalar>
struct CVar {
  Var<Scalar> re;
  Var<Scalar> im;
};

template <typename Scalar>
CVar<Scalar> complex_add(const CVar<Scalar>& a, const CVar<Scalar>& b) {
  return {add(a.re, b.re), add(a.im, b.im)};
}

template <typename Scalar>
CVar<Scalar> complex_mul(const CVar<Scalar>& a, const CVar<Scalar>& b) {
  return {sub(mul(a.re, b.re), mul(a.im, b.im)), add(mul(a.re, b.im), mul(a.im, b.re))};
}

template <typename Scalar>
CVar<Scalar> complex_div(const CVar<Scalar>& a, const CVar<Scalar>& b) {
  Var<Scalar> den = add(square(b.re), square(b.im));
  Var<Scalar> re = add(mul(a.re, b.re), mul(a.im, b.im));
  Var<Scalar> im = sub(mul(a.im, b.re), mul(a.re, b.im));
  return {div(re, den), div(im, den)};
}

/// a * C for a constant complex matrix C given as (re, im).
template <typename Scalar>
CVar<Scalar> complex_mul_const(const CVar<Scalar>& a, const Matrix<Scalar>& c_re, const Matrix<Scalar>& c_im) {
  return {sub(mul_const(a.re, c_re), mul_const(a.im, c_im)), add(mul_const(a.re, c_im), mul_const(a.im, c_re))};
}

template <typename Scalar>
CVar<Scalar> complex_add_const(const CVar<Scalar>& a, const Matrix<Scalar>& c_re, const Matrix<Scalar>& c_im) {
  return {add_const(a.re, c_re), add_const(a.im, c_im)};
}

}  // namespace lpnet::ad
