#pragma once

// Reverse-mode automatic differentiation over a scalar tape.
//
// Every recorded node stores its primal value together with the local partial
// derivative toward each operand, so the backward sweep is a single linear pass
// `adjoint[operand] += adjoint[node] * partial`. Operand ids always precede the
// node that uses them, which makes insertion order a topological order.
//
// Fused reductions (dot, sum) record one node with many operands. They are
// gradient-equivalent to the chain of scalar add/mul nodes they replace.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "uavgnn/error.hpp"

namespace uavgnn::ad {

enum class Op : std::uint8_t {
  leaf,
  constant,
  add,
  sub,
  mul,
  div,
  neg,
  pow_const,
  exp,
  log,
  max0,
  sigmoid,
  tanh,
  log2_1p,
  dot,
  sum,
  muladd,
};

class Trace;

/// A traced scalar: a node id in a Trace plus its primal value.
struct Var {
  Trace* trace = nullptr;
  std::uint32_t id = 0;
  double value = 0.0;
};

class Gradients;

class Trace {
public:
  Trace() { begin_.push_back(0); }
  Trace(const Trace&) = delete;
  Trace& operator=(const Trace&) = delete;

  Var leaf(double v) { return record(Op::leaf, v, {}); }
  /// A node without operands that is not meant to be differentiated against.
  Var constant(double v) { return record(Op::constant, v, {}); }

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t operand_count() const noexcept { return args_.size(); }
  double value(std::uint32_t id) const { return values_.at(id); }
  Op op(std::uint32_t id) const { return ops_.at(id); }

  /// Drops every node but keeps the allocated capacity.
  void clear() {
    values_.clear();
    ops_.clear();
    args_.clear();
    partials_.clear();
    begin_.assign(1, 0);
  }

  void reserve(std::size_t nodes, std::size_t operands) {
    values_.reserve(nodes);
    ops_.reserve(nodes);
    begin_.reserve(nodes + 1);
    args_.reserve(operands);
    partials_.reserve(operands);
  }

  Gradients backward(const Var& root) const;

  // Low-level recording; used by the free operators below.
  struct Operand {
    std::uint32_t id;
    double partial;
  };

  Var record(Op op, double value, std::initializer_list<Operand> operands) {
    for (const auto& o : operands) {
      if (o.partial != 0.0) {
        args_.push_back(o.id);
        partials_.push_back(o.partial);
      }
    }
    return close(op, value);
  }

  // Incremental recording for n-ary nodes: call add_operand() repeatedly, then finish().
  void add_operand(std::uint32_t id, double partial) {
    if (partial != 0.0) {
      args_.push_back(id);
      partials_.push_back(partial);
    }
  }
  Var finish(Op op, double value) { return close(op, value); }

private:
  friend class Gradients;

  Var close(Op op, double value) {
    const auto id = static_cast<std::uint32_t>(values_.size());
    values_.push_back(value);
    ops_.push_back(op);
    begin_.push_back(static_cast<std::uint32_t>(args_.size()));
    return Var{this, id, value};
  }

  std::vector<double> values_;
  std::vector<Op> ops_;
  std::vector<std::uint32_t> begin_;
  std::vector<std::uint32_t> args_;
  std::vector<double> partials_;
};

/// Adjoints of one backward sweep, indexed by node id.
class Gradients {
public:
  Gradients(const Trace* trace, std::vector<double> adjoint)
      : trace_(trace), adjoint_(std::move(adjoint)) {}

  double operator[](const Var& v) const {
    if (v.trace != trace_) throw Error("gradient lookup with a variable from a foreign trace");
    return v.id < adjoint_.size() ? adjoint_[v.id] : 0.0;
  }

  std::span<const double> adjoints() const noexcept { return adjoint_; }

private:
  const Trace* trace_;
  std::vector<double> adjoint_;
};

inline Gradients Trace::backward(const Var& root) const {
  if (root.trace != this || root.id >= values_.size()) {
    throw Error("backward: root does not belong to this trace");
  }
  std::vector<double> adj(static_cast<std::size_t>(root.id) + 1, 0.0);
  adj[root.id] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    const double a = adj[i];
    if (a == 0.0) continue;
    for (std::uint32_t e = begin_[i]; e < begin_[i + 1]; ++e) {
      adj[args_[e]] += a * partials_[e];
    }
  }
  return Gradients(this, std::move(adj));
}

namespace detail {

inline Trace* common(const Var& a, const Var& b) {
  if (a.trace == nullptr || a.trace != b.trace) {
    throw Error("operands belong to different traces");
  }
  return a.trace;
}

inline Trace* owner(const Var& a) {
  if (a.trace == nullptr) throw Error("variable is not attached to a trace");
  return a.trace;
}

}  // namespace detail

// ---- arithmetic -----------------------------------------------------------

inline Var operator+(const Var& a, const Var& b) {
  return detail::common(a, b)->record(Op::add, a.value + b.value, {{a.id, 1.0}, {b.id, 1.0}});
}
inline Var operator+(const Var& a, double b) {
  return detail::owner(a)->record(Op::add, a.value + b, {{a.id, 1.0}});
}
inline Var operator+(double a, const Var& b) { return b + a; }

inline Var operator-(const Var& a, const Var& b) {
  return detail::common(a, b)->record(Op::sub, a.value - b.value, {{a.id, 1.0}, {b.id, -1.0}});
}
inline Var operator-(const Var& a, double b) {
  return detail::owner(a)->record(Op::sub, a.value - b, {{a.id, 1.0}});
}
inline Var operator-(double a, const Var& b) {
  return detail::owner(b)->record(Op::sub, a - b.value, {{b.id, -1.0}});
}
inline Var operator-(const Var& a) {
  return detail::owner(a)->record(Op::neg, -a.value, {{a.id, -1.0}});
}

inline Var operator*(const Var& a, const Var& b) {
  return detail::common(a, b)->record(Op::mul, a.value * b.value,
                                      {{a.id, b.value}, {b.id, a.value}});
}
inline Var operator*(const Var& a, double b) {
  return detail::owner(a)->record(Op::mul, a.value * b, {{a.id, b}});
}
inline Var operator*(double a, const Var& b) { return b * a; }

inline Var operator/(const Var& a, const Var& b) {
  auto* t = detail::common(a, b);
  if (b.value == 0.0) throw DomainError("division by zero", b.value);
  const double q = a.value / b.value;
  return t->record(Op::div, q, {{a.id, 1.0 / b.value}, {b.id, -q / b.value}});
}
inline Var operator/(const Var& a, double b) {
  if (b == 0.0) throw DomainError("division by zero", b);
  return detail::owner(a)->record(Op::div, a.value / b, {{a.id, 1.0 / b}});
}
inline Var operator/(double a, const Var& b) {
  auto* t = detail::owner(b);
  if (b.value == 0.0) throw DomainError("division by zero", b.value);
  const double q = a / b.value;
  return t->record(Op::div, q, {{b.id, -q / b.value}});
}

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

// ---- elementary functions -------------------------------------------------

inline Var exp(const Var& x) {
  const double e = std::exp(x.value);
  return detail::owner(x)->record(Op::exp, e, {{x.id, e}});
}

inline Var log(const Var& x) {
  if (!(x.value > 0.0)) throw DomainError("log of non-positive value", x.value);
  return detail::owner(x)->record(Op::log, std::log(x.value), {{x.id, 1.0 / x.value}});
}

inline Var pow_const(const Var& x, double p) {
  if (x.value < 0.0 && p != std::floor(p)) {
    throw DomainError("fractional power of negative value", x.value);
  }
  if (x.value == 0.0 && p < 1.0) throw DomainError("power with singular derivative at zero", x.value);
  const double v = std::pow(x.value, p);
  return detail::owner(x)->record(Op::pow_const, v, {{x.id, p * std::pow(x.value, p - 1.0)}});
}

/// ReLU. The subgradient at exactly zero is 0.
inline Var max0(const Var& x) {
  const bool on = x.value > 0.0;
  return detail::owner(x)->record(Op::max0, on ? x.value : 0.0, {{x.id, on ? 1.0 : 0.0}});
}

inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// s(1 - s) and 1 - t^2 cancel catastrophically once the unit saturates, so
// both derivatives are formed from exp(-|x|) instead.
inline Var sigmoid(const Var& x) {
  const double s = sigmoid_value(x.value);
  return detail::owner(x)->record(Op::sigmoid, s, {{x.id, s * sigmoid_value(-x.value)}});
}

inline Var tanh(const Var& x) {
  const double t = std::tanh(x.value);
  const double e = std::exp(-2.0 * std::abs(x.value));
  const double d = 4.0 * e / ((1.0 + e) * (1.0 + e));
  return detail::owner(x)->record(Op::tanh, t, {{x.id, d}});
}

/// log2(1 + x), defined for x > -1.
inline Var log2_1p(const Var& x) {
  if (!(x.value > -1.0)) throw DomainError("log2(1+x) with x <= -1", x.value);
  return detail::owner(x)->record(Op::log2_1p, std::log1p(x.value) / std::numbers::ln2,
                                  {{x.id, 1.0 / ((1.0 + x.value) * std::numbers::ln2)}});
}

// ---- fused reductions -----------------------------------------------------

/// init + sum_i a[i] * b[i] as a single node.
inline Var dot(std::span<const Var> a, std::span<const Var> b, const Var& init) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  auto* t = detail::owner(init);
  double acc = init.value;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].trace != t || b[i].trace != t) throw Error("operands belong to different traces");
    acc += a[i].value * b[i].value;
  }
  t->add_operand(init.id, 1.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    t->add_operand(a[i].id, b[i].value);
    t->add_operand(b[i].id, a[i].value);
  }
  return t->finish(Op::dot, acc);
}

/// init + sum_i a[i] * b[i] where b is constant data.
inline Var dot(std::span<const Var> a, std::span<const double> b, const Var& init) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  auto* t = detail::owner(init);
  double acc = init.value;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].trace != t) throw Error("operands belong to different traces");
    acc += a[i].value * b[i];
  }
  t->add_operand(init.id, 1.0);
  for (std::size_t i = 0; i < a.size(); ++i) t->add_operand(a[i].id, b[i]);
  return t->finish(Op::dot, acc);
}

/// init + sum_i a[i] * b[i] with constant data and constant init; `a` must be non-empty.
inline Var dot(std::span<const Var> a, std::span<const double> b, double init) {
  if (a.empty()) throw DimensionError("dot: empty traced operand");
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  auto* t = detail::owner(a[0]);
  double acc = init;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].trace != t) throw Error("operands belong to different traces");
    acc += a[i].value * b[i];
  }
  for (std::size_t i = 0; i < a.size(); ++i) t->add_operand(a[i].id, b[i]);
  return t->finish(Op::dot, acc);
}

/// sum_i x[i]; the list must be non-empty so the owning trace is known.
inline Var sum(std::span<const Var> x) {
  if (x.empty()) throw DimensionError("sum of an empty list of traced values");
  auto* t = detail::owner(x[0]);
  double acc = 0.0;
  for (const auto& v : x) {
    if (v.trace != t) throw Error("operands belong to different traces");
    acc += v.value;
  }
  for (const auto& v : x) t->add_operand(v.id, 1.0);
  return t->finish(Op::sum, acc);
}

/// c + v * a with a constant.
inline Var muladd(const Var& c, const Var& v, double a) {
  return detail::common(c, v)->record(Op::muladd, c.value + v.value * a, {{c.id, 1.0}, {v.id, a}});
}

}  // namespace uavgnn::ad
