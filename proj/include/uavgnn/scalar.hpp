#pragma once

// Scalar vocabulary shared by plain and traced evaluation. Templated model code
// calls these unqualified; overloads for ad::Var are found through ADL.

#include <cmath>
#include <numbers>
#include <span>

#include "uavgnn/autodiff.hpp"
#include "uavgnn/error.hpp"

namespace uavgnn {

using ad::Var;

inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double tanh(double x) { return std::tanh(x); }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double sigmoid(double x) { return ad::sigmoid_value(x); }
inline double log2_1p(double x) { return std::log1p(x) / std::numbers::ln2; }
inline double pow_const(double x, double p) { return std::pow(x, p); }
inline double muladd(double c, double v, double a) { return c + v * a; }

inline double dot(std::span<const double> a, std::span<const double> b, double init) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double acc = init;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double sum(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc;
}

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value; }

/// A constant of the same scalar kind as `like`.
inline double lift(double /*like*/, double v) { return v; }
inline Var lift(const Var& like, double v) { return ad::detail::owner(like)->constant(v); }

}  // namespace uavgnn

namespace uavgnn::ad {

inline Var relu(const Var& x) { return max0(x); }

}  // namespace uavgnn::ad
