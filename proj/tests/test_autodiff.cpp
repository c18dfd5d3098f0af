#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "test_util.hpp"
#include "uavgnn/autodiff.hpp"
#include "uavgnn/gradcheck.hpp"
#include "uavgnn/scalar.hpp"

using namespace uavgnn;
using namespace uavgnn::testing;
using ad::Trace;

namespace {

double grad_of(double x0, Var (*f)(const Var&)) {
  Trace t;
  const Var x = t.leaf(x0);
  return t.backward(f(x))[x];
}

}  // namespace

TEST(Primitives, ReferenceValues) {
  Trace t;
  const Var x = t.leaf(0.0);
  const Var s = ad::sigmoid(x);
  EXPECT_EQ(s.value, 0.5);
  EXPECT_EQ(t.backward(s)[x], 0.25);

  const Var y = t.leaf(-3.0);
  const Var r = ad::max0(y);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(t.backward(r)[y], 0.0);

  const Var one = t.leaf(1.0);
  EXPECT_NEAR(t.backward(ad::log2_1p(one))[one], 0.7213, 1e-4);
  EXPECT_NEAR(t.backward(ad::log2_1p(one))[one], 1.0 / (2.0 * std::numbers::ln2), 1e-15);
}

TEST(Primitives, DerivativesMatchClosedForms) {
  for (double x0 : {-2.3, -0.4, 0.7, 1.9}) {
    EXPECT_NEAR(grad_of(x0, [](const Var& x) { return ad::exp(x); }), std::exp(x0), 1e-14);
    EXPECT_NEAR(grad_of(x0, [](const Var& x) { return ad::tanh(x); }), 1.0 / std::pow(std::cosh(x0), 2), 1e-14);
    EXPECT_NEAR(grad_of(x0, [](const Var& x) { return ad::sigmoid(x); }),
                std::exp(-x0) / std::pow(1.0 + std::exp(-x0), 2), 1e-14);
    EXPECT_NEAR(grad_of(x0, [](const Var& x) { return x * x * x; }), 3 * x0 * x0, 1e-13);
    EXPECT_NEAR(grad_of(x0, [](const Var& x) { return 1.0 / x; }), -1.0 / (x0 * x0), 1e-13);
    EXPECT_NEAR(grad_of(x0, [](const Var& x) { return -x - 2.0; }), -1.0, 0.0);
    EXPECT_NEAR(grad_of(x0, [](const Var& x) { return ad::pow_const(x * x, 1.5); }), 3.0 * x0 * std::abs(x0), 1e-13);
  }
  EXPECT_NEAR(grad_of(2.0, [](const Var& x) { return ad::log(x); }), 0.5, 1e-16);
}

TEST(Primitives, SaturatedUnitsKeepRelativeAccuracy) {
  const long double e40 = std::exp(-40.0L);
  EXPECT_LT(rel_diff(grad_of(20.0, [](const Var& x) { return ad::tanh(x); }),
                     static_cast<double>(1.0L / (std::cosh(20.0L) * std::cosh(20.0L)))),
            1e-12);
  EXPECT_LT(rel_diff(grad_of(40.0, [](const Var& x) { return ad::sigmoid(x); }),
                     static_cast<double>(e40 / ((1 + e40) * (1 + e40)))),
            1e-12);
  EXPECT_LT(rel_diff(grad_of(-40.0, [](const Var& x) { return ad::sigmoid(x); }),
                     static_cast<double>(e40 / ((1 + e40) * (1 + e40)))),
            1e-12);
}

TEST(Backward, LeafAndProduct) {
  Trace t;
  const Var x = t.leaf(3.0);
  EXPECT_EQ(t.backward(x)[x], 1.0);
  const Var y = t.leaf(2.0);
  const auto g = t.backward(x * y);
  EXPECT_EQ(g[x], 2.0);
  EXPECT_EQ(g[y], 3.0);
}

TEST(Backward, ForeignTraceIsRejected) {
  Trace a, b;
  const Var x = a.leaf(1.0);
  const Var y = b.leaf(2.0);
  EXPECT_THROW(b.backward(x), Error);
  EXPECT_THROW(x + y, Error);
  EXPECT_THROW(a.backward(x)[y], Error);
  const Var z = a.leaf(1.0);
  const std::vector<Var> mixed{z, y};
  EXPECT_THROW(ad::sum(mixed), Error);
}

TEST(Backward, DomainErrors) {
  Trace t;
  const Var z = t.leaf(0.0);
  const Var n = t.leaf(-1.5);
  try {
    ad::log(n);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_EQ(e.operand(), -1.5);
  }
  EXPECT_THROW(ad::log(z), DomainError);
  EXPECT_THROW(1.0 / z, DomainError);
  EXPECT_THROW(n / z, DomainError);
  EXPECT_THROW(ad::log2_1p(t.leaf(-1.0)), DomainError);
  EXPECT_THROW(ad::pow_const(n, 0.5), DomainError);
}

TEST(Backward, Linearity) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    Trace t;
    const Var x = t.leaf(nd(rng)), y = t.leaf(nd(rng));
    const Var f = ad::tanh(x * y) + ad::exp(0.3 * x);
    const Var g = ad::sigmoid(x - y) * y;
    const double a = nd(rng), b = nd(rng);
    const auto gf = t.backward(f), gg = t.backward(g), gc = t.backward(a * f + b * g);
    EXPECT_NEAR(gc[x], a * gf[x] + b * gg[x], 1e-12);
    EXPECT_NEAR(gc[y], a * gf[y] + b * gg[y], 1e-12);
  }
}

TEST(Backward, DeterministicAndRepeatable) {
  auto build = [](Trace& t, std::vector<Var>& in) {
    in = {t.leaf(0.3), t.leaf(-1.2), t.leaf(2.0)};
    Var acc = t.constant(0.0);
    for (int i = 0; i < 5; ++i) acc = acc + ad::max0(in[i % 3] * in[(i + 1) % 3] + 0.5) * ad::sigmoid(in[2]);
    return acc;
  };
  Trace t1, t2;
  std::vector<Var> a, b;
  const Var r1 = build(t1, a), r2 = build(t2, b);
  EXPECT_EQ(t1.size(), t2.size());
  EXPECT_EQ(t1.operand_count(), t2.operand_count());
  const auto g1 = t1.backward(r1), g1b = t1.backward(r1), g2 = t2.backward(r2);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(g1[a[i]], g1b[a[i]]);
    EXPECT_EQ(g1[a[i]], g2[b[i]]);
  }
}

TEST(Backward, FusedReductionsMatchScalarComposition) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  Trace t;
  std::vector<Var> a, b;
  std::vector<double> c;
  for (int i = 0; i < 7; ++i) {
    a.push_back(t.leaf(nd(rng)));
    b.push_back(t.leaf(nd(rng)));
    c.push_back(nd(rng));
  }
  const Var init = t.leaf(nd(rng));

  Var manual = init;
  for (int i = 0; i < 7; ++i) manual = manual + a[i] * b[i];
  const Var fused = ad::dot(a, b, init);
  EXPECT_NEAR(fused.value, manual.value, 1e-14);
  const auto gm = t.backward(manual), gf = t.backward(fused);
  for (int i = 0; i < 7; ++i) {
    EXPECT_NEAR(gf[a[i]], gm[a[i]], 1e-15);
    EXPECT_NEAR(gf[b[i]], gm[b[i]], 1e-15);
  }
  EXPECT_EQ(gf[init], 1.0);

  Var manual_c = t.constant(0.25);
  for (int i = 0; i < 7; ++i) manual_c = manual_c + a[i] * c[i];
  const Var fused_c = ad::dot(a, c, 0.25);
  const Var fused_ci = ad::dot(a, c, t.constant(0.25));
  EXPECT_NEAR(fused_c.value, manual_c.value, 1e-14);
  EXPECT_NEAR(fused_ci.value, manual_c.value, 1e-14);
  const auto gmc = t.backward(manual_c), gfc = t.backward(fused_c);
  for (int i = 0; i < 7; ++i) EXPECT_EQ(gfc[a[i]], gmc[a[i]]);

  Var manual_s = a[0];
  for (int i = 1; i < 7; ++i) manual_s = manual_s + a[i];
  EXPECT_NEAR(ad::sum(a).value, manual_s.value, 1e-14);

  const Var ma = ad::muladd(init, a[0], 3.0);
  const auto gma = t.backward(ma);
  EXPECT_EQ(ma.value, init.value + 3.0 * a[0].value);
  EXPECT_EQ(gma[init], 1.0);
  EXPECT_EQ(gma[a[0]], 3.0);

  EXPECT_THROW(ad::dot(a, std::span<const Var>(b).first(3), init), DimensionError);
  EXPECT_THROW(ad::sum(std::span<const Var>{}), DimensionError);
}

TEST(Backward, SharedSubexpressionsAccumulate) {
  Trace t;
  const Var x = t.leaf(1.5);
  const Var u = ad::exp(x);
  const Var f = u * u + u;
  EXPECT_NEAR(t.backward(f)[x], 2 * std::exp(3.0) + std::exp(1.5), 1e-12);
}

TEST(FiniteDiff, QuadraticIsExact) {
  const TracedFn f = [](std::span<const Var> x) { return 3.0 * x[0] * x[0] + x[0] * x[1] - 2.0 * x[1]; };
  const std::vector<double> x{0.7, -1.1};
  const auto r = finite_diff_check(f, x, 1e-4);
  EXPECT_EQ(r.kinks, 0u);
  EXPECT_LT(r.max_rel_error, 1e-9);
  ASSERT_EQ(r.coords.size(), 2u);
  EXPECT_NEAR(r.coords[0].analytic, 6 * 0.7 - 1.1, 1e-14);
}

TEST(FiniteDiff, KinkIsReportedAndExcluded) {
  const TracedFn f = [](std::span<const Var> x) { return ad::max0(x[0]) + x[1] * x[1]; };
  const std::vector<double> x{0.0, 2.0};
  const auto r = finite_diff_check(f, x, 1e-3);
  EXPECT_EQ(r.kinks, 1u);
  EXPECT_TRUE(r.coords[0].kink);
  EXPECT_FALSE(r.coords[1].kink);
  EXPECT_LT(r.max_rel_error, 1e-9);
  EXPECT_THROW(finite_diff_check(f, x, 0.0), ConfigError);
  EXPECT_THROW(finite_diff_check(f, x, 1e-3, {5}), DimensionError);
}

TEST(FiniteDiff, SmallPerceptron) {
  // 3 -> 5 -> 1 network with tanh and ReLU units; parameters are the leaves.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 0.7);
  const std::vector<double> input{0.4, -0.9, 1.3};
  std::vector<double> theta(3 * 5 + 5 + 5 + 1);
  for (auto& v : theta) v = nd(rng);
  const TracedFn f = [&](std::span<const Var> p) {
    std::vector<Var> hidden;
    for (int j = 0; j < 5; ++j) {
      const Var pre = ad::dot(p.subspan(3 * j, 3), std::span<const double>(input), p[15 + j]);
      hidden.push_back(j % 2 ? ad::tanh(pre) : ad::max0(pre));
    }
    const Var out = ad::dot(std::span<const Var>(hidden), p.subspan(20, 5), p[25]);
    return ad::log2_1p(out * out);
  };
  const auto r = finite_diff_check(f, theta, 1e-6);
  EXPECT_LT(r.max_rel_error, 1e-4);
  EXPECT_GT(r.coords.size() - r.kinks, 20u);
}

TEST(Scalar, OverloadsAgreeWithTracedValues) {
  Trace t;
  for (double v : {-3.0, -0.2, 0.0, 0.9, 4.0}) {
    const Var x = t.leaf(v);
    EXPECT_EQ(relu(v), ad::max0(x).value);
    EXPECT_EQ(sigmoid(v), ad::sigmoid(x).value);
    EXPECT_EQ(uavgnn::tanh(v), ad::tanh(x).value);
    if (v > -1.0) {
      EXPECT_NEAR(log2_1p(v), ad::log2_1p(x).value, 1e-15);
    }
  }
}
