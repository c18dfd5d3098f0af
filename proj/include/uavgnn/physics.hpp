#pragma once

// Channel, SINR, rate, and penalized-loss model for multi-UAV downlink
// coexisting with underlay D2D pairs. Everything is in linear units; dB/dBm
// only appear through db_to_linear/dbm_to_watt at the configuration boundary.
//
// The rate functions are templated on the scalar type so the same code path
// evaluates plain doubles and traced ad::Var values.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "uavgnn/error.hpp"
#include "uavgnn/scalar.hpp"

namespace uavgnn {

template <class T>
struct Point {
  T x{};
  T y{};
};

using Vec2 = Point<double>;

inline bool operator==(const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }

inline double db_to_linear(double v_db) { return std::pow(10.0, v_db / 10.0); }
inline double dbm_to_watt(double v_dbm) { return std::pow(10.0, (v_dbm - 30.0) / 10.0); }
inline double linear_to_db(double v) { return 10.0 * std::log10(v); }

struct PhysConstants {
  double beta0 = 1e-3;       // -30 dB
  double height = 10.0;      // m
  double wavelength = 0.125; // m
  double d1 = 1.0;           // m
  double gamma = 3.0;
  double noise = 1e-9;       // -60 dBm
  double p_max_uav = 1.0;    // 30 dBm
  double p_max_d2d = 1e-2;   // 10 dBm
  double r_min = 0.2;        // bit/s/Hz

  /// Throws ConfigError naming the first offending field.
  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ConfigError(std::string("constants.") + name + " must be finite and > 0");
      }
    };
    positive(beta0, "beta0");
    positive(height, "height");
    positive(wavelength, "wavelength");
    positive(d1, "d1");
    positive(gamma, "gamma");
    positive(noise, "noise");
    positive(p_max_uav, "p_max_uav");
    positive(p_max_d2d, "p_max_d2d");
    positive(r_min, "r_min");
    if (gamma < 2.0) throw ConfigError("constants.gamma must be >= 2");
  }

  friend bool operator==(const PhysConstants&, const PhysConstants&) = default;
};

/// Optional multiplicative small-scale fading on the ground links. Empty means
/// the deterministic path-loss model.
struct Fading {
  std::vector<double> dt_du;  // M x K, row-major by DT
  std::vector<double> dt_dr;  // M x M, [i * M + m] is DT i toward DR m

  bool empty() const noexcept { return dt_du.empty() && dt_dr.empty(); }
  friend bool operator==(const Fading&, const Fading&) = default;
};

struct Scenario {
  std::vector<Vec2> du_xy;
  std::vector<Vec2> dt_xy;
  std::vector<Vec2> dr_xy;
  PhysConstants constants;
  Fading fading;

  std::size_t n_du() const noexcept { return du_xy.size(); }
  std::size_t n_d2d() const noexcept { return dt_xy.size(); }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

template <class T>
struct Decisions {
  std::vector<Point<T>> uav_xy;
  std::vector<T> p_uav;
  std::vector<T> p_d2d;

  std::size_t n_uav() const noexcept { return uav_xy.size(); }
};

/// Square deployment region [center +- half]^2.
struct Region {
  Vec2 center{0.0, 0.0};
  double half = 50.0;

  bool contains(const Vec2& p, double slack = 0.0) const {
    return std::abs(p.x - center.x) <= half + slack && std::abs(p.y - center.y) <= half + slack;
  }
  friend bool operator==(const Region&, const Region&) = default;
};

inline double distance(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Air-to-ground line-of-sight gain beta0 / (dx^2 + dy^2 + H^2).
template <class T>
T los_gain(const Point<T>& uav, const Vec2& ground, const PhysConstants& c) {
  const T dx = uav.x - ground.x;
  const T dy = uav.y - ground.y;
  return c.beta0 / (dx * dx + dy * dy + c.height * c.height);
}

/// Ground-to-ground path-loss gain (lambda / (4 pi d1))^2 (d1 / d)^gamma.
inline double ground_gain(double d, const PhysConstants& c) {
  if (!(d > 0.0)) throw DomainError("ground_gain: distance must be positive", d);
  const double ref = c.wavelength / (4.0 * std::numbers::pi * c.d1);
  return ref * ref * std::pow(c.d1 / d, c.gamma);
}

/// Interference gain from DT m to DU k.
inline double dt_du_gain(const Scenario& s, std::size_t m, std::size_t k) {
  const double g = ground_gain(distance(s.dt_xy[m], s.du_xy[k]), s.constants);
  return s.fading.dt_du.empty() ? g : g * s.fading.dt_du[m * s.n_du() + k];
}

/// Gain from DT i to DR m; i == m is the D2D direct link.
inline double dt_dr_gain(const Scenario& s, std::size_t i, std::size_t m) {
  const double g = ground_gain(distance(s.dt_xy[i], s.dr_xy[m]), s.constants);
  return s.fading.dt_dr.empty() ? g : g * s.fading.dt_dr[i * s.n_d2d() + m];
}

inline void validate(const Scenario& s) {
  s.constants.validate();
  if (s.du_xy.empty()) throw ConfigError("scenario needs at least one DU");
  if (s.dt_xy.size() != s.dr_xy.size()) throw DimensionError("scenario: DT/DR count mismatch");
  auto finite = [](const std::vector<Vec2>& pts, const char* what) {
    for (const auto& p : pts) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw ConfigError(std::string("scenario: non-finite ") + what + " coordinate");
      }
    }
  };
  finite(s.du_xy, "DU");
  finite(s.dt_xy, "DT");
  finite(s.dr_xy, "DR");
  for (std::size_t m = 0; m < s.n_d2d(); ++m) {
    if (!(distance(s.dt_xy[m], s.dr_xy[m]) > 0.0)) {
      throw ConfigError("scenario: D2D pair " + std::to_string(m) + " has co-located DT and DR");
    }
  }
  const auto M = s.n_d2d();
  if (!s.fading.empty() &&
      (s.fading.dt_du.size() != M * s.n_du() || s.fading.dt_dr.size() != M * M)) {
    throw DimensionError("scenario: fading table shape does not match counts");
  }
}

template <class T>
void check_dimensions(const Scenario& s, const Decisions<T>& d) {
  if (d.n_uav() == 0) throw DimensionError("decisions need at least one UAV");
  if (d.p_uav.size() != d.n_uav()) throw DimensionError("decisions: UAV power count mismatch");
  if (d.p_d2d.size() != s.n_d2d()) throw DimensionError("decisions: DT power count mismatch");
}

/// SINR at DU k. The UAV signals are summed over n against a common denominator.
template <class T>
T du_sinr(std::size_t k, const Scenario& s, const Decisions<T>& d) {
  const auto& c = s.constants;
  T signal = d.p_uav[0] * los_gain(d.uav_xy[0], s.du_xy[k], c);
  for (std::size_t n = 1; n < d.n_uav(); ++n) {
    signal = signal + d.p_uav[n] * los_gain(d.uav_xy[n], s.du_xy[k], c);
  }
  if (s.n_d2d() == 0) return signal / c.noise;
  std::vector<double> g(s.n_d2d());
  for (std::size_t m = 0; m < g.size(); ++m) g[m] = dt_du_gain(s, m, k);
  const T interference = dot(std::span<const T>(d.p_d2d), std::span<const double>(g), c.noise);
  return signal / interference;
}

/// SINR at DR m: own DT over other DTs (each at its own power), all UAVs, and noise.
template <class T>
T dr_sinr(std::size_t m, const Scenario& s, const Decisions<T>& d) {
  const auto& c = s.constants;
  const auto M = s.n_d2d();
  T interference = d.p_uav[0] * los_gain(d.uav_xy[0], s.dr_xy[m], c);
  for (std::size_t n = 1; n < d.n_uav(); ++n) {
    interference = interference + d.p_uav[n] * los_gain(d.uav_xy[n], s.dr_xy[m], c);
  }
  for (std::size_t i = 0; i < M; ++i) {
    if (i != m) interference = interference + d.p_d2d[i] * dt_dr_gain(s, i, m);
  }
  return d.p_d2d[m] * dt_dr_gain(s, m, m) / (interference + c.noise);
}

template <class T>
T du_sum_rate(const Scenario& s, const Decisions<T>& d) {
  check_dimensions(s, d);
  T total = log2_1p(du_sinr(0, s, d));
  for (std::size_t k = 1; k < s.n_du(); ++k) total = total + log2_1p(du_sinr(k, s, d));
  return total;
}

template <class T>
std::vector<T> d2d_rates(const Scenario& s, const Decisions<T>& d) {
  check_dimensions(s, d);
  std::vector<T> r;
  r.reserve(s.n_d2d());
  for (std::size_t m = 0; m < s.n_d2d(); ++m) r.push_back(log2_1p(dr_sinr(m, s, d)));
  return r;
}

/// -sum_k log2(1 + SINR_k) + alpha * sum_m max(0, R_min - log2(1 + SINR_m)).
/// Power caps are not penalized; callers keep powers inside their caps.
template <class T>
T penalized_loss(const Scenario& s, const Decisions<T>& d, double alpha) {
  T loss = -du_sum_rate(s, d);
  if (alpha == 0.0) return loss;
  for (const auto& r : d2d_rates(s, d)) loss = loss + alpha * relu(s.constants.r_min - r);
  return loss;
}

inline Decisions<double> values_of(const Decisions<Var>& d) {
  Decisions<double> out;
  for (const auto& p : d.uav_xy) out.uav_xy.push_back({p.x.value, p.y.value});
  for (const auto& p : d.p_uav) out.p_uav.push_back(p.value);
  for (const auto& p : d.p_d2d) out.p_d2d.push_back(p.value);
  return out;
}

}  // namespace uavgnn
