#pragma once

// Relational interference graph.
//
// Vertices: NK "green" UAV-to-DU links, vertex n*K + k, followed by M "yellow"
// D2D links, vertex NK + m (all ids 0-based). Vertex features are
// [power / cap, (gain dB + 60) / 10, x / half, y / half]; edge features are
// gains under the same (dB + 60) / 10 map. Row i of the adjacency matrix
// lists what vertex i aggregates:
//   green row  -> every yellow column carries beta0
//   yellow row -> yellow column j carries DT i -> DR j, green column (n,k)
//                 carries DT i -> DU k
// Green-green entries and the diagonal are zero (no edge). Neighbour lists
// follow this structure, so a gain that happens to normalize to 0 is still an edge.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "uavgnn/error.hpp"
#include "uavgnn/physics.hpp"

namespace uavgnn {

inline constexpr std::size_t kNodeFeatures = 4;
inline constexpr std::size_t kEdgeFeatures = 1;

inline std::size_t green_index(std::size_t n, std::size_t k, std::size_t K) { return n * K + k; }
inline std::size_t yellow_index(std::size_t m, std::size_t N, std::size_t K) { return N * K + m; }

struct GreenId {
  std::size_t n;
  std::size_t k;
};
inline GreenId green_inverse(std::size_t id, std::size_t K) { return {id / K, id % K}; }

/// Reference deployment used to evaluate the UAV-dependent vertex features.
struct InitDeployment {
  std::vector<Vec2> uav_xy;
  std::vector<double> p_uav0;
  std::vector<double> p_d2d0;
};

/// UAVs evenly spaced on a circle of radius half/4 around the DU centroid; all powers at caps.
inline InitDeployment default_init(const Scenario& s, std::size_t n_uav, const Region& region) {
  Vec2 centroid{0.0, 0.0};
  for (const auto& p : s.du_xy) {
    centroid.x += p.x;
    centroid.y += p.y;
  }
  centroid.x /= static_cast<double>(s.n_du());
  centroid.y /= static_cast<double>(s.n_du());
  const double radius = region.half / 4.0;
  InitDeployment init;
  for (std::size_t n = 0; n < n_uav; ++n) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(n_uav);
    init.uav_xy.push_back({centroid.x + radius * std::cos(a), centroid.y + radius * std::sin(a)});
  }
  init.p_uav0.assign(n_uav, s.constants.p_max_uav);
  init.p_d2d0.assign(s.n_d2d(), s.constants.p_max_d2d);
  return init;
}

/// Maps the -90..-30 dB range of the default constants onto roughly [-3, 3].
inline double normalize_gain(double linear_gain) { return (linear_to_db(linear_gain) + 60.0) / 10.0; }

struct Edge {
  std::uint32_t to;
  double feature;
};

struct InterferenceGraph {
  std::size_t n_uav = 0;
  std::size_t n_du = 0;
  std::size_t n_d2d = 0;
  std::size_t n_nodes = 0;
  std::size_t green_count = 0;
  std::vector<std::array<double, kNodeFeatures>> node_feat;
  std::vector<double> adj;  // n_nodes x n_nodes, row-major
  std::vector<std::vector<Edge>> nbrs;

  double a(std::size_t i, std::size_t j) const { return adj[i * n_nodes + j]; }
  bool is_green(std::size_t i) const { return i < green_count; }
};

inline InterferenceGraph build_graph(const Scenario& s, const InitDeployment& init,
                                     const Region& region) {
  const auto N = init.uav_xy.size();
  const auto K = s.n_du();
  const auto M = s.n_d2d();
  if (N == 0) throw DimensionError("build_graph: no UAVs in the initial deployment");
  if (init.p_uav0.size() != N) throw DimensionError("build_graph: UAV power count mismatch");
  if (init.p_d2d0.size() != M) throw DimensionError("build_graph: DT power count mismatch");
  if (K == 0) throw DimensionError("build_graph: scenario has no DUs");
  if (s.dr_xy.size() != M) throw DimensionError("build_graph: DT/DR count mismatch");

  const auto& c = s.constants;
  InterferenceGraph g;
  g.n_uav = N;
  g.n_du = K;
  g.n_d2d = M;
  g.green_count = N * K;
  g.n_nodes = N * K + M;
  g.node_feat.resize(g.n_nodes);
  g.adj.assign(g.n_nodes * g.n_nodes, 0.0);
  g.nbrs.resize(g.n_nodes);

  auto nx = [&](double x) { return (x - region.center.x) / region.half; };
  auto ny = [&](double y) { return (y - region.center.y) / region.half; };

  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      const auto h = los_gain(Point<double>{init.uav_xy[n].x, init.uav_xy[n].y}, s.du_xy[k], c);
      g.node_feat[green_index(n, k, K)] = {init.p_uav0[n] / c.p_max_uav, normalize_gain(h),
                                           nx(s.du_xy[k].x), ny(s.du_xy[k].y)};
    }
  }
  for (std::size_t m = 0; m < M; ++m) {
    g.node_feat[yellow_index(m, N, K)] = {init.p_d2d0[m] / c.p_max_d2d,
                                          normalize_gain(dt_dr_gain(s, m, m)), nx(s.dr_xy[m].x),
                                          ny(s.dr_xy[m].y)};
  }

  const double beta0_feature = normalize_gain(c.beta0);
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    for (std::size_t j = 0; j < g.n_nodes; ++j) {
      if (i == j) continue;
      double v = 0.0;
      bool edge = false;
      if (i < g.green_count) {
        if (j >= g.green_count) {
          v = beta0_feature;
          edge = true;
        }
      } else {
        const auto m = i - g.green_count;
        if (j >= g.green_count) {
          v = normalize_gain(dt_dr_gain(s, m, j - g.green_count));
        } else {
          v = normalize_gain(dt_du_gain(s, m, j % K));
        }
        edge = true;
      }
      g.adj[i * g.n_nodes + j] = v;
      if (edge) g.nbrs[i].push_back({static_cast<std::uint32_t>(j), v});
    }
  }
  return g;
}

inline InterferenceGraph build_graph(const Scenario& s, std::size_t n_uav, const Region& region) {
  return build_graph(s, default_init(s, n_uav, region), region);
}

/// Ordered neighbour list of vertex i (ascending ids).
inline const std::vector<Edge>& neighbors(const InterferenceGraph& g, std::size_t i) {
  if (i >= g.n_nodes) throw DimensionError("neighbors: vertex id out of range");
  return g.nbrs[i];
}

}  // namespace uavgnn
