#pragma once

// Message-passing network over an InterferenceGraph.
//
// Layer l maps embeddings x^(l) (width d) to x^(l+1) (width w):
//   m_i       = mean_{j in N(i)} MLP1([x_j, A_ij])
//   x_i^(l+1) = ReLU(MLP2([x_i, m_i]))
// where each MLP is Linear -> ReLU -> Linear with hidden width w.
//
// MLP1's first linear map splits into a per-vertex part U x_j and a per-edge
// part v * A_ij, and its second linear map commutes with the neighbour mean:
//   m_i = W2 * mean_j ReLU(U x_j + v A_ij + b1) + b2.
// The forward pass evaluates it in that form; the result is the same function.
// (A plain sum compounds the neighbour count over the layers and saturates the
// readout at initialization.)
//
// Readout: a 3-output head on every green vertex (x logit, y logit, power
// logit) averaged over the K vertices of each UAV, and a 1-output head on
// every yellow vertex. Positions are center + half * tanh(.), powers are
// cap * sigmoid(.) with the logit floored at -700 so the power cannot
// underflow to exactly zero.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "uavgnn/autodiff.hpp"
#include "uavgnn/error.hpp"
#include "uavgnn/graph.hpp"
#include "uavgnn/physics.hpp"
#include "uavgnn/scalar.hpp"

namespace uavgnn {

inline const std::vector<std::size_t> kDefaultWidths{32, 64, 32};

struct Block {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;  // 1 for bias vectors
  std::size_t offset = 0;
  bool is_bias = false;

  std::size_t size() const noexcept { return rows * cols; }
};

struct LayerBlocks {
  std::size_t in_dim = 0;
  std::size_t width = 0;
  std::size_t m1_w1, m1_b1, m1_w2, m1_b2;  // MLP1: w x (d+1), w, w x w, w
  std::size_t m2_w1, m2_b1, m2_w2, m2_b2;  // MLP2: w x (d+w), w, w x w, w
};

/// Flat parameter layout; every matrix is row-major.
class ParamLayout {
public:
  explicit ParamLayout(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
    if (widths_.empty()) throw ConfigError("GNN needs at least one message-passing layer");
    std::size_t d = kNodeFeatures;
    for (std::size_t l = 0; l < widths_.size(); ++l) {
      const auto w = widths_[l];
      if (w == 0) throw ConfigError("GNN layer width must be positive");
      const auto p = "layer" + std::to_string(l) + ".";
      LayerBlocks lb;
      lb.in_dim = d;
      lb.width = w;
      lb.m1_w1 = add(p + "mlp1.w1", w, d + kEdgeFeatures, false);
      lb.m1_b1 = add(p + "mlp1.b1", w, 1, true);
      lb.m1_w2 = add(p + "mlp1.w2", w, w, false);
      lb.m1_b2 = add(p + "mlp1.b2", w, 1, true);
      lb.m2_w1 = add(p + "mlp2.w1", w, d + w, false);
      lb.m2_b1 = add(p + "mlp2.b1", w, 1, true);
      lb.m2_w2 = add(p + "mlp2.w2", w, w, false);
      lb.m2_b2 = add(p + "mlp2.b2", w, 1, true);
      layers_.push_back(lb);
      d = w;
    }
    green_w_ = add("readout.green.w", 3, d, false);
    green_b_ = add("readout.green.b", 3, 1, true);
    yellow_w_ = add("readout.yellow.w", 1, d, false);
    yellow_b_ = add("readout.yellow.b", 1, 1, true);
  }

  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  const std::vector<LayerBlocks>& layers() const noexcept { return layers_; }
  const Block& block(std::size_t i) const { return blocks_.at(i); }
  std::size_t total() const noexcept { return total_; }
  std::size_t final_width() const noexcept { return widths_.back(); }
  std::size_t green_w() const noexcept { return green_w_; }
  std::size_t green_b() const noexcept { return green_b_; }
  std::size_t yellow_w() const noexcept { return yellow_w_; }
  std::size_t yellow_b() const noexcept { return yellow_b_; }

  /// Index of the block holding flat parameter `p`.
  std::size_t block_of(std::size_t p) const {
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      if (p >= blocks_[b].offset && p < blocks_[b].offset + blocks_[b].size()) return b;
    }
    throw DimensionError("parameter index out of range");
  }

private:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols, bool bias) {
    blocks_.push_back({std::move(name), rows, cols, total_, bias});
    total_ += rows * cols;
    return blocks_.size() - 1;
  }

  std::vector<std::size_t> widths_;
  std::vector<Block> blocks_;
  std::vector<LayerBlocks> layers_;
  std::size_t total_ = 0;
  std::size_t green_w_ = 0, green_b_ = 0, yellow_w_ = 0, yellow_b_ = 0;
};

struct GnnParams {
  ParamLayout layout{kDefaultWidths};
  std::vector<double> values;

  friend bool operator==(const GnnParams& a, const GnnParams& b) {
    return a.layout.widths() == b.layout.widths() && a.values == b.values;
  }
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
inline GnnParams init_params(std::uint64_t seed, std::vector<std::size_t> widths = kDefaultWidths) {
  GnnParams p{ParamLayout(std::move(widths)), {}};
  p.values.assign(p.layout.total(), 0.0);
  std::mt19937_64 rng(seed);
  for (const auto& b : p.layout.blocks()) {
    if (b.is_bias) continue;
    const double bound = std::sqrt(6.0 / static_cast<double>(b.cols + b.rows));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < b.size(); ++i) p.values[b.offset + i] = u(rng);
  }
  return p;
}

/// Read-only view of a flat parameter vector of scalar type T.
template <class T>
class ParamView {
public:
  ParamView(std::span<const T> flat, const ParamLayout& layout) : flat_(flat), layout_(&layout) {
    if (flat.size() != layout.total()) throw DimensionError("parameter vector length mismatch");
  }

  std::span<const T> row(std::size_t block, std::size_t r, std::size_t col_begin = 0,
                         std::size_t col_count = SIZE_MAX) const {
    const auto& b = layout_->block(block);
    if (col_count == SIZE_MAX) col_count = b.cols - col_begin;
    return flat_.subspan(b.offset + r * b.cols + col_begin, col_count);
  }
  const T& at(std::size_t block, std::size_t r, std::size_t c = 0) const {
    const auto& b = layout_->block(block);
    return flat_[b.offset + r * b.cols + c];
  }
  const ParamLayout& layout() const noexcept { return *layout_; }

private:
  std::span<const T> flat_;
  const ParamLayout* layout_;
};

template <class T>
using Embeddings = std::vector<std::vector<T>>;

inline Embeddings<double> input_embeddings(const InterferenceGraph& g) {
  Embeddings<double> e(g.n_nodes);
  for (std::size_t i = 0; i < g.n_nodes; ++i) e[i].assign(g.node_feat[i].begin(), g.node_feat[i].end());
  return e;
}

/// One message-passing round. `E` is the scalar type of the incoming
/// embeddings (plain features at layer 0), `T` that of the parameters.
template <class T, class E>
Embeddings<T> layer_forward(std::size_t l, const InterferenceGraph& g, const Embeddings<E>& emb,
                            const ParamView<T>& p) {
  const auto& lb = p.layout().layers().at(l);
  const auto d = lb.in_dim;
  const auto w = lb.width;
  const auto n = g.n_nodes;
  if (emb.size() != n) throw DimensionError("layer_forward: embedding count mismatch");
  const T& anchor = p.at(lb.m1_b1, 0);

  // Per-vertex part of MLP1's first layer, bias included.
  Embeddings<T> pre(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (emb[j].size() != d) throw DimensionError("layer_forward: embedding width mismatch");
    pre[j].reserve(w);
    for (std::size_t r = 0; r < w; ++r) {
      pre[j].push_back(dot(p.row(lb.m1_w1, r, 0, d), std::span<const E>(emb[j]), p.at(lb.m1_b1, r)));
    }
  }

  Embeddings<T> out(n);
  std::vector<T> hidden_sum(w);
  std::vector<T> message(w);
  std::vector<T> hidden2(w);
  std::vector<T> terms;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = neighbors(g, i);
    if (nb.empty()) {
      for (std::size_t r = 0; r < w; ++r) message[r] = lift(anchor, 0.0);
    } else {
      for (std::size_t r = 0; r < w; ++r) {
        const T& edge_coef = p.at(lb.m1_w1, r, d);
        terms.clear();
        for (const auto& e : nb) terms.push_back(relu(muladd(pre[e.to][r], edge_coef, e.feature)));
        hidden_sum[r] = sum(std::span<const T>(terms)) / static_cast<double>(nb.size());
      }
      for (std::size_t r = 0; r < w; ++r) {
        message[r] = dot(p.row(lb.m1_w2, r), std::span<const T>(hidden_sum), p.at(lb.m1_b2, r));
      }
    }
    for (std::size_t r = 0; r < w; ++r) {
      const T own = dot(p.row(lb.m2_w1, r, d, w), std::span<const T>(message), p.at(lb.m2_b1, r));
      hidden2[r] = relu(dot(p.row(lb.m2_w1, r, 0, d), std::span<const E>(emb[i]), own));
    }
    out[i].reserve(w);
    for (std::size_t r = 0; r < w; ++r) {
      out[i].push_back(relu(dot(p.row(lb.m2_w2, r), std::span<const T>(hidden2), p.at(lb.m2_b2, r))));
    }
  }
  return out;
}

template <class T>
Embeddings<T> embed(const InterferenceGraph& g, const ParamView<T>& p) {
  const auto& layers = p.layout().layers();
  Embeddings<T> x = layer_forward<T, double>(0, g, input_embeddings(g), p);
  for (std::size_t l = 1; l < layers.size(); ++l) x = layer_forward<T, T>(l, g, x, p);
  return x;
}

inline constexpr double kMinPowerLogit = -700.0;

/// The logit itself, or the constant floor (zero gradient) below kMinPowerLogit.
/// A branch rather than relu(z - floor) + floor, which would round z to the
/// spacing of doubles near 700.
template <class T>
T floor_power_logit(const T& z) {
  return value_of(z) < kMinPowerLogit ? lift(z, kMinPowerLogit) : z;
}

template <class T>
Decisions<T> readout(const InterferenceGraph& g, const Embeddings<T>& emb, const ParamView<T>& p,
                     const PhysConstants& c, const Region& region) {
  const auto& L = p.layout();
  const auto K = g.n_du;
  Decisions<T> d;
  std::vector<T> logits(K);
  for (std::size_t n = 0; n < g.n_uav; ++n) {
    T avg[3];
    for (std::size_t o = 0; o < 3; ++o) {
      for (std::size_t k = 0; k < K; ++k) {
        logits[k] = dot(p.row(L.green_w(), o), std::span<const T>(emb[green_index(n, k, K)]),
                        p.at(L.green_b(), o));
      }
      avg[o] = sum(std::span<const T>(logits)) / static_cast<double>(K);
    }
    d.uav_xy.push_back({region.half * tanh(avg[0]) + region.center.x,
                        region.half * tanh(avg[1]) + region.center.y});
    d.p_uav.push_back(c.p_max_uav * sigmoid(floor_power_logit(avg[2])));
  }
  for (std::size_t m = 0; m < g.n_d2d; ++m) {
    const T logit = dot(p.row(L.yellow_w(), 0),
                        std::span<const T>(emb[yellow_index(m, g.n_uav, K)]), p.at(L.yellow_b(), 0));
    d.p_d2d.push_back(c.p_max_d2d * sigmoid(floor_power_logit(logit)));
  }
  return d;
}

/// Graph -> decisions for any scalar type.
template <class T>
Decisions<T> forward(const InterferenceGraph& g, const ParamView<T>& p, const PhysConstants& c,
                     const Region& region) {
  return readout(g, embed(g, p), p, c, region);
}

/// Plain evaluation from a scenario, with the default reference deployment.
inline Decisions<double> forward(const Scenario& s, std::size_t n_uav, const GnnParams& params,
                                 const Region& region) {
  const auto g = build_graph(s, n_uav, region);
  return forward(g, ParamView<double>(params.values, params.layout), s.constants, region);
}

/// Registers every parameter as a leaf of `trace`.
inline std::vector<Var> bind(ad::Trace& trace, const GnnParams& params) {
  std::vector<Var> leaves;
  leaves.reserve(params.values.size());
  for (double v : params.values) leaves.push_back(trace.leaf(v));
  return leaves;
}

// ---- checkpoint -----------------------------------------------------------
//
//   # <free-form comment lines, e.g. effective configuration>
//   uavgnn-checkpoint 1
//   widths <w1> <w2> ...
//   block <name> <rows> <cols>
//   <rows*cols values, space separated>
//   ...
//   end

inline void write_checkpoint(std::ostream& os, const GnnParams& p,
                             const std::vector<std::string>& comments = {}) {
  for (const auto& c : comments) os << "# " << c << '\n';
  os << "uavgnn-checkpoint 1\nwidths";
  for (auto w : p.layout.widths()) os << ' ' << w;
  os << '\n';
  char buf[32];
  for (const auto& b : p.layout.blocks()) {
    os << "block " << b.name << ' ' << b.rows << ' ' << b.cols << '\n';
    for (std::size_t i = 0; i < b.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", p.values[b.offset + i]);
      os << (i ? " " : "") << buf;
    }
    os << '\n';
  }
  os << "end\n";
}

inline GnnParams read_checkpoint(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&](const char* field) {
    while (std::getline(is, line)) {
      ++line_no;
      if (!line.empty() && line[0] != '#') return;
    }
    throw ParseError(line_no, field, "unexpected end of checkpoint");
  };

  next("magic");
  if (line != "uavgnn-checkpoint 1") throw ParseError(line_no, "magic", "not a version-1 checkpoint");
  next("widths");
  std::istringstream ws(line);
  std::string tag;
  ws >> tag;
  if (tag != "widths") throw ParseError(line_no, "widths", "expected widths line");
  std::vector<std::size_t> widths;
  for (std::size_t w; ws >> w;) widths.push_back(w);
  GnnParams p{ParamLayout(widths), {}};
  p.values.assign(p.layout.total(), 0.0);

  for (const auto& b : p.layout.blocks()) {
    next("block");
    std::istringstream hs(line);
    std::string name;
    std::size_t rows = 0, cols = 0;
    hs >> tag >> name >> rows >> cols;
    if (tag != "block" || name != b.name) {
      throw ParseError(line_no, "block", "expected block '" + b.name + "', got '" + name + "'");
    }
    if (rows != b.rows || cols != b.cols) {
      throw ParseError(line_no, b.name,
                       "shape " + std::to_string(rows) + "x" + std::to_string(cols) + " does not match expected " +
                           std::to_string(b.rows) + "x" + std::to_string(b.cols));
    }
    next(b.name.c_str());
    std::istringstream vs(line);
    std::size_t i = 0;
    for (std::string tok; vs >> tok; ++i) {
      if (i >= b.size()) throw ParseError(line_no, b.name, "too many values");
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw ParseError(line_no, b.name, "bad number '" + tok + "'");
      p.values[b.offset + i] = v;
    }
    if (i != b.size()) throw ParseError(line_no, b.name, "too few values");
  }
  next("end");
  if (line != "end") throw ParseError(line_no, "end", "trailing blocks beyond the expected layout");
  return p;
}

inline void save_checkpoint(const std::string& path, const GnnParams& p,
                            const std::vector<std::string>& comments = {}) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_checkpoint(os, p, comments);
}

inline GnnParams load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "'");
  return read_checkpoint(is);
}

}  // namespace uavgnn
