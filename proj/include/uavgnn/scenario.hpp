#pragma once

// Random problem instances and their line-delimited on-disk form.
//
// File layout (UTF-8, one JSON object per line):
//   line 1   header: {"format":"uavgnn-dataset","version":1,"count":C,
//                     "units":{...},"meta":{<GenConfig>}}
//   line 2.. one record per scenario:
//            {"id":i,"du_xy":[[x,y],...],"dt_xy":[...],"dr_xy":[...],
//             "constants":{...}[,"fading":{"dt_du":[...],"dt_dr":[...]}]}
// Coordinates are metres; gains, powers and noise are linear (W or ratio).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uavgnn/error.hpp"
#include "uavgnn/physics.hpp"

namespace uavgnn {

using nlohmann::json;

struct GenConfig {
  std::uint64_t seed = 1;
  std::size_t n_samples = 500;
  std::size_t n_uav = 4;
  std::size_t n_du = 4;
  std::size_t n_d2d = 6;
  double area_half = 50.0;
  double d2d_min = 1.0;
  double d2d_max = 5.0;
  std::optional<std::uint64_t> fading_seed;
  PhysConstants constants;

  void validate() const {
    if (n_du == 0) throw ConfigError("n_du must be >= 1");
    if (n_uav == 0) throw ConfigError("n_uav must be >= 1");
    if (!(area_half > 0.0) || !std::isfinite(area_half)) throw ConfigError("area_half must be > 0");
    if (!(d2d_min > 0.0) || !(d2d_min <= d2d_max) || !std::isfinite(d2d_max)) {
      throw ConfigError("d2d_dist_range must satisfy 0 < min <= max");
    }
    constants.validate();
  }

  friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

struct Dataset {
  std::vector<Scenario> items;
  GenConfig meta;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---- JSON helpers ---------------------------------------------------------

namespace detail {

/// Rejects keys outside `allowed`; `where` prefixes the message.
inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class V>
void read_if(const json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline json to_json(const PhysConstants& c) {
  return json{{"beta0", c.beta0},         {"height", c.height},   {"wavelength", c.wavelength},
              {"d1", c.d1},               {"gamma", c.gamma},     {"noise", c.noise},
              {"p_max_uav", c.p_max_uav}, {"p_max_d2d", c.p_max_d2d}, {"r_min", c.r_min}};
}

/// Reads linear-unit fields plus the dB conveniences beta0_db, noise_dbm,
/// p_max_uav_dbm, p_max_d2d_dbm. Missing fields keep `base` values.
inline PhysConstants constants_from_json(const json& j, PhysConstants base = {},
                                         const std::string& where = "constants") {
  detail::reject_unknown_keys(j,
                              {"beta0", "height", "wavelength", "d1", "gamma", "noise", "p_max_uav",
                               "p_max_d2d", "r_min", "beta0_db", "noise_dbm", "p_max_uav_dbm",
                               "p_max_d2d_dbm"},
                              where);
  detail::read_if(j, "beta0", base.beta0, where);
  detail::read_if(j, "height", base.height, where);
  detail::read_if(j, "wavelength", base.wavelength, where);
  detail::read_if(j, "d1", base.d1, where);
  detail::read_if(j, "gamma", base.gamma, where);
  detail::read_if(j, "noise", base.noise, where);
  detail::read_if(j, "p_max_uav", base.p_max_uav, where);
  detail::read_if(j, "p_max_d2d", base.p_max_d2d, where);
  detail::read_if(j, "r_min", base.r_min, where);
  double v = 0.0;
  if (j.contains("beta0_db")) detail::read_if(j, "beta0_db", v, where), base.beta0 = db_to_linear(v);
  if (j.contains("noise_dbm")) detail::read_if(j, "noise_dbm", v, where), base.noise = dbm_to_watt(v);
  if (j.contains("p_max_uav_dbm")) {
    detail::read_if(j, "p_max_uav_dbm", v, where);
    base.p_max_uav = dbm_to_watt(v);
  }
  if (j.contains("p_max_d2d_dbm")) {
    detail::read_if(j, "p_max_d2d_dbm", v, where);
    base.p_max_d2d = dbm_to_watt(v);
  }
  return base;
}

inline json to_json(const GenConfig& g) {
  json j{{"seed", g.seed},           {"n_samples", g.n_samples}, {"n_uav", g.n_uav},
         {"n_du", g.n_du},           {"n_d2d", g.n_d2d},         {"area_half", g.area_half},
         {"d2d_min", g.d2d_min},     {"d2d_max", g.d2d_max},     {"constants", to_json(g.constants)}};
  j["fading_seed"] = g.fading_seed ? json(*g.fading_seed) : json(nullptr);
  return j;
}

inline GenConfig gen_config_from_json(const json& j, GenConfig base = {},
                                      const std::string& where = "gen") {
  detail::reject_unknown_keys(j,
                              {"seed", "n_samples", "n_uav", "n_du", "n_d2d", "area_half", "d2d_min",
                               "d2d_max", "fading_seed", "constants"},
                              where);
  detail::read_if(j, "seed", base.seed, where);
  detail::read_if(j, "n_samples", base.n_samples, where);
  detail::read_if(j, "n_uav", base.n_uav, where);
  detail::read_if(j, "n_du", base.n_du, where);
  detail::read_if(j, "n_d2d", base.n_d2d, where);
  detail::read_if(j, "area_half", base.area_half, where);
  detail::read_if(j, "d2d_min", base.d2d_min, where);
  detail::read_if(j, "d2d_max", base.d2d_max, where);
  if (j.contains("fading_seed")) {
    if (j["fading_seed"].is_null()) {
      base.fading_seed.reset();
    } else {
      std::uint64_t fs = 0;
      detail::read_if(j, "fading_seed", fs, where);
      base.fading_seed = fs;
    }
  }
  if (j.contains("constants")) {
    base.constants = constants_from_json(j["constants"], base.constants, where + ".constants");
  }
  return base;
}

// ---- generation -----------------------------------------------------------

/// DUs and DTs uniform over [-area_half, area_half]^2; each DR at its DT plus a
/// uniform-angle offset with length uniform in [d2d_min, d2d_max].
inline Dataset generate(const GenConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.meta = cfg;
  ds.items.reserve(cfg.n_samples);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> coord(-cfg.area_half, cfg.area_half);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> length(cfg.d2d_min, cfg.d2d_max);

  std::optional<std::mt19937_64> fading_rng;
  if (cfg.fading_seed) fading_rng.emplace(*cfg.fading_seed);
  std::exponential_distribution<double> rayleigh_power(1.0);

  for (std::size_t s = 0; s < cfg.n_samples; ++s) {
    Scenario sc;
    sc.constants = cfg.constants;
    for (std::size_t k = 0; k < cfg.n_du; ++k) sc.du_xy.push_back({coord(rng), coord(rng)});
    for (std::size_t m = 0; m < cfg.n_d2d; ++m) sc.dt_xy.push_back({coord(rng), coord(rng)});
    for (std::size_t m = 0; m < cfg.n_d2d; ++m) {
      const double a = angle(rng);
      const double r = length(rng);
      sc.dr_xy.push_back({sc.dt_xy[m].x + r * std::cos(a), sc.dt_xy[m].y + r * std::sin(a)});
    }
    if (fading_rng) {
      for (std::size_t i = 0; i < cfg.n_d2d * cfg.n_du; ++i) {
        sc.fading.dt_du.push_back(rayleigh_power(*fading_rng));
      }
      for (std::size_t i = 0; i < cfg.n_d2d * cfg.n_d2d; ++i) {
        sc.fading.dt_dr.push_back(rayleigh_power(*fading_rng));
      }
    }
    ds.items.push_back(std::move(sc));
  }
  return ds;
}

// ---- persistence ----------------------------------------------------------

namespace detail {

inline json points_to_json(const std::vector<Vec2>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  return a;
}

inline std::vector<Vec2> points_from_json(const json& rec, const char* field, std::size_t line) {
  if (!rec.contains(field)) throw ParseError(line, field, "missing");
  const auto& a = rec[field];
  if (!a.is_array()) throw ParseError(line, field, "expected an array of [x, y] pairs");
  std::vector<Vec2> out;
  out.reserve(a.size());
  for (const auto& p : a) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw ParseError(line, field, "expected an array of [x, y] pairs");
    }
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

inline std::vector<double> numbers_from_json(const json& obj, const char* field, std::size_t line) {
  if (!obj.contains(field) || !obj[field].is_array()) throw ParseError(line, field, "expected array");
  std::vector<double> out;
  for (const auto& v : obj[field]) {
    if (!v.is_number()) throw ParseError(line, field, "expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

inline json units_json() {
  return json{{"coordinates", "m"},   {"beta0", "linear ratio"}, {"height", "m"},
              {"wavelength", "m"},    {"d1", "m"},               {"gamma", "dimensionless"},
              {"noise", "W"},         {"p_max_uav", "W"},        {"p_max_d2d", "W"},
              {"r_min", "bit/s/Hz"}};
}

/// `provenance`, when given, is stored verbatim in the header and ignored on read.
inline void write_dataset(std::ostream& os, const Dataset& ds, const json& provenance = nullptr) {
  json header{{"format", "uavgnn-dataset"},
              {"version", 1},
              {"count", ds.items.size()},
              {"units", units_json()},
              {"meta", to_json(ds.meta)}};
  if (!provenance.is_null()) header["provenance"] = provenance;
  os << header.dump() << '\n';
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    const auto& s = ds.items[i];
    json rec{{"id", i},
             {"du_xy", detail::points_to_json(s.du_xy)},
             {"dt_xy", detail::points_to_json(s.dt_xy)},
             {"dr_xy", detail::points_to_json(s.dr_xy)},
             {"constants", to_json(s.constants)}};
    if (!s.fading.empty()) rec["fading"] = {{"dt_du", s.fading.dt_du}, {"dt_dr", s.fading.dt_dr}};
    os << rec.dump() << '\n';
  }
}

inline void save(const Dataset& ds, const std::string& path, const json& provenance = nullptr) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_dataset(os, ds, provenance);
  if (!os) throw Error("write failed for '" + path + "'");
}

/// Parses a whole dataset; throws ParseError (line + field) on any defect so
/// that no partial dataset escapes.
inline Dataset read_dataset(std::istream& is) {
  std::string text;
  std::size_t line_no = 0;
  auto parse_line = [&](const char* what) -> json {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, what, std::string("malformed JSON: ") + e.what());
    }
  };

  if (!std::getline(is, text)) throw ParseError(1, "header", "empty file");
  ++line_no;
  const json header = parse_line("header");
  if (!header.is_object() || header.value("format", "") != "uavgnn-dataset") {
    throw ParseError(line_no, "format", "not a uavgnn dataset");
  }
  if (header.value("version", 0) != 1) throw ParseError(line_no, "version", "unsupported version");
  if (!header.contains("count") || !header["count"].is_number_unsigned()) {
    throw ParseError(line_no, "count", "missing or not a non-negative integer");
  }
  const auto count = header["count"].get<std::size_t>();

  Dataset ds;
  try {
    ds.meta = gen_config_from_json(header.value("meta", json::object()));
  } catch (const ConfigError& e) {
    throw ParseError(line_no, "meta", e.what());
  }

  while (std::getline(is, text)) {
    ++line_no;
    if (text.empty()) continue;
    const json rec = parse_line("record");
    if (!rec.is_object()) throw ParseError(line_no, "record", "expected an object");
    if (!rec.contains("id") || !rec["id"].is_number_unsigned() ||
        rec["id"].get<std::size_t>() != ds.items.size()) {
      throw ParseError(line_no, "id", "expected consecutive record ids starting at 0");
    }
    Scenario s;
    s.du_xy = detail::points_from_json(rec, "du_xy", line_no);
    s.dt_xy = detail::points_from_json(rec, "dt_xy", line_no);
    s.dr_xy = detail::points_from_json(rec, "dr_xy", line_no);
    if (!rec.contains("constants")) throw ParseError(line_no, "constants", "missing");
    try {
      s.constants = constants_from_json(rec["constants"]);
    } catch (const ConfigError& e) {
      throw ParseError(line_no, "constants", e.what());
    }
    if (rec.contains("fading")) {
      s.fading.dt_du = detail::numbers_from_json(rec["fading"], "dt_du", line_no);
      s.fading.dt_dr = detail::numbers_from_json(rec["fading"], "dt_dr", line_no);
    }
    try {
      validate(s);
    } catch (const Error& e) {
      throw ParseError(line_no, "record", e.what());
    }
    if (!ds.items.empty()) {
      const auto& first = ds.items.front();
      if (s.n_du() != first.n_du()) throw DimensionError("line " + std::to_string(line_no) + ": DU count differs from first record");
      if (s.n_d2d() != first.n_d2d()) throw DimensionError("line " + std::to_string(line_no) + ": D2D count differs from first record");
      if (!(s.constants == first.constants)) throw DimensionError("line " + std::to_string(line_no) + ": constants differ from first record");
    }
    ds.items.push_back(std::move(s));
  }
  if (ds.items.size() != count) {
    throw ParseError(line_no, "count",
                     "header announces " + std::to_string(count) + " records, found " +
                         std::to_string(ds.items.size()) + " (truncated file?)");
  }
  return ds;
}

inline Dataset load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "'");
  return read_dataset(is);
}

}  // namespace uavgnn
