#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "latplan/footprint.hpp"
#include "latplan/heuristics.hpp"
#include "latplan/motion_model.hpp"
#include "latplan/occupancy_map.hpp"
#include "latplan/planner.hpp"

namespace latplan::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temporary file and renames it over the target.
inline void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Parses JSON, reporting syntax errors as "file:line:col: message".
inline json parse_json(const std::string& text, const std::string& name) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    if (auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
    throw Error(name + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
  }
}

inline json load_json(const fs::path& path) { return parse_json(read_text(path), path.string()); }

namespace detail {

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(where + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

inline std::string next_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace detail

// ---------------------------------------------------------------- matrices

inline json to_json(const StateMat& m) {
  json j = json::array();
  for (int r = 0; r < 3; ++r) j.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return j;
}

/// A 3x3 matrix given as nested rows, a diagonal list, or a scalar times identity.
inline StateMat matrix_from_json(const json& j, const std::string& where) {
  StateMat m = StateMat::Zero();
  if (j.is_number()) return j.get<double>() * StateMat::Identity();
  if (!j.is_array()) throw Error(where + ": expected a number or an array");
  if (j.size() == 3 && j[0].is_number()) {
    for (int i = 0; i < 3; ++i) m(i, i) = j[static_cast<std::size_t>(i)].get<double>();
    return m;
  }
  if (j.size() != 3) throw Error(where + ": expected 3 rows");
  for (int r = 0; r < 3; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != 3) throw Error(where + ": each row needs 3 numbers");
    for (int c = 0; c < 3; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

// ---------------------------------------------------------------- maps

struct MapSidecar {
  double cell_size = 0.1;
  Vec2 origin = Vec2::Zero();
  double occupied_threshold = 0.5;
  bool dark_is_occupied = true;
};

/// Reads a P2 or P5 PGM. Pixel row 0 is the top of the image, so rows are
/// flipped into the grid's bottom-up convention.
inline OccupancyGrid read_pgm(const fs::path& path, double threshold = 0.5, bool dark_is_occupied = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string magic = detail::next_token(in);
  if (magic != "P2" && magic != "P5") throw Error(path.string() + ": not a P2/P5 PGM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(detail::next_token(in));
    h = std::stoi(detail::next_token(in));
    maxval = std::stoi(detail::next_token(in));
  } catch (const std::exception&) {
    throw Error(path.string() + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw Error(path.string() + ": bad PGM dimensions");
  std::vector<int> pixels(static_cast<std::size_t>(w) * h);
  if (magic == "P2") {
    for (int& p : pixels) {
      const std::string tok = detail::next_token(in);
      if (tok.empty()) throw Error(path.string() + ": truncated PGM");
      p = std::stoi(tok);
    }
  } else {
    const int bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(pixels.size() * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw Error(path.string() + ": truncated PGM");
    for (std::size_t i = 0; i < pixels.size(); ++i)
      pixels[i] = bytes == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
  }
  OccupancyGrid g(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double v = static_cast<double>(pixels[static_cast<std::size_t>(r) * w + c]) / maxval;
      const bool occ = dark_is_occupied ? v <= 1.0 - threshold : v >= threshold;
      g.set(c, h - 1 - r, occ);
    }
  return g;
}

/// Writes a binary PGM with occupied cells black.
inline std::string pgm_bytes(const OccupancyGrid& g) {
  std::string out = "P5\n" + std::to_string(g.width) + " " + std::to_string(g.height) + "\n255\n";
  for (int r = g.height - 1; r >= 0; --r)
    for (int c = 0; c < g.width; ++c) out.push_back(static_cast<char>(g.at(c, r) ? 0 : 255));
  return out;
}

inline MapSidecar read_sidecar(const fs::path& path) {
  const json j = load_json(path);
  const std::string w = path.string();
  MapSidecar s;
  s.cell_size = detail::get<double>(j, "cell_size", w);
  if (!(s.cell_size > 0.0)) throw Error(w + ": cell_size must be positive");
  if (j.contains("origin")) {
    const auto o = detail::get<std::vector<double>>(j, "origin", w);
    if (o.size() != 2) throw Error(w + ": origin needs two numbers");
    s.origin = Vec2(o[0], o[1]);
  }
  s.occupied_threshold = detail::get_or<double>(j, "occupied_threshold", 0.5, w);
  s.dark_is_occupied = detail::get_or<bool>(j, "dark_is_occupied", true, w);
  return s;
}

inline MultiResMap load_map(const fs::path& pgm, const fs::path& sidecar, double max_leaf_size = 0.0) {
  const MapSidecar s = read_sidecar(sidecar);
  return MultiResMap::build_from_grid(read_pgm(pgm, s.occupied_threshold, s.dark_is_occupied), s.cell_size, s.origin,
                                      max_leaf_size);
}

// ---------------------------------------------------------------- footprints

/// {"rectangle": [length, width]}, {"t_shape": [bar, stem, thickness]} or
/// {"polygons": [[[x, y], ...], ...]} in the body frame.
inline Footprint footprint_from_json(const json& j, const std::string& where) {
  if (j.contains("rectangle")) {
    const auto v = detail::get<std::vector<double>>(j, "rectangle", where);
    if (v.size() != 2) throw Error(where + ": rectangle needs [length, width]");
    return Footprint::rectangle(v[0], v[1]);
  }
  if (j.contains("t_shape")) {
    const auto v = detail::get<std::vector<double>>(j, "t_shape", where);
    if (v.size() != 3) throw Error(where + ": t_shape needs [bar, stem, thickness]");
    return Footprint::t_shape(v[0], v[1], v[2]);
  }
  if (j.contains("polygons")) {
    std::vector<ConvexPolygon> polys;
    for (const json& pj : j.at("polygons")) {
      ConvexPolygon p;
      for (const json& v : pj) {
        if (!v.is_array() || v.size() != 2) throw Error(where + ": polygon vertices are [x, y] pairs");
        p.vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
      }
      polys.push_back(std::move(p));
    }
    return Footprint(std::move(polys));
  }
  throw Error(where + ": footprint needs 'rectangle', 't_shape' or 'polygons'");
}

inline json footprint_to_json(const Footprint& fp) {
  json polys = json::array();
  for (const ConvexPolygon& p : fp.polygons()) {
    json pj = json::array();
    for (const Vec2& v : p.vertices) pj.push_back({v.x(), v.y()});
    polys.push_back(pj);
  }
  return {{"polygons", polys}};
}

// ---------------------------------------------------------------- primitives

inline json model_to_json(const RobotModel& m) {
  return {{"kind", m.kind == RobotKind::Unicycle ? "unicycle" : "ackermann"},
          {"v_max", m.v_max},
          {"omega_max", m.omega_max},
          {"min_turn_radius", m.min_turn_radius},
          {"dt", m.dt}};
}

/// Angles may be given in radians (`omega_max`) or degrees (`omega_max_deg`).
inline RobotModel model_from_json(const json& j, const std::string& where) {
  RobotModel m;
  const std::string kind = detail::get_or<std::string>(j, "kind", "unicycle", where);
  if (kind == "unicycle") {
    m.kind = RobotKind::Unicycle;
  } else if (kind == "ackermann") {
    m.kind = RobotKind::Ackermann;
  } else {
    throw Error(where + ": unknown model kind '" + kind + "'");
  }
  m.v_max = detail::get_or<double>(j, "v_max", m.v_max, where);
  m.omega_max = detail::get_or<double>(j, "omega_max", m.omega_max, where);
  if (j.contains("omega_max_deg")) m.omega_max = detail::get<double>(j, "omega_max_deg", where) * kPi / 180.0;
  m.min_turn_radius = detail::get_or<double>(j, "min_turn_radius", m.min_turn_radius, where);
  m.dt = detail::get_or<double>(j, "dt", m.dt, where);
  m.validate();
  return m;
}

inline json primitives_to_json(const PrimitiveSet& set) {
  json prims = json::array();
  for (const MotionPrimitive& p : set.primitives()) {
    json controls = json::array();
    for (const Control& c : p.controls) controls.push_back({c.v, c.omega});
    json poses = json::array();
    for (const Pose& q : p.poses) poses.push_back({q.x, q.y, q.theta});
    prims.push_back({{"id", p.id},
                     {"start", {p.start_heading, p.start_v, p.start_w}},
                     {"end", {p.dx, p.dy, p.end_heading, p.end_v, p.end_w}},
                     {"duration", p.duration},
                     {"length", p.length},
                     {"controls", controls},
                     {"poses", poses}});
  }
  return {{"format", "latplan-primitives"},
          {"version", 1},
          {"model", model_to_json(set.model())},
          {"resolution", set.lattice().resolution},
          {"headings", set.lattice().headings},
          {"f_plus", set.f_plus()},
          {"primitives", prims}};
}

inline PrimitiveSet primitives_from_json(const json& j, const std::string& where) {
  if (detail::get_or<std::string>(j, "format", "", where) != "latplan-primitives")
    throw Error(where + ": not a primitive set file");
  if (detail::get<int>(j, "version", where) != 1) throw Error(where + ": unsupported primitive file version");
  const RobotModel model = model_from_json(j.at("model"), where);
  Lattice lat{detail::get<double>(j, "resolution", where), detail::get<int>(j, "headings", where)};
  std::vector<MotionPrimitive> prims;
  for (const json& pj : detail::get<json>(j, "primitives", where)) {
    MotionPrimitive p;
    const auto s = pj.at("start").get<std::vector<int>>();
    const auto e = pj.at("end").get<std::vector<int>>();
    if (s.size() != 3 || e.size() != 5) throw Error(where + ": primitive start/end arity");
    p.start_heading = s[0];
    p.start_v = s[1];
    p.start_w = s[2];
    p.dx = e[0];
    p.dy = e[1];
    p.end_heading = e[2];
    p.end_v = e[3];
    p.end_w = e[4];
    p.duration = pj.at("duration").get<double>();
    p.length = pj.at("length").get<double>();
    for (const json& c : pj.at("controls")) p.controls.push_back({c[0].get<double>(), c[1].get<double>()});
    for (const json& q : pj.at("poses")) p.poses.push_back({q[0].get<double>(), q[1].get<double>(), q[2].get<double>()});
    if (p.poses.size() != p.controls.size() + 1) throw Error(where + ": primitive needs one more pose than controls");
    prims.push_back(std::move(p));
  }
  return PrimitiveSet(model, lat, detail::get<double>(j, "f_plus", where), std::move(prims));
}

struct ControlSetSpec {
  RobotModel model;
  Lattice lattice;
  std::vector<double> lengths;
  ControlSetOptions options;
};

inline ControlSetSpec control_set_spec_from_json(const json& j, const std::string& where) {
  ControlSetSpec s;
  s.model = model_from_json(detail::get<json>(j, "model", where), where);
  s.lattice.resolution = detail::get<double>(j, "resolution", where);
  s.lattice.headings = detail::get<int>(j, "headings", where);
  s.lengths = detail::get<std::vector<double>>(j, "lengths", where);
  s.options.max_heading_change = detail::get_or<int>(j, "max_heading_change", 2, where);
  s.options.in_place_turns = detail::get_or<bool>(j, "in_place_turns", false, where);
  return s;
}

// ---------------------------------------------------------------- heuristic cache

/// FNV-1a over the primitive set's serialized content plus the table options.
inline std::uint64_t fsh_cache_key(const PrimitiveSet& set, int radius, int goal_heading) {
  const std::string content =
      primitives_to_json(set).dump() + "|" + std::to_string(radius) + "|" + std::to_string(goal_heading);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : content) h = (h ^ c) * 1099511628211ULL;
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

inline json fsh_to_json(const FshTable& t, std::uint64_t key) {
  json values = json::array();
  for (double v : t.values()) values.push_back(std::isnan(v) ? json(nullptr) : json(v));
  return {{"format", "latplan-fsh"}, {"version", 1},        {"key", hex64(key)},
          {"radius", t.radius()},    {"headings", t.headings()}, {"goal_heading", t.goal_heading()},
          {"resolution", t.resolution()}, {"v_max", t.v_max()}, {"values", values}};
}

inline std::optional<FshTable> fsh_from_json(const json& j, std::uint64_t key) {
  if (j.value("format", "") != "latplan-fsh" || j.value("version", 0) != 1 || j.value("key", "") != hex64(key))
    return std::nullopt;
  std::vector<double> values;
  for (const json& v : j.at("values"))
    values.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
  return FshTable(j.at("radius").get<int>(), j.at("headings").get<int>(), j.at("goal_heading").get<int>(),
                  j.at("resolution").get<double>(), j.at("v_max").get<double>(), std::move(values));
}

/// Loads the table from `dir` when a matching file exists, else builds and stores it.
inline FshTable cached_fsh(const PrimitiveSet& set, int radius, int goal_heading, const fs::path& dir,
                           bool* hit = nullptr) {
  const std::uint64_t key = fsh_cache_key(set, radius, goal_heading);
  const fs::path file = dir / ("fsh-" + hex64(key) + ".json");
  if (hit) *hit = false;
  if (fs::exists(file)) {
    try {
      if (auto t = fsh_from_json(load_json(file), key)) {
        if (hit) *hit = true;
        return *t;
      }
    } catch (const std::exception&) {
      // unreadable cache entries are rebuilt
    }
  }
  FshTable t = build_fsh(set, radius, goal_heading);
  atomic_write(file, fsh_to_json(t, key).dump());
  return t;
}

// ---------------------------------------------------------------- scenarios

struct Scenario {
  fs::path pgm, sidecar;
  double max_leaf_size = 0.0;
  json footprint;
  fs::path primitives_file;
  json primitives_spec;  // inline generation spec when no file is given
  LatticeState start;
  StateMat start_covariance = StateMat::Zero();
  LatticeState goal;
  bool any_goal_heading = false;
  NoiseModel noise;
  PlannerConfig planner;
};

inline LatticeState state_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() < 3 || j.size() > 5) throw Error(where + ": state is [ix, iy, ith(, iv, iw)]");
  LatticeState s;
  s.ix = j[0].get<int>();
  s.iy = j[1].get<int>();
  s.ith = j[2].get<int>();
  if (j.size() > 3) s.iv = j[3].get<int>();
  if (j.size() > 4) s.iw = j[4].get<int>();
  return s;
}

inline json state_to_json(const LatticeState& s) {
  if (s.iv == 0 && s.iw == 0) return {s.ix, s.iy, s.ith};
  return {s.ix, s.iy, s.ith, s.iv, s.iw};
}

inline Scenario scenario_from_json(const json& j, const fs::path& base, const std::string& where) {
  if (!j.is_object()) throw Error(where + ": scenario must be a JSON object");
  if (detail::get<int>(j, "version", where) != 1) throw Error(where + ": unsupported scenario version");
  Scenario s;
  const json map = detail::get<json>(j, "map", where);
  s.pgm = base / detail::get<std::string>(map, "pgm", where + ": map");
  s.sidecar = base / detail::get<std::string>(map, "sidecar", where + ": map");
  s.max_leaf_size = detail::get_or<double>(map, "max_leaf_size", 0.0, where);

  const json fp = detail::get<json>(j, "footprint", where);
  s.footprint = fp.is_string() ? load_json(base / fp.get<std::string>()) : fp;

  const json prims = detail::get<json>(j, "primitives", where);
  if (prims.is_string()) {
    s.primitives_file = base / prims.get<std::string>();
  } else {
    s.primitives_spec = prims;
  }

  const json start = detail::get<json>(j, "start", where);
  s.start = state_from_json(detail::get<json>(start, "state", where), where + ": start");
  if (start.contains("covariance")) s.start_covariance = matrix_from_json(start.at("covariance"), where + ": start");
  make_psd(s.start_covariance, "start covariance");

  const json goal = detail::get<json>(j, "goal", where);
  s.goal = state_from_json(detail::get<json>(goal, "state", where), where + ": goal");
  const std::string heading = detail::get_or<std::string>(goal, "heading", "exact", where);
  if (heading != "exact" && heading != "any") throw Error(where + ": goal heading must be 'exact' or 'any'");
  s.any_goal_heading = heading == "any";

  if (j.contains("noise")) {
    const json& n = j.at("noise");
    if (n.contains("M")) s.noise.M = matrix_from_json(n.at("M"), where + ": noise.M");
    if (n.contains("N")) s.noise.N_free = matrix_from_json(n.at("N"), where + ": noise.N");
    for (const json& b : n.value("denied_regions", json::array())) {
      const auto v = b.get<std::vector<double>>();
      if (v.size() != 4) throw Error(where + ": denied region is [x0, y0, x1, y1]");
      s.noise.denied_regions.push_back({Vec2(v[0], v[1]), Vec2(v[2], v[3])});
    }
    make_psd(s.noise.M, "motion noise");
    make_psd(s.noise.N_free, "measurement noise");
  }

  if (j.contains("planner")) {
    const json& p = j.at("planner");
    PlannerConfig& c = s.planner;
    c.epsilon0 = detail::get_or<double>(p, "epsilon0", c.epsilon0, where);
    c.epsilon_factor = detail::get_or<double>(p, "epsilon_factor", c.epsilon_factor, where);
    c.lambdas = detail::get_or<std::vector<double>>(p, "lambda", c.lambdas, where);
    c.graduated_fidelity = detail::get_or<bool>(p, "graduated_fidelity", c.graduated_fidelity, where);
    c.heuristic.use_fsh = detail::get_or<bool>(p, "use_fsh", c.heuristic.use_fsh, where);
    c.heuristic.use_h2dmr = detail::get_or<bool>(p, "use_h2dmr", c.heuristic.use_h2dmr, where);
    c.heuristic.fsh_radius = detail::get_or<int>(p, "fsh_radius", c.heuristic.fsh_radius, where);
    c.max_iterations = detail::get_or<std::size_t>(p, "max_iterations", c.max_iterations, where);
  }
  return s;
}

inline Scenario load_scenario(const fs::path& path) {
  return scenario_from_json(load_json(path), path.parent_path(), path.string());
}

// ---------------------------------------------------------------- results

inline json cost_to_json(const PathCost& c) { return {{"c", c.c}, {"t", c.t}, {"trace", c.u}}; }

inline json path_to_json(const PlanResult& r, const PrimitiveSet& prims) {
  json steps = json::array();
  for (const PathStep& st : r.steps) {
    json beliefs = json::array();
    for (const Belief& b : st.beliefs.beliefs)
      beliefs.push_back({{"mean", {b.mean(0), b.mean(1), b.mean(2)}}, {"sigma", to_json(b.sigma())}});
    steps.push_back({{"from", state_to_json(st.from)},
                     {"primitive", st.primitive},
                     {"to", state_to_json(prims.primitive(st.primitive).apply(st.from, prims.lattice()))},
                     {"edge", cost_to_json(st.edge)},
                     {"beliefs", beliefs}});
  }
  return {{"format", "latplan-path"},
          {"version", 1},
          {"found", r.found},
          {"start", state_to_json(r.start)},
          {"goal", state_to_json(r.goal)},
          {"epsilon", r.stats.epsilon},
          {"cost", cost_to_json(r.cost)},
          {"steps", steps}};
}

inline json stats_to_json(const PlanResult& r) {
  return {{"epsilon", r.stats.epsilon},
          {"found", r.found},
          {"iterations", r.stats.iterations},
          {"insertions", r.stats.insertions},
          {"evaluations", r.stats.evaluations},
          {"cost", cost_to_json(r.cost)},
          {"wall_ms", r.stats.wall_ms}};
}

// ---------------------------------------------------------------- plots

/// Map leaves, denied regions, the nominal path, 3-sigma position ellipses
/// and the footprint at every primitive end, in world coordinates (y up).
inline std::string plot_svg(const MultiResMap& map, const Footprint& fp, const NoiseModel& noise,
                            const PlanResult& r, const PrimitiveSet& prims, double px_per_m = 20.0) {
  const Vec2 o = map.origin();
  const double ext = map.extent();
  const double size = ext * px_per_m;
  std::ostringstream s;
  s << std::setprecision(6);
  auto X = [&](double x) { return (x - o.x()) * px_per_m; };
  auto Y = [&](double y) { return size - (y - o.y()) * px_per_m; };
  auto rect = [&](const Box& b, const char* style) {
    s << "<rect x=\"" << X(b.lo.x()) << "\" y=\"" << Y(b.hi.y()) << "\" width=\"" << (b.hi.x() - b.lo.x()) * px_per_m
      << "\" height=\"" << (b.hi.y() - b.lo.y()) * px_per_m << "\" " << style << "/>\n";
  };
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\" viewBox=\"0 0 "
    << size << " " << size << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g id=\"leaves\">\n";
  for (std::size_t i = 0; i < map.leaf_count(); ++i) {
    const MapCell c = map.cell(static_cast<int>(i));
    rect(c.box(), c.occupied ? "fill=\"black\"" : "fill=\"none\" stroke=\"#dddddd\" stroke-width=\"0.5\"");
  }
  s << "</g>\n<g id=\"denied\">\n";
  for (const Box& b : noise.denied_regions) rect(b, "fill=\"#ffcc00\" fill-opacity=\"0.3\"");
  s << "</g>\n";
  if (r.found && !r.steps.empty()) {
    s << "<polyline id=\"path\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (const PathStep& st : r.steps)
      for (const Belief& b : st.beliefs.beliefs) s << X(b.mean(0)) << "," << Y(b.mean(1)) << " ";
    s << "\"/>\n<g id=\"ellipses\">\n";
    for (const PathStep& st : r.steps) {
      const Belief& b = st.beliefs.final();
      const Eigen::Matrix2d p = b.sigma().topLeftCorner<2, 2>();
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(p);
      const Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0);
      const Eigen::Vector2d major = es.eigenvectors().col(1);
      const double angle = -std::atan2(major.y(), major.x()) * 180.0 / kPi;
      s << "<ellipse cx=\"" << X(b.mean(0)) << "\" cy=\"" << Y(b.mean(1)) << "\" rx=\""
        << 3.0 * std::sqrt(ev(1)) * px_per_m << "\" ry=\"" << 3.0 * std::sqrt(ev(0)) * px_per_m
        << "\" transform=\"rotate(" << angle << " " << X(b.mean(0)) << " " << Y(b.mean(1))
        << ")\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1\"/>\n";
    }
    s << "</g>\n<g id=\"footprints\">\n";
    std::vector<Pose> poses{r.start.pose(prims.lattice())};
    for (const PathStep& st : r.steps) {
      const StateVec& m = st.beliefs.final().mean;
      poses.push_back({m(0), m(1), m(2)});
    }
    for (const Pose& q : poses)
      for (const ConvexPolygon& body : fp.polygons()) {
        s << "<polygon points=\"";
        for (const Vec2& v : transform(body, q).vertices) s << X(v.x()) << "," << Y(v.y()) << " ";
        s << "\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"0.8\"/>\n";
      }
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace latplan::io
