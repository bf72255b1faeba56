#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <unordered_map>
#include <vector>

#include "latplan/footprint.hpp"
#include "latplan/motion_model.hpp"
#include "latplan/occupancy_map.hpp"

namespace latplan {

/// Obstacle-aware distance-to-goal grid built by Dijkstra from the goal.
///
/// In multi-resolution mode the points are centers of map-derived squares:
/// leaves larger than the grid size are split into their four children, and
/// smaller ones are snapped to the enclosing grid-aligned square. In uniform
/// mode every point is the center of a grid-size square (fixed-resolution
/// baseline). Costs are Euclidean path lengths in meters.
class H2dmrGrid {
public:
  enum class Mode { MultiResolution, Uniform };

  struct Point {
    Vec2 pos;
    double cost = kInf;
    double size = 0.0;  // side of the square this point stands for
  };

  struct Stats {
    std::size_t iterations = 0;  ///< settled points
    std::size_t discovered = 0;
    bool start_reached = false;
    double start_cost = kInf;
    bool fallback = false;  ///< start unreachable; values are Euclidean
  };

  Mode mode() const { return mode_; }
  const Stats& stats() const { return stats_; }
  const std::vector<Point>& points() const { return settled_; }
  double grid_size() const { return grid_; }
  Vec2 goal() const { return goal_; }

  /// min over stored points p near x of |x - p| + c(p), in meters; Euclidean
  /// distance to the goal when no stored point is near x.
  double distance(const Vec2& x) const {
    const double euclid = (x - goal_).norm();
    if (stats_.fallback || map_ == nullptr || !map_->inside(x)) return euclid;
    const std::vector<int>* cands = nullptr;
    if (mode_ == Mode::MultiResolution) {
      const int leaf = map_->cell_at(x).leaf;
      auto it = by_leaf_.find(leaf);
      if (it != by_leaf_.end()) cands = &it->second;
    } else {
      auto it = by_square_.find(square_key(x));
      if (it != by_square_.end()) cands = &it->second;
    }
    if (cands == nullptr || cands->empty()) return euclid;
    double best = kInf;
    for (int i : *cands) {
      const Point& p = settled_[static_cast<std::size_t>(i)];
      best = std::min(best, (x - p.pos).norm() + p.cost);
    }
    return best;
  }

private:
  friend H2dmrGrid initialize_grid(Mode, const Vec2&, const Vec2&, const MultiResMap&, double, double, double);

  std::int64_t square_key(const Vec2& x) const {
    const Vec2 rel = (x - map_->origin()) / grid_;
    const std::int64_t gx = static_cast<std::int64_t>(std::floor(rel.x()));
    const std::int64_t gy = static_cast<std::int64_t>(std::floor(rel.y()));
    return (gx << 32) ^ (gy & 0xFFFFFFFF);
  }

  Mode mode_ = Mode::MultiResolution;
  const MultiResMap* map_ = nullptr;
  double grid_ = 0.0;
  Vec2 goal_ = Vec2::Zero();
  Stats stats_;
  std::vector<Point> settled_;
  std::unordered_map<int, std::vector<int>> by_leaf_;
  std::unordered_map<std::int64_t, std::vector<int>> by_square_;
};

inline H2dmrGrid initialize_grid(H2dmrGrid::Mode mode, const Vec2& start, const Vec2& goal, const MultiResMap& map,
                                 double f_plus, double optimistic_radius, double stop_factor) {
  if (!map.inside(start) || !map.inside(goal)) throw Error("heuristic start/goal outside map");
  if (map.disc_collides(goal, optimistic_radius)) throw Error("goal position collides for the optimistic shape");

  H2dmrGrid g;
  g.mode_ = mode;
  g.map_ = &map;
  g.grid_ = map.largest_aligned_size(f_plus);
  g.goal_ = goal;
  const double gs = g.grid_;
  const double res = map.resolution();
  const Vec2 origin = map.origin();

  struct Work {
    Vec2 pos;
    double size;
    double cost = kInf;
    bool settled = false;
  };
  std::vector<Work> work;
  std::unordered_map<std::int64_t, int> index;
  auto key_of = [&](const Vec2& p) {
    const std::int64_t kx = std::llround(2.0 * (p.x() - origin.x()) / res);
    const std::int64_t ky = std::llround(2.0 * (p.y() - origin.y()) / res);
    return (kx << 32) ^ (ky & 0xFFFFFFFF);
  };
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  auto relax = [&](const Vec2& pos, double size, double cost) {
    const std::int64_t k = key_of(pos);
    auto it = index.find(k);
    int id;
    if (it == index.end()) {
      if (map.disc_collides(pos, optimistic_radius)) {
        index.emplace(k, -1);
        return;
      }
      id = static_cast<int>(work.size());
      index.emplace(k, id);
      work.push_back({pos, size});
      ++g.stats_.discovered;
    } else {
      id = it->second;
      if (id < 0) return;
    }
    Work& w = work[static_cast<std::size_t>(id)];
    if (!w.settled && cost < w.cost) {
      w.cost = cost;
      open.push({cost, id});
    }
  };

  auto emit = [&](const MapCell& cell, auto&& fn) {
    if (cell.size > gs * (1.0 + 1e-9)) {
      for (const MapCell& sub : map.subcells(cell, 0.5 * cell.size)) fn(sub);
    } else {
      fn(map.adjust(cell, gs));
    }
  };

  // Start is reached once a settled point would be a lookup candidate for it.
  std::vector<int> start_leaves;
  if (mode == H2dmrGrid::Mode::MultiResolution) {
    const MapCell sc = map.cell_at(start);
    start_leaves = map.adjacent_indices(sc.leaf);
    start_leaves.push_back(sc.leaf);
  }
  const Vec2 start_sq = ((start - origin) / gs).array().floor();
  auto near_start = [&](const Vec2& p) {
    if (mode == H2dmrGrid::Mode::MultiResolution) {
      const int leaf = map.cell_at(p).leaf;
      return std::find(start_leaves.begin(), start_leaves.end(), leaf) != start_leaves.end();
    }
    const Vec2 sq = ((p - origin) / gs).array().floor();
    return std::abs(sq.x() - start_sq.x()) <= 1.0 && std::abs(sq.y() - start_sq.y()) <= 1.0;
  };

  work.push_back({goal, 0.0, 0.0, false});
  index.emplace(key_of(goal), 0);
  open.push({0.0, 0});
  ++g.stats_.discovered;

  while (!open.empty()) {
    const auto [cost, id] = open.top();
    open.pop();
    Work& w = work[static_cast<std::size_t>(id)];
    if (w.settled || cost > w.cost) continue;
    w.settled = true;
    ++g.stats_.iterations;
    if (!g.stats_.start_reached && near_start(w.pos)) {
      g.stats_.start_reached = true;
      g.stats_.start_cost = cost + (start - w.pos).norm();
    }

    const Vec2 here = w.pos;
    auto visit = [&](const MapCell& sq) {
      if ((sq.center - here).squaredNorm() < 1e-18) return;
      relax(sq.center, sq.size, cost + (sq.center - here).norm());
    };
    if (mode == H2dmrGrid::Mode::Uniform) {
      const Vec2 own = origin + (((here - origin) / gs).array().floor() + 0.5).matrix() * gs;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const Vec2 c = own + Vec2(dx * gs, dy * gs);
          if (map.inside(c)) visit({c, gs, false, -1});
        }
    } else {
      const MapCell leaf = map.cell_at(here);
      std::vector<int> neighbours;
      if (leaf.size >= gs * (1.0 - 1e-9)) {
        neighbours = map.adjacent_indices(leaf.leaf);
      } else {
        // Below the grid size, a point stands for its aligned square.
        neighbours = map.touching_leaves(map.adjust(leaf, gs));
      }
      emit(leaf, visit);
      for (int n : neighbours) emit(map.cell(n), visit);
    }

    if (g.stats_.start_reached && cost > stop_factor * g.stats_.start_cost) break;
  }

  g.stats_.fallback = !g.stats_.start_reached;
  for (const Work& w : work) {
    if (!w.settled) continue;
    const int idx = static_cast<int>(g.settled_.size());
    g.settled_.push_back({w.pos, w.cost, w.size});
    if (mode == H2dmrGrid::Mode::MultiResolution) {
      const int leaf = map.cell_at(w.pos).leaf;
      g.by_leaf_[leaf].push_back(idx);
      for (int n : map.adjacent_indices(leaf)) g.by_leaf_[n].push_back(idx);
    } else {
      const Vec2 sq = ((w.pos - origin) / gs).array().floor();
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const std::int64_t gx = static_cast<std::int64_t>(sq.x()) + dx;
          const std::int64_t gy = static_cast<std::int64_t>(sq.y()) + dy;
          g.by_square_[(gx << 32) ^ (gy & 0xFFFFFFFF)].push_back(idx);
        }
    }
  }
  return g;
}

/// Multi-resolution obstacle-aware heuristic grid grown from the goal.
///
/// Expansion stops once the settled cost exceeds `stop_factor` times the cost
/// found for the start, which is only known after the start has been reached.
inline H2dmrGrid initialize_h2dmr(const Vec2& start, const Vec2& goal, const MultiResMap& map, double f_plus,
                                  double optimistic_radius, double stop_factor = 2.0) {
  return initialize_grid(H2dmrGrid::Mode::MultiResolution, start, goal, map, f_plus, optimistic_radius, stop_factor);
}

/// Fixed-resolution baseline on a uniform grid at the same grid size.
inline H2dmrGrid initialize_h2d_baseline(const Vec2& start, const Vec2& goal, const MultiResMap& map, double f_plus,
                                         double optimistic_radius, double stop_factor = 2.0) {
  return initialize_grid(H2dmrGrid::Mode::Uniform, start, goal, map, f_plus, optimistic_radius, stop_factor);
}

/// Heuristic time for a position, converting distance with the top speed.
inline double h2dmr_value(const H2dmrGrid& grid, const Vec2& x, double v_max) { return grid.distance(x) / v_max; }

/// Free-space lattice cost-to-go, keyed by lattice offset from the goal and heading.
class FshTable {
public:
  FshTable() = default;
  FshTable(int radius, int headings, int goal_heading, double resolution, double v_max, std::vector<double> values)
      : radius_(radius),
        headings_(headings),
        goal_heading_(goal_heading),
        resolution_(resolution),
        v_max_(v_max),
        values_(std::move(values)) {
    if (values_.size() != expected_size()) throw Error("FSH table size mismatch");
  }

  int radius() const { return radius_; }
  int headings() const { return headings_; }
  int goal_heading() const { return goal_heading_; }  ///< -1 means any heading
  double resolution() const { return resolution_; }
  double v_max() const { return v_max_; }
  const std::vector<double>& values() const { return values_; }

  /// Table entry (NaN when unknown) for a goal-relative offset.
  double entry(int dx, int dy, int heading) const {
    if (std::abs(dx) > radius_ || std::abs(dy) > radius_) return std::numeric_limits<double>::quiet_NaN();
    return values_[index(dx, dy, heading)];
  }

  /// Table value within the radius, Euclidean time outside it.
  double value(int dx, int dy, int heading) const {
    const double e = entry(dx, dy, heading);
    if (!std::isnan(e)) return e;
    return std::hypot(dx, dy) * resolution_ / v_max_;
  }

  std::size_t index(int dx, int dy, int heading) const {
    const int w = 2 * radius_ + 1;
    return (static_cast<std::size_t>(dy + radius_) * w + static_cast<std::size_t>(dx + radius_)) *
               static_cast<std::size_t>(headings_) +
           static_cast<std::size_t>(heading);
  }

private:
  std::size_t expected_size() const {
    const std::size_t w = static_cast<std::size_t>(2 * radius_ + 1);
    return w * w * static_cast<std::size_t>(headings_);
  }

  int radius_ = 0;
  int headings_ = 0;
  int goal_heading_ = -1;
  double resolution_ = 1.0;
  double v_max_ = 1.0;
  std::vector<double> values_;
};

/// Backward Dijkstra over the obstacle-free lattice using primitive durations.
///
/// The search region is twice the table radius; an entry is kept only when no
/// path leaving that region could beat it, so every stored value is exact.
inline FshTable build_fsh(const PrimitiveSet& prims, int radius, int goal_heading = -1) {
  if (radius < 0) throw Error("FSH radius must be non-negative");
  const Lattice& lat = prims.lattice();
  const int H = lat.headings;
  const int R2 = 2 * radius;
  const int W = 2 * R2 + 1;
  auto idx = [&](int x, int y, int h) {
    return (static_cast<std::size_t>(y + R2) * W + static_cast<std::size_t>(x + R2)) * H + static_cast<std::size_t>(h);
  };
  std::vector<double> dist(static_cast<std::size_t>(W) * W * H, kInf);
  std::vector<std::vector<int>> by_end(static_cast<std::size_t>(H));
  for (const MotionPrimitive& p : prims.primitives()) by_end[static_cast<std::size_t>(p.end_heading)].push_back(p.id);

  struct Entry {
    double d;
    int x, y, h;
    bool operator>(const Entry& o) const { return std::tie(d, x, y, h) > std::tie(o.d, o.x, o.y, o.h); }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  for (int h = 0; h < H; ++h) {
    if (goal_heading >= 0 && h != goal_heading) continue;
    dist[idx(0, 0, h)] = 0.0;
    open.push({0.0, 0, 0, h});
  }
  while (!open.empty()) {
    const Entry e = open.top();
    open.pop();
    if (e.d > dist[idx(e.x, e.y, e.h)]) continue;
    for (int pid : by_end[static_cast<std::size_t>(e.h)]) {
      const MotionPrimitive& p = prims.primitive(pid);
      const int sx = e.x - p.dx;
      const int sy = e.y - p.dy;
      if (std::abs(sx) > R2 || std::abs(sy) > R2) continue;
      const double nd = e.d + p.duration;
      double& cur = dist[idx(sx, sy, p.start_heading)];
      if (nd < cur) {
        cur = nd;
        open.push({nd, sx, sy, p.start_heading});
      }
    }
  }

  const double v_max = prims.model().v_max;
  const int w = 2 * radius + 1;
  std::vector<double> values(static_cast<std::size_t>(w) * w * H, std::numeric_limits<double>::quiet_NaN());
  for (int y = -radius; y <= radius; ++y)
    for (int x = -radius; x <= radius; ++x) {
      const double escape = ((R2 - std::max(std::abs(x), std::abs(y))) + R2) * lat.resolution / v_max;
      for (int h = 0; h < H; ++h) {
        const double d = dist[idx(x, y, h)];
        if (d <= escape)
          values[(static_cast<std::size_t>(y + radius) * w + static_cast<std::size_t>(x + radius)) * H +
                 static_cast<std::size_t>(h)] = d;
      }
    }
  return FshTable(radius, H, goal_heading, lat.resolution, v_max, std::move(values));
}

struct HeuristicConfig {
  bool use_h2dmr = true;
  bool use_fsh = true;
  int fsh_radius = 20;
  /// Divisor and subtracted slack (m) applied to the grid distance before
  /// conversion to time; (1, 0) uses the grid value unchanged.
  double h2dmr_stretch = 1.0;
  double h2dmr_slack = 0.0;
};

/// max(h2dmr, fsh) for lattice states; either term can be disabled.
class Heuristic {
public:
  Heuristic() = default;
  Heuristic(const Lattice& lat, double v_max, LatticeState goal, bool any_heading, std::optional<H2dmrGrid> grid,
            std::optional<FshTable> fsh, HeuristicConfig cfg = {})
      : lat_(lat),
        v_max_(v_max),
        goal_(goal),
        any_heading_(any_heading),
        grid_(std::move(grid)),
        fsh_(std::move(fsh)),
        cfg_(cfg) {}

  double h2dmr(const LatticeState& s) const {
    if (!grid_) return 0.0;
    const Pose p = s.pose(lat_);
    const double d = grid_->distance(p.position());
    return std::max(0.0, d - cfg_.h2dmr_slack) / (cfg_.h2dmr_stretch * v_max_);
  }

  double fsh(const LatticeState& s) const {
    if (!fsh_) return 0.0;
    return fsh_->value(s.ix - goal_.ix, s.iy - goal_.iy, s.ith);
  }

  double operator()(const LatticeState& s) const {
    if (is_goal(s)) return 0.0;
    return std::max(h2dmr(s), fsh(s));
  }

  bool is_goal(const LatticeState& s) const {
    return s.ix == goal_.ix && s.iy == goal_.iy && (any_heading_ || s.ith == goal_.ith);
  }

  const std::optional<H2dmrGrid>& grid() const { return grid_; }
  const std::optional<FshTable>& fsh_table() const { return fsh_; }

private:
  Lattice lat_;
  double v_max_ = 1.0;
  LatticeState goal_;
  bool any_heading_ = false;
  std::optional<H2dmrGrid> grid_;
  std::optional<FshTable> fsh_;
  HeuristicConfig cfg_;
};

}  // namespace latplan
