#pragma once

#include <map>
#include <optional>
#include <queue>
#include <random>
#include <tuple>
#include <string>
#include <vector>

#include "latplan/geometry.hpp"
#include "latplan/occupancy_map.hpp"
#include "latplan/planner.hpp"

namespace latplan::testing {

/// Grid from text rows drawn top row first; '#' is occupied.
inline OccupancyGrid grid_from_rows(const std::vector<std::string>& rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.front().size());
  OccupancyGrid g(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) g.set(c, h - 1 - r, rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == '#');
  return g;
}

inline OccupancyGrid random_grid(std::mt19937& rng, int w, int h, double fill, int blob = 1) {
  OccupancyGrid g(w, h);
  std::bernoulli_distribution occ(fill);
  for (int y = 0; y < h; y += blob)
    for (int x = 0; x < w; x += blob) {
      const bool v = occ(rng);
      for (int j = y; j < std::min(h, y + blob); ++j)
        for (int i = x; i < std::min(w, x + blob); ++i) g.set(i, j, v);
    }
  return g;
}

/// Sutherland-Hodgman clip of a convex polygon against an axis-aligned box.
inline std::vector<Vec2> clip_to_box(std::vector<Vec2> poly, const Box& b) {
  auto clip = [](const std::vector<Vec2>& in, auto inside, auto cross) {
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec2& a = in[i];
      const Vec2& c = in[(i + 1) % in.size()];
      const bool ia = inside(a), ic = inside(c);
      if (ia) out.push_back(a);
      if (ia != ic) out.push_back(cross(a, c));
    }
    return out;
  };
  for (int axis = 0; axis < 2; ++axis) {
    for (int side = 0; side < 2; ++side) {
      const double lim = side == 0 ? b.lo(axis) : b.hi(axis);
      auto inside = [&](const Vec2& p) { return side == 0 ? p(axis) >= lim : p(axis) <= lim; };
      auto cross = [&](const Vec2& a, const Vec2& c) {
        const double t = (lim - a(axis)) / (c(axis) - a(axis));
        return Vec2(a + t * (c - a));
      };
      if (poly.empty()) return poly;
      poly = clip(poly, inside, cross);
    }
  }
  return poly;
}

inline double polygon_area(const std::vector<Vec2>& p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec2& u = p[i];
    const Vec2& v = p[(i + 1) % p.size()];
    a += u.x() * v.y() - v.x() * u.y();
  }
  return 0.5 * std::abs(a);
}

/// Overlap area of a convex polygon with the occupied finest cells of a map.
inline double occupied_overlap(const MultiResMap& map, const ConvexPolygon& poly) {
  double area = 0.0;
  const int n = map.cells_per_side();
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      if (!map.occupied_at(x, y)) continue;
      const Box b = map.node_box(x, y, 1);
      if (!poly.bounds().intersects(b)) continue;
      area += polygon_area(clip_to_box(poly.vertices, b));
    }
  return area;
}

/// Exhaustive label-setting search without heuristic. Labels are
/// popped in lexicographic cost order, every state keeps its non-dominated
/// labels, and the lexicographically smallest goal label is returned.
template <class SuccessorFn, class GoalFn>
std::optional<PathCost> exhaustive_search(const LatticeState& start, const Belief& start_belief, SuccessorFn&& succ,
                                          GoalFn&& is_goal, std::size_t* expanded = nullptr) {
  struct Node {
    LatticeState s;
    Belief b;
    PathCost g;
    bool dead = false;
  };
  std::vector<Node> nodes;
  std::map<LatticeState, std::vector<std::size_t>> kept;
  auto worse_or_equal = [](const PathCost& a, const PathCost& b) { return b.c <= a.c && b.t <= a.t && b.u <= a.u; };
  using Key = std::tuple<double, double, double, std::size_t>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> open;
  auto add = [&](Node n) {
    std::vector<std::size_t>& here = kept[n.s];
    for (std::size_t k : here)
      if (worse_or_equal(n.g, nodes[k].g)) return;
    std::vector<std::size_t> next;
    for (std::size_t k : here) {
      if (worse_or_equal(nodes[k].g, n.g))
        nodes[k].dead = true;
      else
        next.push_back(k);
    }
    next.push_back(nodes.size());
    here = std::move(next);
    open.push({n.g.c, n.g.t, n.g.u, nodes.size()});
    nodes.push_back(std::move(n));
  };
  add({start, start_belief, {0.0, 0.0, start_belief.sigma().trace()}});
  std::optional<PathCost> best;
  std::size_t count = 0;
  while (!open.empty()) {
    const std::size_t id = std::get<3>(open.top());
    open.pop();
    if (nodes[id].dead) continue;
    const Node cur = nodes[id];
    // Costs only grow along a path, so nothing popped later can beat the best goal label.
    if (best && std::tie(cur.g.c, cur.g.t) > std::tie(best->c, best->t)) break;
    if (is_goal(cur.s)) {
      if (!best || cur.g < *best) best = cur.g;
      continue;
    }
    ++count;
    for (const Successor& e : succ(cur.s, cur.b))
      add({e.state, e.belief, {cur.g.c + e.edge.c, cur.g.t + e.edge.t, e.edge.u}});
  }
  if (expanded != nullptr) *expanded = count;
  return best;
}

}  // namespace latplan::testing
