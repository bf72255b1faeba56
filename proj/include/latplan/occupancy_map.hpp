#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "latplan/geometry.hpp"

namespace latplan {

/// Row-major occupancy grid; row 0 is the lowest y.
struct OccupancyGrid {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;

  OccupancyGrid() = default;
  OccupancyGrid(int w, int h, bool value = false)
      : width(w), height(h), cells(static_cast<std::size_t>(w) * h, value ? 1 : 0) {}

  bool at(int x, int y) const { return cells[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { cells[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

  /// Marks every cell whose center lies in [x0,x1)x[y0,y1) (world units, origin at grid corner).
  void fill_box(double x0, double y0, double x1, double y1, double cell_size, bool v = true) {
    for (int iy = 0; iy < height; ++iy) {
      const double cy = (iy + 0.5) * cell_size;
      if (cy < y0 || cy >= y1) continue;
      for (int ix = 0; ix < width; ++ix) {
        const double cx = (ix + 0.5) * cell_size;
        if (cx >= x0 && cx < x1) set(ix, iy, v);
      }
    }
  }

  bool operator==(const OccupancyGrid&) const = default;
};

/// A quadtree leaf (or a square derived from one) in world coordinates.
struct MapCell {
  Vec2 center = Vec2::Zero();
  double size = 0.0;
  bool occupied = false;
  int leaf = -1;  ///< index into MultiResMap::leaves(), -1 for derived squares

  Box box() const {
    const Vec2 h(0.5 * size, 0.5 * size);
    return {center - h, center + h};
  }
};

/// Square 2-D multi-resolution occupancy map stored as a quadtree.
///
/// Leaves tile the root square exactly; a leaf is only stored when every
/// finest-resolution cell it covers has the same occupancy and its side does
/// not exceed the configured maximum leaf size. Geometry is kept in integer
/// units of the finest resolution so containment and adjacency are exact.
/// Points outside the root square are unknown space and count as occupied.
class MultiResMap {
public:
  struct Leaf {
    int x = 0, y = 0, size = 1;  // finest-cell units
    bool occupied = false;
  };

  MultiResMap() = default;

  /// Builds a maximally merged quadtree. The grid is padded with free cells to a
  /// power-of-two square. `max_leaf_size` (m, <= 0 for unbounded) caps leaf sides.
  static MultiResMap build_from_grid(const OccupancyGrid& grid, double cell_size,
                                     Vec2 origin = Vec2::Zero(), double max_leaf_size = 0.0) {
    if (grid.width <= 0 || grid.height <= 0) throw Error("occupancy grid is empty");
    if (!(cell_size > 0.0)) throw Error("cell size must be positive");
    if (grid.cells.size() != static_cast<std::size_t>(grid.width) * grid.height)
      throw Error("occupancy grid data does not match its dimensions");

    MultiResMap m;
    m.resolution_ = cell_size;
    m.origin_ = origin;
    int n = 1;
    while (n < grid.width || n < grid.height) n *= 2;
    m.cells_per_side_ = n;
    m.max_leaf_cells_ = n;
    if (max_leaf_size > 0.0) {
      int cap = 1;
      while (cap * 2 <= n && (cap * 2) * cell_size <= max_leaf_size * (1.0 + 1e-9)) cap *= 2;
      m.max_leaf_cells_ = cap;
    }

    // Summed-area table over the padded grid.
    const int s = n + 1;
    std::vector<int> sat(static_cast<std::size_t>(s) * s, 0);
    for (int y = 0; y < n; ++y) {
      int row = 0;
      for (int x = 0; x < n; ++x) {
        const bool occ = x < grid.width && y < grid.height && grid.at(x, y);
        row += occ ? 1 : 0;
        sat[static_cast<std::size_t>(y + 1) * s + x + 1] = sat[static_cast<std::size_t>(y) * s + x + 1] + row;
      }
    }
    auto count = [&](int x, int y, int size) {
      auto at = [&](int i, int j) { return sat[static_cast<std::size_t>(j) * s + i]; };
      return at(x + size, y + size) - at(x, y + size) - at(x + size, y) + at(x, y);
    };
    m.nodes_.reserve(static_cast<std::size_t>(n) * n / 2 + 1);
    m.build_node(0, 0, n, count);
    return m;
  }

  double resolution() const { return resolution_; }
  Vec2 origin() const { return origin_; }
  double extent() const { return cells_per_side_ * resolution_; }
  int cells_per_side() const { return cells_per_side_; }
  double max_leaf_size() const { return max_leaf_cells_ * resolution_; }
  const std::vector<Leaf>& leaves() const { return leaves_; }
  std::size_t leaf_count() const { return leaves_.size(); }

  Box bounds() const { return {origin_, origin_ + Vec2(extent(), extent())}; }

  /// Half-open containment in the root square.
  bool inside(const Vec2& p) const {
    const Vec2 q = p - origin_;
    return q.x() >= 0.0 && q.y() >= 0.0 && q.x() < extent() && q.y() < extent();
  }

  MapCell cell(int leaf_index) const {
    const Leaf& l = leaves_.at(static_cast<std::size_t>(leaf_index));
    const double sz = l.size * resolution_;
    return {origin_ + Vec2((l.x + 0.5 * l.size) * resolution_, (l.y + 0.5 * l.size) * resolution_), sz,
            l.occupied, leaf_index};
  }

  /// Leaf whose half-open extent contains p.
  MapCell cell_at(const Vec2& p) const {
    if (!inside(p)) throw Error("point outside map extent");
    const Vec2 q = (p - origin_) / resolution_;
    const int ix = std::min(static_cast<int>(std::floor(q.x())), cells_per_side_ - 1);
    const int iy = std::min(static_cast<int>(std::floor(q.y())), cells_per_side_ - 1);
    return cell(leaf_index_at(ix, iy));
  }

  int leaf_index_at(int ix, int iy) const {
    int node = 0;
    while (nodes_[node].leaf < 0) {
      const Node& nd = nodes_[node];
      const int half = nd.size / 2;
      const int q = (ix >= nd.x + half ? 1 : 0) + (iy >= nd.y + half ? 2 : 0);
      node = nd.child[q];
    }
    return nodes_[node].leaf;
  }

  bool occupied_at(int ix, int iy) const {
    return leaves_[static_cast<std::size_t>(leaf_index_at(ix, iy))].occupied;
  }

  /// All leaves sharing an edge or a corner with `cell`, sorted by leaf index.
  std::vector<MapCell> adjacent(const MapCell& c) const {
    if (c.leaf < 0 || c.leaf >= static_cast<int>(leaves_.size())) throw Error("cell is not a leaf of this map");
    const Leaf& l = leaves_[static_cast<std::size_t>(c.leaf)];
    std::vector<int> found;
    collect_touching(0, l.x, l.y, l.x + l.size, l.y + l.size, found);
    std::sort(found.begin(), found.end());
    std::vector<MapCell> out;
    out.reserve(found.size());
    for (int idx : found)
      if (idx != c.leaf) out.push_back(cell(idx));
    return out;
  }

  std::vector<int> adjacent_indices(int leaf_index) const {
    const Leaf& l = leaves_.at(static_cast<std::size_t>(leaf_index));
    std::vector<int> found;
    collect_touching(0, l.x, l.y, l.x + l.size, l.y + l.size, found);
    std::sort(found.begin(), found.end());
    found.erase(std::remove(found.begin(), found.end(), leaf_index), found.end());
    return found;
  }

  /// Leaves whose closed extent touches the closed extent of an aligned square (leaf or derived).
  std::vector<int> touching_leaves(const MapCell& square) const {
    const Vec2 lo = (square.center - origin_) / resolution_ - Vec2::Constant(0.5 * square.size / resolution_);
    const int x0 = static_cast<int>(std::lround(lo.x()));
    const int y0 = static_cast<int>(std::lround(lo.y()));
    const int sz = static_cast<int>(std::lround(square.size / resolution_));
    std::vector<int> found;
    collect_touching(0, x0, y0, x0 + sz, y0 + sz, found);
    std::sort(found.begin(), found.end());
    return found;
  }

  /// Splits `c` into (c.size/target)^2 squares of side `target` that inherit its occupancy.
  std::vector<MapCell> subcells(const MapCell& c, double target) const {
    const double ratio = c.size / target;
    const long k = std::lround(ratio);
    if (!(target > 0.0) || k < 2 || std::abs(ratio - static_cast<double>(k)) > 1e-9 || (k & (k - 1)) != 0 ||
        !is_power_of_two_multiple(target))
      throw Error("invalid subcell target size");
    std::vector<MapCell> out;
    out.reserve(static_cast<std::size_t>(k * k));
    const Vec2 lo = c.center - Vec2(0.5 * c.size, 0.5 * c.size);
    for (long j = 0; j < k; ++j)
      for (long i = 0; i < k; ++i)
        out.push_back({lo + Vec2((i + 0.5) * target, (j + 0.5) * target), target, c.occupied, -1});
    return out;
  }

  /// The square of side `f_plus` on the f_plus-aligned grid that contains `c`.
  MapCell adjust(const MapCell& c, double f_plus) const {
    if (c.size > f_plus * (1.0 + 1e-9)) throw Error("cell larger than target size");
    if (!is_power_of_two_multiple(f_plus)) throw Error("target size must be a power-of-two multiple of the resolution");
    const Vec2 rel = c.center - origin_;
    const double gx = std::floor(rel.x() / f_plus);
    const double gy = std::floor(rel.y() / f_plus);
    return {origin_ + Vec2((gx + 0.5) * f_plus, (gy + 0.5) * f_plus), f_plus, c.occupied, -1};
  }

  bool is_power_of_two_multiple(double size) const {
    const double r = size / resolution_;
    const long k = std::lround(r);
    return k >= 1 && std::abs(r - static_cast<double>(k)) < 1e-9 * std::max(1.0, r) && (k & (k - 1)) == 0;
  }

  /// Largest power-of-two multiple of the resolution not exceeding `size` (at least the resolution).
  double largest_aligned_size(double size) const {
    double g = resolution_;
    while (g * 2.0 <= size * (1.0 + 1e-9) && g * 2.0 <= extent()) g *= 2.0;
    return g;
  }

  /// True iff no occupied leaf intersects the polygon and the polygon lies inside the map.
  bool region_free(const ConvexPolygon& poly) const {
    const Box b = poly.bounds();
    if (!inside(b.lo) || !inside(b.hi)) return false;
    return !polygon_hits(0, poly, b);
  }

  /// True iff the closed disc touches an occupied leaf or leaves the map.
  bool disc_collides(const Vec2& center, double radius) const {
    const Box m = bounds();
    if (center.x() - radius < m.lo.x() || center.y() - radius < m.lo.y() || center.x() + radius >= m.hi.x() ||
        center.y() + radius >= m.hi.y())
      return true;
    return disc_hits(0, center, radius);
  }

  /// Distance from p to the nearest occupied leaf or to the map border, whichever is closer.
  double nearest_obstacle_distance(const Vec2& p, Vec2* closest = nullptr) const {
    const Box m = bounds();
    double best = kInf;
    Vec2 best_pt = p;
    const double border[4] = {p.x() - m.lo.x(), m.hi.x() - p.x(), p.y() - m.lo.y(), m.hi.y() - p.y()};
    const Vec2 border_pt[4] = {{m.lo.x(), p.y()}, {m.hi.x(), p.y()}, {p.x(), m.lo.y()}, {p.x(), m.hi.y()}};
    for (int i = 0; i < 4; ++i) {
      if (border[i] < best) {
        best = std::max(border[i], 0.0);
        best_pt = border_pt[i];
      }
    }
    nearest_search(0, p, best, best_pt);
    if (closest) *closest = best_pt;
    return best;
  }

  /// Expands the tree back to a cells_per_side() square grid.
  OccupancyGrid decompose() const {
    OccupancyGrid g(cells_per_side_, cells_per_side_);
    for (const Leaf& l : leaves_)
      for (int y = l.y; y < l.y + l.size; ++y)
        for (int x = l.x; x < l.x + l.size; ++x) g.set(x, y, l.occupied);
    return g;
  }

  Box node_box(int x, int y, int size) const {
    return {origin_ + Vec2(x, y) * resolution_, origin_ + Vec2(x + size, y + size) * resolution_};
  }

private:
  struct Node {
    int x = 0, y = 0, size = 0;
    int child[4] = {-1, -1, -1, -1};
    int leaf = -1;
    bool any_occupied = false;
  };

  template <class Count>
  int build_node(int x, int y, int size, const Count& count) {
    const int idx = static_cast<int>(nodes_.size());
    nodes_.push_back({x, y, size, {-1, -1, -1, -1}, -1, false});
    const int occ = count(x, y, size);
    const bool homogeneous = occ == 0 || occ == size * size;
    if ((homogeneous && size <= max_leaf_cells_) || size == 1) {
      nodes_[idx].leaf = static_cast<int>(leaves_.size());
      nodes_[idx].any_occupied = occ > 0;
      leaves_.push_back({x, y, size, occ > 0});
      return idx;
    }
    const int h = size / 2;
    const int c0 = build_node(x, y, h, count);
    const int c1 = build_node(x + h, y, h, count);
    const int c2 = build_node(x, y + h, h, count);
    const int c3 = build_node(x + h, y + h, h, count);
    Node& nd = nodes_[idx];
    nd.child[0] = c0;
    nd.child[1] = c1;
    nd.child[2] = c2;
    nd.child[3] = c3;
    nd.any_occupied = occ > 0;
    return idx;
  }

  void collect_touching(int node, int x0, int y0, int x1, int y1, std::vector<int>& out) const {
    const Node& nd = nodes_[node];
    if (nd.x > x1 || nd.x + nd.size < x0 || nd.y > y1 || nd.y + nd.size < y0) return;
    if (nd.leaf >= 0) {
      out.push_back(nd.leaf);
      return;
    }
    for (int c : nd.child) collect_touching(c, x0, y0, x1, y1, out);
  }

  bool polygon_hits(int node, const ConvexPolygon& poly, const Box& pb) const {
    const Node& nd = nodes_[node];
    if (!nd.any_occupied) return false;
    const Box b = node_box(nd.x, nd.y, nd.size);
    if (!b.intersects(pb)) return false;
    if (nd.leaf >= 0) return intersects(poly, b);
    for (int c : nd.child)
      if (polygon_hits(c, poly, pb)) return true;
    return false;
  }

  bool disc_hits(int node, const Vec2& c, double r) const {
    const Node& nd = nodes_[node];
    if (!nd.any_occupied) return false;
    if (node_box(nd.x, nd.y, nd.size).distance_to(c) > r) return false;
    if (nd.leaf >= 0) return true;
    for (int ch : nd.child)
      if (disc_hits(ch, c, r)) return true;
    return false;
  }

  void nearest_search(int node, const Vec2& p, double& best, Vec2& best_pt) const {
    const Node& nd = nodes_[node];
    if (!nd.any_occupied) return;
    const Box b = node_box(nd.x, nd.y, nd.size);
    const double d = b.distance_to(p);
    if (d >= best) return;
    if (nd.leaf >= 0) {
      best = d;
      best_pt = b.closest_point(p);
      return;
    }
    for (int ch : nd.child) nearest_search(ch, p, best, best_pt);
  }

  double resolution_ = 1.0;
  Vec2 origin_ = Vec2::Zero();
  int cells_per_side_ = 0;
  int max_leaf_cells_ = 0;
  std::vector<Node> nodes_;
  std::vector<Leaf> leaves_;
};

}  // namespace latplan
