#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "latplan/geometry.hpp"
#include "latplan/occupancy_map.hpp"

namespace latplan {

/// Robot shape as a union of convex polygons in the body frame.
class Footprint {
public:
  Footprint() = default;

  explicit Footprint(std::vector<ConvexPolygon> polygons) : polygons_(std::move(polygons)) {
    if (polygons_.empty()) throw Error("footprint needs at least one polygon");
    for (const ConvexPolygon& p : polygons_) validate_convex(p);
    if (!contains(Vec2::Zero())) throw Error("footprint origin must lie inside the shape");
    for (const ConvexPolygon& p : polygons_)
      for (const Vec2& v : p.vertices) circumscribed_ = std::max(circumscribed_, v.norm());
    inscribed_ = compute_inscribed_radius();
  }

  static Footprint rectangle(double length, double width) {
    return Footprint({latplan::rectangle(-0.5 * length, -0.5 * width, 0.5 * length, 0.5 * width)});
  }

  /// T-shaped robot: a `bar_length` x `thickness` cross bar ahead of a
  /// `stem_length` x `thickness` stem, body origin where they meet.
  static Footprint t_shape(double bar_length = 3.0, double stem_length = 2.0, double thickness = 0.75) {
    return Footprint({latplan::rectangle(0.0, -0.5 * bar_length, thickness, 0.5 * bar_length),
                      latplan::rectangle(-stem_length, -0.5 * thickness, 0.0, 0.5 * thickness)});
  }

  const std::vector<ConvexPolygon>& polygons() const { return polygons_; }

  /// Radius of the largest origin-centered disc inside the shape.
  double inscribed_radius() const { return inscribed_; }

  /// Distance from the origin to the farthest vertex.
  double circumscribed_radius() const { return circumscribed_; }

  bool contains(const Vec2& p, double tol = 0.0) const {
    return std::any_of(polygons_.begin(), polygons_.end(), [&](const ConvexPolygon& q) { return q.contains(p, tol); });
  }

  /// True iff any transformed polygon touches an occupied leaf or leaves the map.
  bool collides(const Pose& pose, const MultiResMap& map) const {
    if (!map.inside(pose.position())) return true;
    for (const ConvexPolygon& body : polygons_) {
      if (!map.region_free(transform(body, pose))) return true;
    }
    return false;
  }

private:
  // Minimum distance from the origin to the parts of polygon edges that lie on
  // the boundary of the union. Edges are split where other polygons' edges
  // cross them; a piece is boundary unless both sides of its midpoint are
  // inside the union.
  double compute_inscribed_radius() const {
    double best = kInf;
    double scale = circumscribed_ > 0.0 ? circumscribed_ : 1.0;
    const double eps = 1e-9 * scale;
    for (std::size_t pi = 0; pi < polygons_.size(); ++pi) {
      const auto& verts = polygons_[pi].vertices;
      for (std::size_t i = 0; i < verts.size(); ++i) {
        const Vec2 a = verts[i];
        const Vec2 b = verts[(i + 1) % verts.size()];
        const Vec2 e = b - a;
        std::vector<double> cuts{0.0, 1.0};
        for (std::size_t pj = 0; pj < polygons_.size(); ++pj) {
          if (pj == pi) continue;
          const auto& ov = polygons_[pj].vertices;
          for (std::size_t k = 0; k < ov.size(); ++k) {
            const Vec2 c = ov[k];
            const Vec2 f = ov[(k + 1) % ov.size()] - c;
            const double den = e.x() * f.y() - e.y() * f.x();
            if (std::abs(den) < 1e-15) {
              // Collinear overlap: cut at the projections of the other edge's endpoints.
              const double len2 = e.squaredNorm();
              for (const Vec2& q : {c, Vec2(c + f)}) {
                const double t = (q - a).dot(e) / len2;
                if (t > 0.0 && t < 1.0) cuts.push_back(t);
              }
              continue;
            }
            const Vec2 d = c - a;
            const double t = (d.x() * f.y() - d.y() * f.x()) / den;
            const double u = (d.x() * e.y() - d.y() * e.x()) / den;
            if (t > 0.0 && t < 1.0 && u >= 0.0 && u <= 1.0) cuts.push_back(t);
          }
        }
        std::sort(cuts.begin(), cuts.end());
        const Vec2 normal = Vec2(e.y(), -e.x()).normalized();
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
          if (cuts[k + 1] - cuts[k] < 1e-12) continue;
          const Vec2 m = a + 0.5 * (cuts[k] + cuts[k + 1]) * e;
          const double probe = 1e-6 * scale;
          if (contains(m + probe * normal, eps) && contains(m - probe * normal, eps)) continue;
          best = std::min(best, point_segment_distance(Vec2::Zero(), a + cuts[k] * e, a + cuts[k + 1] * e));
        }
      }
    }
    return best;
  }

  std::vector<ConvexPolygon> polygons_;
  double inscribed_ = 0.0;
  double circumscribed_ = 0.0;
};

}  // namespace latplan
