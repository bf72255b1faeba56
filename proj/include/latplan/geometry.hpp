#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace latplan {

using Vec2 = Eigen::Vector2d;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Wraps an angle to [-pi, pi).
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a - kPi;
}

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }
};

/// Closed axis-aligned box.
struct Box {
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Zero();

  bool contains(const Vec2& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
  }
  bool intersects(const Box& o) const {
    return lo.x() <= o.hi.x() && o.lo.x() <= hi.x() && lo.y() <= o.hi.y() && o.lo.y() <= hi.y();
  }
  double distance_to(const Vec2& p) const {
    const double dx = std::max({lo.x() - p.x(), 0.0, p.x() - hi.x()});
    const double dy = std::max({lo.y() - p.y(), 0.0, p.y() - hi.y()});
    return std::hypot(dx, dy);
  }
  Vec2 closest_point(const Vec2& p) const {
    return {std::clamp(p.x(), lo.x(), hi.x()), std::clamp(p.y(), lo.y(), hi.y())};
  }
};

/// Convex polygon, vertices counter-clockwise.
struct ConvexPolygon {
  std::vector<Vec2> vertices;

  std::size_t size() const { return vertices.size(); }

  double signed_area() const {
    double a = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      const Vec2& p = vertices[i];
      const Vec2& q = vertices[(i + 1) % vertices.size()];
      a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
  }

  Box bounds() const {
    Box b{vertices.front(), vertices.front()};
    for (const Vec2& v : vertices) {
      b.lo = b.lo.cwiseMin(v);
      b.hi = b.hi.cwiseMax(v);
    }
    return b;
  }

  /// Closed containment.
  bool contains(const Vec2& p, double tol = 0.0) const {
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      const Vec2 e = vertices[(i + 1) % vertices.size()] - vertices[i];
      const Vec2 d = p - vertices[i];
      const double cross = e.x() * d.y() - e.y() * d.x();
      if (cross < -tol * e.norm()) return false;
    }
    return true;
  }

  /// Strict-interior containment.
  bool contains_strictly(const Vec2& p, double tol) const {
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      const Vec2 e = vertices[(i + 1) % vertices.size()] - vertices[i];
      const Vec2 d = p - vertices[i];
      const double cross = e.x() * d.y() - e.y() * d.x();
      if (cross <= tol * e.norm()) return false;
    }
    return true;
  }
};

/// Throws unless the polygon is convex, counter-clockwise and has positive area.
inline void validate_convex(const ConvexPolygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) throw Error("polygon needs at least 3 vertices");
  if (poly.signed_area() <= 1e-12) throw Error("polygon must be counter-clockwise with positive area");
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly.vertices[(i + 1) % n] - poly.vertices[i];
    const Vec2 b = poly.vertices[(i + 2) % n] - poly.vertices[(i + 1) % n];
    if (a.x() * b.y() - a.y() * b.x() < -1e-12) throw Error("polygon is not convex");
  }
}

inline ConvexPolygon transform(const ConvexPolygon& body, const Pose& pose) {
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  ConvexPolygon out;
  out.vertices.reserve(body.size());
  for (const Vec2& v : body.vertices) {
    out.vertices.emplace_back(pose.x + c * v.x() - s * v.y(), pose.y + s * v.x() + c * v.y());
  }
  return out;
}

inline ConvexPolygon rectangle(double x0, double y0, double x1, double y1) {
  return ConvexPolygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

/// Separating-axis test between a convex polygon and a box; touching counts as intersecting.
inline bool intersects(const ConvexPolygon& poly, const Box& box) {
  const Box pb = poly.bounds();
  if (!pb.intersects(box)) return false;
  const Vec2 corners[4] = {box.lo, {box.hi.x(), box.lo.y()}, box.hi, {box.lo.x(), box.hi.y()}};
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly.vertices[i];
    const Vec2 e = poly.vertices[(i + 1) % n] - a;
    const Vec2 normal(e.y(), -e.x());  // outward for CCW
    const double edge_max = normal.dot(a);
    double box_min = kInf;
    for (const Vec2& c : corners) box_min = std::min(box_min, normal.dot(c));
    if (box_min > edge_max) return false;
  }
  return true;
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

}  // namespace latplan
