#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "latplan/geometry.hpp"

namespace latplan {

using StateVec = Eigen::Vector3d;  // (x, y, theta)
using ControlVec = Eigen::Vector2d;  // (v, omega)
using StateMat = Eigen::Matrix3d;
using InputMat = Eigen::Matrix<double, 3, 2>;

enum class RobotKind { Unicycle, Ackermann };

struct Control {
  double v = 0.0;
  double omega = 0.0;
};

namespace detail {

// sin(a)/a and its derivative, with series expansions near zero.
inline double sinc(double a) { return std::abs(a) < 1e-4 ? 1.0 - a * a / 6.0 : std::sin(a) / a; }
inline double sinc_derivative(double a) {
  return std::abs(a) < 1e-4 ? -a / 3.0 + a * a * a / 30.0 : (a * std::cos(a) - std::sin(a)) / (a * a);
}

}  // namespace detail

/// Discrete-time planar robot with piecewise-constant (v, omega) controls.
///
/// The transition integrates the control exactly over one step, so the state
/// follows a circular arc (or a straight segment) of length v*dt.
struct RobotModel {
  RobotKind kind = RobotKind::Unicycle;
  double v_max = 1.0;
  double omega_max = kPi / 2.0;
  double min_turn_radius = 0.0;  // Ackermann only
  double dt = 0.1;

  void validate() const {
    if (!(dt > 0.0)) throw Error("model dt must be positive");
    if (!(v_max > 0.0)) throw Error("model v_max must be positive");
    if (!(omega_max > 0.0)) throw Error("model omega_max must be positive");
    if (kind == RobotKind::Ackermann && !(min_turn_radius > 0.0))
      throw Error("ackermann model needs a positive min_turn_radius");
  }

  StateVec step(const StateVec& x, const ControlVec& u) const {
    const double a = 0.5 * u(1) * dt;
    const double d = u(0) * dt * detail::sinc(a);
    const double phi = x(2) + a;
    return {x(0) + d * std::cos(phi), x(1) + d * std::sin(phi), x(2) + u(1) * dt};
  }

  Pose step(const Pose& p, const Control& u) const {
    const StateVec n = step(StateVec(p.x, p.y, p.theta), ControlVec(u.v, u.omega));
    return {n(0), n(1), n(2)};
  }

  /// Observation: full pose.
  StateVec observe(const StateVec& x) const { return x; }

  /// Analytic Jacobians of step() with respect to state and control.
  std::pair<StateMat, InputMat> linearize(const StateVec& x, const ControlVec& u) const {
    const double a = 0.5 * u(1) * dt;
    const double sa = detail::sinc(a);
    const double d = u(0) * dt * sa;
    const double phi = x(2) + a;
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    StateMat A = StateMat::Identity();
    A(0, 2) = -d * s;
    A(1, 2) = d * c;
    InputMat B = InputMat::Zero();
    B(0, 0) = dt * sa * c;
    B(1, 0) = dt * sa * s;
    const double dd = u(0) * dt * detail::sinc_derivative(a) * 0.5 * dt;
    B(0, 1) = dd * c - d * s * 0.5 * dt;
    B(1, 1) = dd * s + d * c * 0.5 * dt;
    B(2, 1) = dt;
    return {A, B};
  }
};

/// Regular lattice: positions are multiples of `resolution`, headings uniform.
struct Lattice {
  double resolution = 0.5;
  int headings = 16;

  double heading_angle(int index) const { return 2.0 * kPi * index / headings; }
  int wrap_heading(int index) const { return ((index % headings) + headings) % headings; }
};

struct LatticeState {
  int ix = 0;
  int iy = 0;
  int ith = 0;
  int iv = 0;
  int iw = 0;

  bool operator==(const LatticeState&) const = default;
  auto operator<=>(const LatticeState&) const = default;

  Pose pose(const Lattice& lat) const {
    return {ix * lat.resolution, iy * lat.resolution, lat.heading_angle(ith)};
  }

  std::uint64_t key() const {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix) & 0xFFFFFu) << 44) |
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy) & 0xFFFFFu) << 24) |
           (static_cast<std::uint64_t>(ith & 0xFFF) << 12) | (static_cast<std::uint64_t>(iv & 0x3F) << 6) |
           static_cast<std::uint64_t>(iw & 0x3F);
  }
};

struct LatticeStateHash {
  std::size_t operator()(const LatticeState& s) const { return std::hash<std::uint64_t>{}(s.key()); }
};

/// Precomputed feasible motion between two lattice states; positions relative to the start.
struct MotionPrimitive {
  int id = -1;
  int start_heading = 0;
  int end_heading = 0;
  int dx = 0;  // lattice units
  int dy = 0;
  int start_v = 0, start_w = 0, end_v = 0, end_w = 0;
  std::vector<Control> controls;
  std::vector<Pose> poses;  // controls.size() + 1 poses; poses[0] = (0, 0, start angle)
  double duration = 0.0;
  double length = 0.0;

  LatticeState apply(const LatticeState& s, const Lattice& lat) const {
    return {s.ix + dx, s.iy + dy, lat.wrap_heading(end_heading), end_v, end_w};
  }
};

struct GroupKey {
  int theta_i = 0, v_i = 0, w_i = 0, theta_f = 0, v_f = 0, w_f = 0;
  auto operator<=>(const GroupKey&) const = default;
};

/// Primitives sharing start/end heading and velocities, longest duration first.
struct PrimitiveGroup {
  GroupKey key;
  std::vector<int> members;
};

/// Partitions primitives by (start heading, velocities, end heading, velocities).
inline std::vector<PrimitiveGroup> group_primitives(const std::vector<MotionPrimitive>& prims) {
  std::map<GroupKey, std::vector<int>> groups;
  for (std::size_t i = 0; i < prims.size(); ++i) {
    const MotionPrimitive& p = prims[i];
    groups[{p.start_heading, p.start_v, p.start_w, p.end_heading, p.end_v, p.end_w}].push_back(static_cast<int>(i));
  }
  std::vector<PrimitiveGroup> out;
  out.reserve(groups.size());
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(), [&](int a, int b) {
      const MotionPrimitive& pa = prims[static_cast<std::size_t>(a)];
      const MotionPrimitive& pb = prims[static_cast<std::size_t>(b)];
      if (pa.duration != pb.duration) return pa.duration > pb.duration;
      if (pa.length != pb.length) return pa.length > pb.length;
      return a < b;
    });
    out.push_back({key, std::move(members)});
  }
  return out;
}

struct ShootingTarget {
  int start_heading = 0;
  int dx = 0;
  int dy = 0;
  int end_heading = 0;
};

namespace detail {

struct CurvatureProfile {
  double k1 = 0.0, k2 = 0.0, sf = 0.0;

  // Cubic through (0,0), (sf/3,k1), (2sf/3,k2), (sf,0).
  double at(double s) const {
    const double u = s / sf;
    return 13.5 * u * (u - 2.0 / 3.0) * (u - 1.0) * k1 - 13.5 * u * (u - 1.0 / 3.0) * (u - 1.0) * k2;
  }
};

inline std::vector<Control> profile_controls(const CurvatureProfile& p, int steps, double dt) {
  const double v = p.sf / (steps * dt);
  std::vector<Control> out(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) out[static_cast<std::size_t>(k)] = {v, v * p.at((k + 0.5) * p.sf / steps)};
  return out;
}

inline StateVec integrate(const RobotModel& m, StateVec x, const std::vector<Control>& controls) {
  for (const Control& c : controls) x = m.step(x, ControlVec(c.v, c.omega));
  return x;
}

}  // namespace detail

/// Builds a primitive by single shooting over a cubic curvature profile.
///
/// Unknowns are the two interior curvature knots and the arc length; the
/// endpoint residual is driven to zero by damped Newton with a finite
/// difference Jacobian. The step count is the smallest one whose speed and
/// turn rate respect the model limits. Returns nullopt when no feasible
/// solution is found within 200 Newton iterations.
inline std::optional<MotionPrimitive> generate_primitive(const RobotModel& model, const Lattice& lat,
                                                         const ShootingTarget& target) {
  model.validate();
  const double dt = model.dt;
  const double theta0 = lat.heading_angle(target.start_heading);
  const double dtheta = wrap_angle(lat.heading_angle(target.end_heading) - theta0);
  const Vec2 goal(target.dx * lat.resolution, target.dy * lat.resolution);
  const StateVec goal_state(goal.x(), goal.y(), theta0 + dtheta);

  MotionPrimitive prim;
  prim.start_heading = lat.wrap_heading(target.start_heading);
  prim.end_heading = lat.wrap_heading(target.end_heading);
  prim.dx = target.dx;
  prim.dy = target.dy;

  auto finish = [&](std::vector<Control> controls, double length) {
    prim.controls = std::move(controls);
    prim.poses.clear();
    Pose p{0.0, 0.0, theta0};
    prim.poses.push_back(p);
    for (const Control& c : prim.controls) {
      p = model.step(p, c);
      prim.poses.push_back(p);
    }
    prim.duration = static_cast<double>(prim.controls.size()) * dt;
    prim.length = length;
    return prim;
  };

  if (target.dx == 0 && target.dy == 0) {
    if (model.kind != RobotKind::Unicycle || std::abs(dtheta) < 1e-12) return std::nullopt;
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(dtheta) / (model.omega_max * dt) - 1e-9)));
    return finish(std::vector<Control>(static_cast<std::size_t>(steps), Control{0.0, dtheta / (steps * dt)}), 0.0);
  }

  const double chord = goal.norm();
  const double chord_dir = std::atan2(goal.y(), goal.x());
  const double arc = std::abs(dtheta) > 1e-9 ? chord * (0.5 * dtheta) / std::sin(0.5 * dtheta) : chord;
  const double kbar = dtheta / arc;
  const double bend = wrap_angle(chord_dir - theta0 - 0.5 * dtheta);
  const double max_curv = model.kind == RobotKind::Ackermann ? 1.0 / model.min_turn_radius : kInf;

  const std::vector<detail::CurvatureProfile> guesses = {
      {kbar, kbar, arc},
      {kbar + 4.0 * bend / arc, kbar - 4.0 * bend / arc, arc * 1.05},
      {kbar - 4.0 * bend / arc, kbar + 4.0 * bend / arc, arc * 1.05},
      {kbar + 8.0 * bend / arc, kbar - 8.0 * bend / arc, arc * 1.2},
  };

  int budget = 200;
  for (const detail::CurvatureProfile& guess : guesses) {
    detail::CurvatureProfile p = guess;
    int steps = std::max(1, static_cast<int>(std::ceil(p.sf / (model.v_max * dt) - 1e-9)));
    for (int k_attempt = 0; k_attempt < 50 && budget > 0; ++k_attempt) {
      auto residual = [&](const detail::CurvatureProfile& q) -> StateVec {
        if (!(q.sf > 0.0)) return StateVec::Constant(kInf);
        return detail::integrate(model, StateVec(0.0, 0.0, theta0), detail::profile_controls(q, steps, dt)) -
               goal_state;
      };
      StateVec r = residual(p);
      bool converged = false;
      while (budget-- > 0) {
        if (r.head<2>().norm() < 1e-10 && std::abs(r(2)) < 1e-10) {
          converged = true;
          break;
        }
        Eigen::Matrix3d J;
        for (int j = 0; j < 3; ++j) {
          detail::CurvatureProfile lo = p, hi = p;
          double* fields_lo[3] = {&lo.k1, &lo.k2, &lo.sf};
          double* fields_hi[3] = {&hi.k1, &hi.k2, &hi.sf};
          const double h = 1e-7 * std::max(1.0, std::abs(*fields_lo[j]));
          *fields_lo[j] -= h;
          *fields_hi[j] += h;
          J.col(j) = (residual(hi) - residual(lo)) / (2.0 * h);
        }
        const Eigen::Vector3d delta = J.fullPivLu().solve(-r);
        if (!delta.allFinite()) break;
        double alpha = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
          detail::CurvatureProfile trial{p.k1 + alpha * delta(0), p.k2 + alpha * delta(1), p.sf + alpha * delta(2)};
          const StateVec rt = residual(trial);
          if (rt.allFinite() && rt.norm() < r.norm()) {
            p = trial;
            r = rt;
            improved = true;
            break;
          }
        }
        if (!improved) break;
      }
      if (!converged || p.sf <= 0.0 || p.sf > 4.0 * chord + 1.0) break;

      std::vector<Control> controls = detail::profile_controls(p, steps, dt);
      double peak_w = 0.0, peak_k = 0.0;
      for (int k = 0; k < steps; ++k) {
        peak_w = std::max(peak_w, std::abs(controls[static_cast<std::size_t>(k)].omega));
        peak_k = std::max(peak_k, std::abs(p.at((k + 0.5) * p.sf / steps)));
      }
      if (peak_k > max_curv * (1.0 + 1e-9)) break;
      if (controls.front().v > model.v_max * (1.0 + 1e-9) || peak_w > model.omega_max * (1.0 + 1e-9)) {
        ++steps;
        continue;
      }
      return finish(std::move(controls), p.sf);
    }
  }
  return std::nullopt;
}

/// Rotates a primitive by `quarters` quarter turns about its start position.
inline MotionPrimitive rotate_quarter(const MotionPrimitive& p, int quarters, const Lattice& lat) {
  quarters = ((quarters % 4) + 4) % 4;
  MotionPrimitive r = p;
  const int shift = quarters * lat.headings / 4;
  r.start_heading = lat.wrap_heading(p.start_heading + shift);
  r.end_heading = lat.wrap_heading(p.end_heading + shift);
  auto rot = [&](double x, double y) -> std::pair<double, double> {
    switch (quarters) {
      case 1: return {-y, x};
      case 2: return {-x, -y};
      case 3: return {y, -x};
      default: return {x, y};
    }
  };
  auto [dx, dy] = rot(p.dx, p.dy);
  r.dx = static_cast<int>(std::lround(dx));
  r.dy = static_cast<int>(std::lround(dy));
  for (Pose& pose : r.poses) {
    auto [x, y] = rot(pose.x, pose.y);
    pose.x = x;
    pose.y = y;
    pose.theta += quarters * 0.5 * kPi;
  }
  return r;
}

struct ControlSetOptions {
  int max_heading_change = 2;  ///< heading indices per primitive
  bool in_place_turns = false;  ///< unicycle only
};

/// Motion primitives for one robot on one lattice, indexed for successor generation.
class PrimitiveSet {
public:
  PrimitiveSet() = default;
  PrimitiveSet(RobotModel model, Lattice lattice, double f_plus, std::vector<MotionPrimitive> prims)
      : model_(model), lattice_(lattice), f_plus_(f_plus), prims_(std::move(prims)) {
    for (std::size_t i = 0; i < prims_.size(); ++i) prims_[i].id = static_cast<int>(i);
    groups_ = group_primitives(prims_);
    by_start_.assign(static_cast<std::size_t>(lattice_.headings), {});
    groups_by_start_.assign(static_cast<std::size_t>(lattice_.headings), {});
    for (const MotionPrimitive& p : prims_) {
      if (p.start_heading < 0 || p.start_heading >= lattice_.headings) throw Error("primitive heading out of range");
      by_start_[static_cast<std::size_t>(p.start_heading)].push_back(p.id);
    }
    for (std::size_t g = 0; g < groups_.size(); ++g)
      groups_by_start_[static_cast<std::size_t>(groups_[g].key.theta_i)].push_back(static_cast<int>(g));
  }

  const RobotModel& model() const { return model_; }
  const Lattice& lattice() const { return lattice_; }
  /// Finest primitive length scale.
  double f_plus() const { return f_plus_; }
  const std::vector<MotionPrimitive>& primitives() const { return prims_; }
  const MotionPrimitive& primitive(int id) const { return prims_.at(static_cast<std::size_t>(id)); }
  const std::vector<PrimitiveGroup>& groups() const { return groups_; }
  const std::vector<int>& starting_at(int heading) const { return by_start_.at(static_cast<std::size_t>(heading)); }
  const std::vector<int>& groups_starting_at(int heading) const {
    return groups_by_start_.at(static_cast<std::size_t>(heading));
  }
  std::size_t size() const { return prims_.size(); }

private:
  RobotModel model_;
  Lattice lattice_;
  double f_plus_ = 0.0;
  std::vector<MotionPrimitive> prims_;
  std::vector<PrimitiveGroup> groups_;
  std::vector<std::vector<int>> by_start_;
  std::vector<std::vector<int>> groups_by_start_;
};

/// Generates primitives for the canonical headings [0, H/4) at each length
/// scale and replicates them by quarter-turn rotation.
inline PrimitiveSet build_control_set(const RobotModel& model, const Lattice& lat, std::vector<double> lengths,
                                      const ControlSetOptions& opts = {}) {
  model.validate();
  if (lat.headings < 4 || lat.headings % 4 != 0) throw Error("heading count must be a positive multiple of 4");
  if (lengths.empty()) throw Error("at least one primitive length is required");
  if (!std::is_sorted(lengths.begin(), lengths.end())) throw Error("primitive lengths must be sorted ascending");
  const double step = 2.0 * kPi / lat.headings;

  std::set<std::tuple<int, int, int, int>> seen;
  std::vector<MotionPrimitive> canonical;
  for (int h0 = 0; h0 < lat.headings / 4; ++h0) {
    for (double len : lengths) {
      for (int dh = -opts.max_heading_change; dh <= opts.max_heading_change; ++dh) {
        const double mid = lat.heading_angle(h0) + 0.5 * dh * step;
        const int tx = static_cast<int>(std::lround(len * std::cos(mid) / lat.resolution));
        const int ty = static_cast<int>(std::lround(len * std::sin(mid) / lat.resolution));
        if (tx == 0 && ty == 0) continue;
        const int h1 = lat.wrap_heading(h0 + dh);
        if (!seen.insert({h0, tx, ty, h1}).second) continue;
        if (auto p = generate_primitive(model, lat, {h0, tx, ty, h1})) canonical.push_back(std::move(*p));
      }
    }
    if (opts.in_place_turns && model.kind == RobotKind::Unicycle) {
      for (int dh : {-1, 1})
        if (auto p = generate_primitive(model, lat, {h0, 0, 0, lat.wrap_heading(h0 + dh)}))
          canonical.push_back(std::move(*p));
    }
  }

  std::vector<MotionPrimitive> all;
  for (int q = 0; q < 4; ++q)
    for (const MotionPrimitive& p : canonical) all.push_back(rotate_quarter(p, q, lat));
  std::sort(all.begin(), all.end(), [](const MotionPrimitive& a, const MotionPrimitive& b) {
    return std::tie(a.start_heading, a.end_heading, a.length, a.dx, a.dy) <
           std::tie(b.start_heading, b.end_heading, b.length, b.dx, b.dy);
  });
  return PrimitiveSet(model, lat, lengths.front(), std::move(all));
}

}  // namespace latplan
