#pragma once

#include <cmath>
#include <compare>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "latplan/belief.hpp"
#include "latplan/footprint.hpp"
#include "latplan/motion_model.hpp"
#include "latplan/occupancy_map.hpp"

namespace latplan {

/// Edge or path cost compared lexicographically: collision cost, then time, then final uncertainty.
struct PathCost {
  double c = 0.0;  ///< -log of the survival probability
  double t = 0.0;  ///< traversal time (s)
  double u = 0.0;  ///< trace of the final covariance

  friend bool operator==(const PathCost&, const PathCost&) = default;
  friend std::partial_ordering operator<=>(const PathCost& a, const PathCost& b) {
    if (auto o = a.c <=> b.c; o != 0) return o;
    if (auto o = a.t <=> b.t; o != 0) return o;
    return a.u <=> b.u;
  }
};

/// Deterministic samples of N(mean, sigma) with their density values.
struct SigmaSampleSet {
  std::vector<StateVec> samples;
  std::vector<double> weights;
};

/// Symmetric square root with eigenvalues clamped at zero.
inline StateMat symmetric_sqrt(const StateMat& sigma) {
  Eigen::SelfAdjointEigenSolver<StateMat> es(0.5 * (sigma + sigma.transpose()));
  const Eigen::Vector3d root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

/// Mean, +-lambda along each column of sqrt(sigma), and the four cross points
/// x_i(+-) +- lambda * col_j for every unordered pair i < j, for each lambda.
/// Weights are the Gaussian density (pseudo-density on the support when sigma is singular).
inline SigmaSampleSet sigma_samples(const StateVec& mean, const StateMat& sigma, const std::vector<double>& lambdas) {
  const StateMat s = make_psd(sigma);
  Eigen::SelfAdjointEigenSolver<StateMat> es(s);
  const Eigen::Vector3d ev = es.eigenvalues();
  const double scale = std::max(ev.maxCoeff(), 0.0);
  SigmaSampleSet out;
  if (scale <= 1e-300) {
    out.samples.push_back(mean);
    out.weights.push_back(1.0);
    return out;
  }
  const double floor = 1e-12 * scale;
  int rank = 0;
  double log_det = 0.0;
  Eigen::Vector3d inv = Eigen::Vector3d::Zero();
  for (int i = 0; i < 3; ++i) {
    if (ev(i) > floor) {
      ++rank;
      log_det += std::log(ev(i));
      inv(i) = 1.0 / ev(i);
    }
  }
  const StateMat pinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  const double log_norm = -0.5 * rank * std::log(2.0 * kPi) - 0.5 * log_det;
  auto density = [&](const StateVec& d) { return std::exp(log_norm - 0.5 * d.dot(pinv * d)); };

  const StateMat root = es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  auto add = [&](const StateVec& d) {
    out.samples.push_back(mean + d);
    out.weights.push_back(density(d));
  };
  add(StateVec::Zero());
  for (double lambda : lambdas) {
    for (int i = 0; i < 3; ++i) {
      add(lambda * root.col(i));
      add(-lambda * root.col(i));
    }
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        for (double si : {1.0, -1.0})
          for (double sj : {1.0, -1.0}) add(lambda * (si * root.col(i) + sj * root.col(j)));
  }
  return out;
}

/// Weighted fraction of sigma samples whose pose makes the real footprint collide.
inline double waypoint_collision_probability(const StateVec& mean, const StateMat& sigma, const Footprint& fp,
                                             const MultiResMap& map, const std::vector<double>& lambdas) {
  const SigmaSampleSet set = sigma_samples(mean, sigma, lambdas);
  // Every sample footprint lies inside this disc; if it is clear, nothing collides.
  double spread = 0.0;
  for (const StateVec& s : set.samples) spread = std::max(spread, (s.head<2>() - mean.head<2>()).norm());
  if (!map.disc_collides(mean.head<2>(), spread + fp.circumscribed_radius())) return 0.0;
  double wc = 0.0, wt = 0.0;
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const StateVec& s = set.samples[i];
    wt += set.weights[i];
    if (fp.collides({s(0), s(1), s(2)}, map)) wc += set.weights[i];
  }
  return wt > 0.0 ? std::clamp(wc / wt, 0.0, 1.0) : 0.0;
}

/// Beliefs (by index) at which collision probability is evaluated: every pose
/// after the start, thinned so consecutive picks are at least `spacing` apart in
/// footprint motion (arc length plus heading change times the circumscribed radius).
inline std::vector<std::size_t> evaluation_waypoints(const MotionPrimitive& prim, double spacing, double radius) {
  std::vector<std::size_t> out;
  const std::size_t K = prim.poses.size() - 1;
  double travelled = 0.0;
  for (std::size_t t = 1; t <= K; ++t) {
    const Pose& a = prim.poses[t - 1];
    const Pose& b = prim.poses[t];
    travelled += std::hypot(b.x - a.x, b.y - a.y) + std::abs(b.theta - a.theta) * radius;
    if (t == K || travelled >= spacing) {
      out.push_back(t);
      travelled = 0.0;
    }
  }
  return out;
}

/// Adds one waypoint's collision probability to a collision cost.
inline double accumulate_collision_cost(double c, double p) {
  if (p >= 1.0) return kInf;
  return c - std::log1p(-std::min(p, 1.0 - 1e-12));
}

/// Collision cost, duration and final uncertainty of executing `prim` with the predicted beliefs.
inline PathCost edge_cost(const BeliefTrajectory& beliefs, const MotionPrimitive& prim, const Footprint& fp,
                          const MultiResMap& map, const std::vector<double>& lambdas) {
  if (beliefs.beliefs.size() != prim.poses.size()) throw Error("belief trajectory does not match primitive");
  PathCost cost;
  for (std::size_t t : evaluation_waypoints(prim, 0.5 * map.resolution(), fp.circumscribed_radius())) {
    const Belief& b = beliefs.beliefs[t];
    cost.c = accumulate_collision_cost(cost.c, waypoint_collision_probability(b.mean, b.sigma(), fp, map, lambdas));
    if (std::isinf(cost.c)) break;
  }
  cost.t = prim.duration;
  cost.u = uncertainty_trace(beliefs.final().sigma());
  return cost;
}

/// Chi-square tail of the positional Mahalanobis distance to the nearest
/// obstacle, with the robot approximated by its bounding circle.
inline double gamma_probability_baseline(const StateVec& mean, const StateMat& sigma, double bounding_radius,
                                         const MultiResMap& map) {
  Vec2 closest;
  const Vec2 p = mean.head<2>();
  const double d = map.nearest_obstacle_distance(p, &closest);
  if (std::isinf(d)) return 0.0;
  if (d <= bounding_radius) return 1.0;
  const Vec2 dir = (closest - p).normalized();
  const Eigen::Matrix2d pos = sigma.topLeftCorner<2, 2>();
  const double var = dir.dot(pos * dir);
  if (var <= 0.0) return 0.0;
  const double m = (d - bounding_radius) / std::sqrt(var);
  return boost::math::gamma_q(1.0, 0.5 * m * m);
}

}  // namespace latplan
