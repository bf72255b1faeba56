#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "latplan/belief.hpp"
#include "latplan/collision_cost.hpp"
#include "latplan/footprint.hpp"
#include "latplan/motion_model.hpp"
#include "latplan/occupancy_map.hpp"
#include "latplan/planner.hpp"

namespace latplan {

/// SplitMix64: a 64-bit counter advanced by the golden-ratio increment and
/// passed through a fixed mixing function. Gaussians use Box-Muller on
/// 53-bit uniforms in (0, 1), so sequences are identical on every platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : counter_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (counter_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in the open interval (0, 1).
  double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  double gaussian() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double phi = 2.0 * kPi * uniform();
    spare_ = r * std::sin(phi);
    return r * std::cos(phi);
  }

  StateVec gaussian3() {
    StateVec v;
    for (int i = 0; i < 3; ++i) v(i) = gaussian();
    return v;
  }

private:
  std::uint64_t counter_;
  std::optional<double> spare_;
};

struct ExecutionTrace {
  std::vector<StateVec> poses;      ///< true states, index 0 is the start
  std::vector<StateVec> estimates;  ///< filter estimates at the same steps
  bool collided = false;
  int collision_step = -1;
  std::uint64_t seed = 0;
};

/// Everything the closed-loop execution needs besides the plan itself.
struct ExecutionSetup {
  const RobotModel* model = nullptr;
  const NoiseModel* noise = nullptr;
  const Footprint* footprint = nullptr;
  const MultiResMap* map = nullptr;
  LqgWeights weights;
};

/// Runs the planned primitives with sampled motion and measurement noise,
/// LQR feedback on the estimate, and the same Kalman gains the planner predicted.
inline ExecutionTrace simulate(const PlanResult& plan, const PrimitiveSet& prims, const ExecutionSetup& env,
                               std::uint64_t seed) {
  ExecutionTrace tr;
  tr.seed = seed;
  Rng rng(seed);
  const RobotModel& model = *env.model;
  const StateMat sqrt_m = symmetric_sqrt(env.noise->M);
  const StateMat sqrt_n = symmetric_sqrt(env.noise->N_free);
  const Lattice& lat = prims.lattice();

  auto diff = [](const StateVec& a, const StateVec& b) {
    StateVec d = a - b;
    d(2) = wrap_angle(d(2));
    return d;
  };
  auto check = [&](const StateVec& x, int step) {
    if (env.footprint == nullptr || env.map == nullptr) return false;
    if (env.footprint->collides({x(0), x(1), x(2)}, *env.map)) {
      tr.collided = true;
      tr.collision_step = step;
      return true;
    }
    return false;
  };

  StateVec x, xh;
  if (plan.steps.empty()) {
    const Pose p = plan.start.pose(lat);
    xh = StateVec(p.x, p.y, p.theta);
    x = xh;
  } else {
    const Belief& b0 = plan.steps.front().beliefs.beliefs.front();
    xh = b0.mean + symmetric_sqrt(b0.deviation) * rng.gaussian3();
    x = xh + symmetric_sqrt(b0.estimation) * rng.gaussian3();
  }
  tr.poses.push_back(x);
  tr.estimates.push_back(xh);
  if (check(x, 0)) return tr;

  int step = 0;
  for (const PathStep& ps : plan.steps) {
    const MotionPrimitive& p = prims.primitive(ps.primitive);
    const LqgSchedule sched = compute_schedule(p, model, env.weights);
    const std::size_t K = p.controls.size();
    for (std::size_t t = 0; t < K; ++t) {
      const StateVec& nominal = ps.beliefs.beliefs[t].mean;
      const ControlVec u = ControlVec(p.controls[t].v, p.controls[t].omega) + sched.L[t] * diff(xh, nominal);
      x = model.step(x, u) + sqrt_m * rng.gaussian3();
      StateVec pred = model.step(xh, u);
      if (ps.beliefs.measured[t + 1]) {
        const StateVec z = x + sqrt_n * rng.gaussian3();
        pred += ps.beliefs.kalman_gain[t + 1] * diff(z, pred);
      }
      xh = pred;
      ++step;
      tr.poses.push_back(x);
      tr.estimates.push_back(xh);
      if (check(x, step)) return tr;
    }
  }
  return tr;
}

struct BatchSummary {
  std::size_t runs = 0;
  std::size_t collisions = 0;
  std::optional<double> collision_rate;  ///< empty when no runs were made
  double mean_final_deviation = 0.0;     ///< mean distance of the final true position from the planned end
  std::vector<std::uint64_t> seeds;
};

/// Independent runs with seeds base_seed + i.
inline BatchSummary batch(const PlanResult& plan, const PrimitiveSet& prims, const ExecutionSetup& env,
                          std::size_t runs, std::uint64_t base_seed,
                          std::vector<ExecutionTrace>* traces = nullptr) {
  BatchSummary s;
  s.runs = runs;
  Vec2 target = plan.start.pose(prims.lattice()).position();
  if (!plan.steps.empty()) target = plan.steps.back().beliefs.final().mean.head<2>();
  double sum = 0.0, comp = 0.0;  // Kahan summation
  for (std::size_t i = 0; i < runs; ++i) {
    const std::uint64_t seed = base_seed + i;
    s.seeds.push_back(seed);
    ExecutionTrace tr = simulate(plan, prims, env, seed);
    if (tr.collided) ++s.collisions;
    const double dev = (tr.poses.back().head<2>() - target).norm();
    const double y = dev - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    if (traces != nullptr) traces->push_back(std::move(tr));
  }
  if (runs > 0) {
    s.collision_rate = static_cast<double>(s.collisions) / static_cast<double>(runs);
    s.mean_final_deviation = sum / static_cast<double>(runs);
  }
  return s;
}

}  // namespace latplan
