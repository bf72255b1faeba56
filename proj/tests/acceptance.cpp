// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <queue>
#include <random>
#include <string>

#include "latplan/io.hpp"
#include "latplan/planner.hpp"
#include "latplan/simulator.hpp"
#include "support.hpp"

using namespace latplan;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = LATPLAN_SOURCE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

RobotModel unicycle() {
  RobotModel m;
  m.v_max = 1.0;
  m.omega_max = kPi / 2.0;
  m.dt = 0.1;
  return m;
}

NoiseModel isotropic(double level) {
  NoiseModel n;
  n.M = level * StateMat::Identity();
  n.N_free = level * StateMat::Identity();
  return n;
}

struct Corridor {
  io::Scenario sc;
  MultiResMap map;
  Footprint fp;
  PrimitiveSet prims;

  Corridor() {
    sc = io::load_scenario(kSource / "scenarios" / "corridor.json");
    map = io::load_map(sc.pgm, sc.sidecar, sc.max_leaf_size);
    fp = io::footprint_from_json(sc.footprint, "footprint");
    const io::ControlSetSpec spec = io::control_set_spec_from_json(sc.primitives_spec, "primitives");
    prims = build_control_set(spec.model, spec.lattice, spec.lengths, spec.options);
  }

  PlanningProblem problem() const {
    PlanningProblem pb;
    pb.map = &map;
    pb.footprint = &fp;
    pb.primitives = &prims;
    pb.noise = sc.noise;
    pb.start = sc.start;
    pb.start_covariance = sc.start_covariance;
    pb.goal = sc.goal;
    pb.any_goal_heading = sc.any_goal_heading;
    return pb;
  }
};

const Corridor& corridor() {
  static const Corridor c;
  return c;
}

// ------------------------------------------------------------------ 1

Outcome collision_probability_reliability() {
  // Rectangle at heading 0; obstacle is the half-plane beyond a 45-degree line.
  const double res = 0.025;
  const int n = 800;
  const Vec2 normal = Vec2(1.0, 1.0).normalized();
  const Vec2 anchor(10.0, 10.0);
  const double offset = normal.dot(anchor);
  OccupancyGrid g(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (normal.dot(Vec2((x + 0.5) * res, (y + 0.5) * res)) >= offset) g.set(x, y, true);
  const MultiResMap map = MultiResMap::build_from_grid(g, res);
  const Footprint fp = Footprint::rectangle(3.0, 0.75);
  const std::vector<Vec2> corners{{1.5, 0.375}, {1.5, -0.375}, {-1.5, 0.375}, {-1.5, -0.375}};
  const std::vector<double> lambdas = PlannerConfig{}.lambdas;
  const StateMat sigma = StateMat::Identity();
  const int samples = 1'000'000;

  double sum_err = 0.0, worst_sigma = 0.0, worst_gamma = 0.0;
  int count = 0;
  for (int i = 0; i <= 50; ++i) {
    const double d = 0.5 + 0.05 * i;
    const Vec2 m = anchor - normal * d;
    const StateVec mean(m.x(), m.y(), 0.0);
    const double p_sigma = waypoint_collision_probability(mean, sigma, fp, map, lambdas);
    const double p_gamma = gamma_probability_baseline(mean, sigma, fp.circumscribed_radius(), map);
    // Exact rectangle vs half-plane test on sampled poses.
    Rng rng(1000 + i);
    int hits = 0;
    for (int s = 0; s < samples; ++s) {
      const double x = m.x() + rng.gaussian(), y = m.y() + rng.gaussian(), th = rng.gaussian();
      const double c = std::cos(th), sn = std::sin(th);
      double reach = -kInf;
      for (const Vec2& q : corners)
        reach = std::max(reach, normal.dot(Vec2(x + c * q.x() - sn * q.y(), y + sn * q.x() + c * q.y())));
      hits += reach >= offset;
    }
    const double p_mc = static_cast<double>(hits) / samples;
    sum_err += std::abs(p_sigma - p_mc);
    ++count;
    if (d >= 0.75 - 1e-9 && d <= 1.0 + 1e-9) {
      worst_sigma = std::max(worst_sigma, std::abs(p_sigma - p_mc));
      worst_gamma = std::max(worst_gamma, std::abs(p_gamma - p_mc));
    }
  }
  const double mae = sum_err / count;
  const bool ratio_ok = worst_gamma >= 5.0 * worst_sigma;
  return {mae <= 0.03 && ratio_ok,
          fmt("sigma-sampling mean abs error %.2f pp (limit 3); worst error on [0.75, 1.0] m: gamma %.1f pp, "
              "sigma-sampling %.1f pp, ratio %.1f (limit 5)",
              100 * mae, 100 * worst_gamma, 100 * worst_sigma, worst_sigma > 0 ? worst_gamma / worst_sigma : kInf)};
}

// ------------------------------------------------------------------ 2

Outcome graduated_fidelity_efficiency() {
  const Corridor& c = corridor();
  PlannerConfig on = c.sc.planner, off = c.sc.planner;
  on.graduated_fidelity = true;
  off.graduated_fidelity = false;
  const PlanResult a = Planner(c.problem(), on).search(1.0);
  const PlanResult b = Planner(c.problem(), off).search(1.0);
  if (!a.found || !b.found) return {false, "no path found"};
  const double ins = 1.0 - static_cast<double>(a.stats.insertions) / b.stats.insertions;
  const double it = 1.0 - static_cast<double>(a.stats.iterations) / b.stats.iterations;
  const double dt = a.cost.t / b.cost.t - 1.0;
  return {ins >= 0.5 && it >= 0.5 && dt <= 0.15,
          fmt("insertions %zu -> %zu (-%.1f%%), iterations %zu -> %zu (-%.1f%%), time cost %.1f -> %.1f s (+%.1f%%)",
              b.stats.insertions, a.stats.insertions, 100 * ins, b.stats.iterations, a.stats.iterations, 100 * it,
              b.cost.t, a.cost.t, 100 * dt)};
}

// ------------------------------------------------------------------ 3

Outcome multires_grid_heuristic_gain() {
  const double res = 0.1;
  const OccupancyGrid grid(500, 500);
  const Vec2 start(5.0, 5.0), goal(45.0, 45.0);
  std::vector<std::size_t> sr, mr;
  for (double cp : {0.8, 1.6, 3.2, 6.4, 12.8}) {
    const MultiResMap map = MultiResMap::build_from_grid(grid, res, Vec2::Zero(), cp);
    sr.push_back(initialize_h2d_baseline(start, goal, map, 0.5, 0.0).stats().iterations);
    mr.push_back(initialize_h2dmr(start, goal, map, 0.5, 0.0).stats().iterations);
  }
  bool constant = true, monotone = true;
  for (std::size_t i = 1; i < sr.size(); ++i) {
    constant = constant && sr[i] == sr[0];
    monotone = monotone && mr[i] <= mr[i - 1];
  }
  const double share = static_cast<double>(mr.back()) / sr.back();
  std::string its;
  for (std::size_t i = 0; i < mr.size(); ++i) its += (i ? "," : "") + std::to_string(mr[i]);
  return {constant && monotone && share <= 0.15,
          fmt("H2D iterations %zu (%s); H2DMR iterations %s (%s); at 12.8 m H2DMR uses %.1f%% of H2D (limit 15%%)",
              sr[0], constant ? "constant" : "varying", its.c_str(), monotone ? "non-increasing" : "increasing",
              100 * share)};
}

// ------------------------------------------------------------------ 4

Outcome heuristic_admissibility() {
  const PrimitiveSet prims = build_control_set(unicycle(), {0.5, 16}, {0.5, 1.0});
  const Footprint fp = Footprint::rectangle(0.6, 0.4);
  const int side = 15, H = 16;
  std::vector<std::optional<FshTable>> fsh(H);
  std::mt19937 rng(2024);
  std::size_t checked = 0, violations = 0;
  double worst = -kInf;
  int maps = 0;
  while (maps < 50) {
    OccupancyGrid g = latplan::testing::random_grid(rng, 30, 30, 0.08, 2);
    for (int i = 0; i < 30; ++i) {
      g.set(i, 0, true);
      g.set(i, 29, true);
      g.set(0, i, true);
      g.set(29, i, true);
    }
    const MultiResMap map = MultiResMap::build_from_grid(g, 0.25);
    const Lattice& lat = prims.lattice();
    auto idx = [&](int x, int y, int h) { return (static_cast<std::size_t>(y) * side + x) * H + h; };
    auto free_state = [&](int x, int y, int h) { return !fp.collides(LatticeState{x, y, h}.pose(lat), map); };
    std::uniform_int_distribution<int> pos(0, side - 1), head(0, H - 1);
    LatticeState goal{pos(rng), pos(rng), head(rng)}, start{pos(rng), pos(rng), head(rng)};
    if (!free_state(goal.ix, goal.iy, goal.ith) || !free_state(start.ix, start.iy, start.ith) || goal == start)
      continue;

    // Backward Dijkstra over nominally collision-free edges inside the box.
    std::vector<std::vector<std::pair<std::size_t, double>>> reverse(static_cast<std::size_t>(side) * side * H);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        for (int h = 0; h < H; ++h) {
          if (!free_state(x, y, h)) continue;
          const Pose base = LatticeState{x, y, h}.pose(lat);
          for (int pid : prims.starting_at(h)) {
            const MotionPrimitive& p = prims.primitive(pid);
            const int nx = x + p.dx, ny = y + p.dy;
            if (nx < 0 || ny < 0 || nx >= side || ny >= side) continue;
            bool clear = true;
            for (const Pose& q : p.poses)
              if (fp.collides({base.x + q.x, base.y + q.y, q.theta}, map)) {
                clear = false;
                break;
              }
            if (clear) reverse[idx(nx, ny, p.end_heading)].push_back({idx(x, y, h), p.duration});
          }
        }
    std::vector<double> best(reverse.size(), kInf);
    using E = std::pair<double, std::size_t>;
    std::priority_queue<E, std::vector<E>, std::greater<>> open;
    best[idx(goal.ix, goal.iy, goal.ith)] = 0.0;
    open.push({0.0, idx(goal.ix, goal.iy, goal.ith)});
    while (!open.empty()) {
      auto [c, i] = open.top();
      open.pop();
      if (c > best[i]) continue;
      for (auto [j, w] : reverse[i])
        if (c + w < best[j]) {
          best[j] = c + w;
          open.push({best[j], j});
        }
    }
    if (!std::isfinite(best[idx(start.ix, start.iy, start.ith)])) continue;

    if (!fsh[static_cast<std::size_t>(goal.ith)]) fsh[static_cast<std::size_t>(goal.ith)] = build_fsh(prims, side, goal.ith);
    PlanningProblem pb;
    pb.map = &map;
    pb.footprint = &fp;
    pb.primitives = &prims;
    pb.start = start;
    pb.goal = goal;
    const Planner planner(pb, PlannerConfig{}, fsh[static_cast<std::size_t>(goal.ith)]);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        for (int h = 0; h < H; ++h) {
          const double opt = best[idx(x, y, h)];
          if (!std::isfinite(opt)) continue;
          const double hv = planner.heuristic()(LatticeState{x, y, h});
          ++checked;
          worst = std::max(worst, hv - opt);
          if (hv > opt + 1e-9) ++violations;
        }
    ++maps;
  }
  return {violations == 0, fmt("%zu states on %d maps, %zu violations, largest h - optimum %.3f s", checked, maps,
                               violations, worst)};
}

// ------------------------------------------------------------------ 5

Outcome anytime_behaviour() {
  const Corridor& c = corridor();
  PlannerConfig cfg = c.sc.planner;
  cfg.epsilon0 = 1.5;
  Planner anytime(c.problem(), cfg);
  const AnytimeResult any = anytime.plan();
  const PlanResult exact = Planner(c.problem(), c.sc.planner).search(1.0);
  if (any.episodes.empty() || !exact.found) return {false, "no path found"};
  bool monotone = true;
  for (std::size_t i = 1; i < any.episodes.size(); ++i)
    monotone = monotone && !(any.episodes[i - 1].cost < any.episodes[i].cost);
  const PlanResult& first = any.episodes.front();
  const bool fewer = first.found && first.stats.iterations < exact.stats.iterations;
  const bool equal = any.best.cost == exact.cost;
  return {fewer && monotone && equal,
          fmt("first episode %zu iterations vs %zu at eps 1; %zu episodes, costs %s; final (%.4g, %.4g, %.6g) vs eps 1 "
              "(%.4g, %.4g, %.6g)",
              first.stats.iterations, exact.stats.iterations, any.episodes.size(),
              monotone ? "non-increasing" : "increase", any.best.cost.c, any.best.cost.t, any.best.cost.u,
              exact.cost.c, exact.cost.t, exact.cost.u)};
}

// ------------------------------------------------------------------ 6

Outcome monte_carlo_safety() {
  const Corridor& c = corridor();
  Planner planner(c.problem(), c.sc.planner);
  const PlanResult plan = planner.plan().best;
  if (!plan.found) return {false, "no path found"};
  if (plan.cost.c != 0.0) return {false, fmt("planned path has collision cost %.3g", plan.cost.c)};
  const ExecutionSetup env{&c.prims.model(), &c.sc.noise, &c.fp, &c.map, c.sc.planner.weights};
  const BatchSummary s = batch(plan, c.prims, env, 1000, 1);
  return {*s.collision_rate <= 0.01,
          fmt("%zu collisions in %zu runs (%.1f%%, limit 1%%)", s.collisions, s.runs, 100 * *s.collision_rate)};
}

// ------------------------------------------------------------------ 7

Outcome belief_propagation_oracle() {
  ControlSetOptions opts;
  opts.max_heading_change = 4;
  const PrimitiveSet prims = build_control_set(unicycle(), {0.5, 16}, {1.0, 2.0}, opts);
  int straight = -1, turn = -1;
  for (int id : prims.starting_at(0)) {
    const MotionPrimitive& p = prims.primitive(id);
    if (p.end_heading == 0 && p.dy == 0 && p.dx > 0 && (straight < 0 || p.dx > prims.primitive(straight).dx))
      straight = id;
    if (p.end_heading == 4 && (turn < 0 || p.length < prims.primitive(turn).length)) turn = id;
  }
  if (straight < 0 || turn < 0) return {false, "straight or quarter-turn primitive missing"};

  const NoiseModel noise = isotropic(0.01);
  const int runs = 100'000;
  double worst = 0.0;
  std::size_t steps = 0;
  for (int id : {straight, turn}) {
    const LatticeState start{10, 10, 0};
    const Pose p0 = start.pose(prims.lattice());
    Belief b;
    b.mean = StateVec(p0.x, p0.y, p0.theta);
    b.estimation = 0.01 * StateMat::Identity();
    PlanResult plan;
    plan.found = true;
    plan.start = start;
    plan.goal = prims.primitive(id).apply(start, prims.lattice());
    PathStep st;
    st.from = start;
    st.primitive = id;
    st.beliefs = propagate(b, prims.primitive(id), p0.position(), prims.model(), noise);
    plan.steps.push_back(st);
    const std::vector<Belief>& pred = plan.steps[0].beliefs.beliefs;
    const ExecutionSetup env{&prims.model(), &noise, nullptr, nullptr, {}};
    std::vector<StateMat> acc(pred.size(), StateMat::Zero());
    for (int r = 0; r < runs; ++r) {
      const ExecutionTrace tr = simulate(plan, prims, env, static_cast<std::uint64_t>(r));
      for (std::size_t t = 0; t < pred.size(); ++t) {
        StateVec d = tr.poses[t] - pred[t].mean;
        d(2) = wrap_angle(d(2));
        acc[t] += d * d.transpose();
      }
    }
    for (std::size_t t = 0; t < pred.size(); ++t) {
      const StateMat s = pred[t].sigma();
      worst = std::max(worst, (acc[t] / runs - s).norm() / s.norm());
      ++steps;
    }
  }
  return {worst <= 0.05, fmt("%zu steps over straight and 90-degree primitives, worst relative Frobenius error %.2f%% "
                             "(limit 5%%)",
                             steps, 100 * worst)};
}

// ------------------------------------------------------------------ 8

Outcome planner_optimality() {
  const PrimitiveSet prims = build_control_set(unicycle(), {0.5, 16}, {0.5, 1.0});
  const Footprint fp = Footprint::rectangle(0.6, 0.4);
  std::mt19937 rng(77);
  int instances = 0, matched = 0, found = 0;
  std::string first_mismatch;
  while (instances < 20) {
    OccupancyGrid g = latplan::testing::random_grid(rng, 32, 32, 0.06, 2);
    const MultiResMap map = MultiResMap::build_from_grid(g, 0.25);
    std::uniform_int_distribution<int> pos(1, 14), head(0, 15);
    PlanningProblem pb;
    pb.map = &map;
    pb.footprint = &fp;
    pb.primitives = &prims;
    pb.noise = isotropic(0.002);
    pb.start = {pos(rng), pos(rng), head(rng)};
    pb.goal = {pos(rng), pos(rng), head(rng)};
    pb.start_covariance = 0.002 * StateMat::Identity();
    const Lattice& lat = prims.lattice();
    if (pb.start == pb.goal || fp.collides(pb.start.pose(lat), map) || fp.collides(pb.goal.pose(lat), map)) continue;
    PlannerConfig cfg;
    cfg.heuristic.fsh_radius = 8;
    Planner planner(pb, cfg);
    const PlanResult r = planner.search(1.0);
    Planner graph(pb, cfg);
    const auto oracle = latplan::testing::exhaustive_search(
        pb.start, graph.start_belief(), [&](const LatticeState& s, const Belief& b) { return graph.successors(s, b); },
        [&](const LatticeState& s) { return s == pb.goal; });
    ++instances;
    const bool same = oracle.has_value() == r.found && (!r.found || r.cost == *oracle);
    if (r.found) ++found;
    if (same) {
      ++matched;
    } else if (first_mismatch.empty()) {
      first_mismatch = oracle ? fmt("; first mismatch planner (%.6g, %.4g, %.6g) vs oracle (%.6g, %.4g, %.6g)",
                                    r.cost.c, r.cost.t, r.cost.u, oracle->c, oracle->t, oracle->u)
                              : std::string("; first mismatch: oracle found no path");
    }
  }
  return {matched == instances,
          fmt("%d of %d instances identical in all three components (%d with a path)%s", matched, instances, found,
              first_mismatch.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"collision probability reliability", collision_probability_reliability},
      {"graduated fidelity efficiency", graduated_fidelity_efficiency},
      {"multi-resolution grid heuristic gain", multires_grid_heuristic_gain},
      {"heuristic admissibility", heuristic_admissibility},
      {"anytime behaviour", anytime_behaviour},
      {"Monte Carlo safety", monte_carlo_safety},
      {"belief propagation oracle", belief_propagation_oracle},
      {"planner optimality oracle", planner_optimality},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), s);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
