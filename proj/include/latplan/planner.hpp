#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <queue>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "latplan/belief.hpp"
#include "latplan/collision_cost.hpp"
#include "latplan/footprint.hpp"
#include "latplan/heuristics.hpp"
#include "latplan/motion_model.hpp"
#include "latplan/occupancy_map.hpp"

namespace latplan {

struct PlannerConfig {
  double epsilon0 = 1.5;
  double epsilon_factor = 0.5;  ///< excess over 1 is multiplied by this between episodes
  bool graduated_fidelity = true;
  std::vector<double> lambdas{1.0, 2.0};
  HeuristicConfig heuristic;
  LqgWeights weights;
  std::size_t max_iterations = 0;  ///< per episode; 0 = unlimited
};

struct PlanningProblem {
  const MultiResMap* map = nullptr;
  const Footprint* footprint = nullptr;
  const PrimitiveSet* primitives = nullptr;
  NoiseModel noise;
  LatticeState start;
  StateMat start_covariance = StateMat::Zero();
  LatticeState goal;
  bool any_goal_heading = false;
};

struct PlanStats {
  std::size_t iterations = 0;   ///< labels extracted from OPEN and expanded
  std::size_t insertions = 0;   ///< labels pushed into OPEN
  std::size_t evaluations = 0;  ///< edge cost evaluations requested this episode
  std::size_t emitted = 0;      ///< successor edges handed to the search
  double wall_ms = 0.0;
  double epsilon = 1.0;
};

struct PathStep {
  LatticeState from;
  int primitive = -1;
  BeliefTrajectory beliefs;
  PathCost edge;
};

struct PlanResult {
  bool found = false;
  LatticeState start;
  LatticeState goal;
  std::vector<PathStep> steps;
  PathCost cost;
  PlanStats stats;
};

struct AnytimeResult {
  std::vector<PlanResult> episodes;  ///< published result after each episode
  PlanResult best;
  double heuristic_ms = 0.0;
};

/// A candidate edge produced by successor generation.
struct Successor {
  LatticeState state;
  int primitive = -1;
  PathCost edge;
  Belief belief;  // at the end of the edge
};

/// Next inflation factor: shrink the excess over 1, snapping to 1 when small.
inline double next_epsilon(double eps, double factor) {
  const double excess = (eps - 1.0) * factor;
  return excess < 0.02 ? 1.0 : 1.0 + excess;
}

/// True when `a` is no worse than `b` in every cost component.
inline bool dominates(const PathCost& a, const PathCost& b) { return a.c <= b.c && a.t <= b.t && a.u <= b.u; }

/// Adds `id` to a per-state set of mutually non-dominated costs. The candidate
/// is rejected when a member dominates it (including an identical cost);
/// members it dominates are removed and reported through `on_remove`.
template <class CostOf, class OnRemove>
bool pareto_insert(std::vector<int>& set, int id, const PathCost& cost, CostOf&& cost_of, OnRemove&& on_remove) {
  for (int other : set)
    if (dominates(cost_of(other), cost)) return false;
  std::erase_if(set, [&](int other) {
    if (!dominates(cost, cost_of(other))) return false;
    on_remove(other);
    return true;
  });
  set.push_back(id);
  return true;
}

/// Lattice search under uncertainty with graduated-fidelity successors.
class Planner {
public:
  Planner(PlanningProblem problem, PlannerConfig config, std::optional<FshTable> fsh = std::nullopt)
      : pb_(std::move(problem)), cfg_(std::move(config)) {
    if (pb_.map == nullptr || pb_.footprint == nullptr || pb_.primitives == nullptr)
      throw Error("planning problem is missing map, footprint or primitives");
    if (!(cfg_.epsilon0 >= 1.0)) throw Error("epsilon0 must be >= 1");
    if (!(cfg_.epsilon_factor >= 0.0 && cfg_.epsilon_factor < 1.0)) throw Error("epsilon factor must be in [0, 1)");
    const Lattice& lat = pb_.primitives->lattice();
    for (const LatticeState* s : {&pb_.start, &pb_.goal})
      if (s->ith < 0 || s->ith >= lat.headings) throw Error("state heading index out of range");
    if (!pb_.map->inside(pb_.start.pose(lat).position())) throw Error("start outside map");
    if (!pb_.map->inside(pb_.goal.pose(lat).position())) throw Error("goal outside map");
    start_cov_ = make_psd(pb_.start_covariance, "start covariance");

    const auto t0 = std::chrono::steady_clock::now();
    goal_blocked_ = pb_.footprint->collides(pb_.goal.pose(lat), *pb_.map);
    std::optional<H2dmrGrid> grid;
    if (cfg_.heuristic.use_h2dmr && !goal_blocked_)
      grid = initialize_h2dmr(pb_.start.pose(lat).position(), pb_.goal.pose(lat).position(), *pb_.map,
                              pb_.primitives->f_plus(), pb_.footprint->inscribed_radius());
    if (cfg_.heuristic.use_fsh && !fsh)
      fsh = build_fsh(*pb_.primitives, cfg_.heuristic.fsh_radius, pb_.any_goal_heading ? -1 : pb_.goal.ith);
    if (!cfg_.heuristic.use_fsh) fsh.reset();
    heuristic_ = Heuristic(lat, pb_.primitives->model().v_max, pb_.goal, pb_.any_goal_heading, std::move(grid),
                           std::move(fsh), cfg_.heuristic);
    heuristic_ms_ = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    schedules_.reserve(pb_.primitives->size());
    for (const MotionPrimitive& p : pb_.primitives->primitives())
      schedules_.push_back(compute_schedule(p, pb_.primitives->model(), cfg_.weights));
  }

  const Heuristic& heuristic() const { return heuristic_; }
  const PlanningProblem& problem() const { return pb_; }
  const PlannerConfig& config() const { return cfg_; }
  double heuristic_ms() const { return heuristic_ms_; }
  /// Distinct edge evaluations performed over the planner's lifetime.
  std::size_t unique_evaluations() const { return edge_cache_.size(); }

  Belief start_belief() const {
    Belief b;
    const Pose p = pb_.start.pose(pb_.primitives->lattice());
    b.mean = StateVec(p.x, p.y, p.theta);
    b.estimation = start_cov_;
    return b;
  }

  /// Whether the nominal motion keeps the real footprint clear of obstacles.
  bool nominal_free(const LatticeState& s, int prim_id) {
    const std::uint64_t key = (s.key() * 1000003ULL) ^ static_cast<std::uint64_t>(prim_id);
    auto it = nominal_cache_.find(key);
    if (it != nominal_cache_.end() && it->second.first == s && it->second.second.first == prim_id)
      return it->second.second.second;
    const MotionPrimitive& p = pb_.primitives->primitive(prim_id);
    const Pose base = s.pose(pb_.primitives->lattice());
    bool free = true;
    for (const Pose& q : p.poses) {
      if (pb_.footprint->collides({base.x + q.x, base.y + q.y, q.theta}, *pb_.map)) {
        free = false;
        break;
      }
    }
    nominal_cache_[key] = {s, {prim_id, free}};
    return free;
  }

  /// Edge cost and end belief of executing a primitive from a state with a belief.
  std::pair<PathCost, Belief> evaluate(const LatticeState& s, const Belief& b, int prim_id) {
    ++episode_evaluations_;
    EdgeKey key = make_key(s, b, prim_id);
    auto it = edge_cache_.find(key);
    if (it != edge_cache_.end()) return it->second;
    const MotionPrimitive& p = pb_.primitives->primitive(prim_id);
    const Pose base = s.pose(pb_.primitives->lattice());
    const BeliefTrajectory traj =
        propagate(b, p, Vec2(base.x, base.y), schedules_[static_cast<std::size_t>(prim_id)], pb_.noise);
    const PathCost cost = edge_cost(traj, p, *pb_.footprint, *pb_.map, cfg_.lambdas);
    auto res = std::make_pair(cost, traj.final());
    edge_cache_.emplace(std::move(key), res);
    return res;
  }

  /// Successor edges of a state: with graduated fidelity, one member per
  /// group (the longest that is both coarse-cell compatible and collision
  /// free, else the shortest); without it, every member. Groups whose longest
  /// member could reach the goal keep every member so the goal stays reachable.
  std::vector<Successor> successors(const LatticeState& s, const Belief& b) {
    const PrimitiveSet& prims = *pb_.primitives;
    const Lattice& lat = prims.lattice();
    std::vector<Successor> out;
    const Vec2 xa = s.pose(lat).position();
    const double sa = pb_.map->cell_at(xa).size;
    const Vec2 xg = pb_.goal.pose(lat).position();
    for (int gid : prims.groups_starting_at(s.ith)) {
      const PrimitiveGroup& group = prims.groups()[static_cast<std::size_t>(gid)];
      if (group.key.v_i != s.iv || group.key.w_i != s.iw) continue;
      const std::size_t n = group.members.size();
      const bool reduce =
          cfg_.graduated_fidelity && (xg - xa).norm() > prims.primitive(group.members.front()).length;
      for (std::size_t i = 0; i < n; ++i) {
        const int pid = group.members[i];
        const MotionPrimitive& p = prims.primitive(pid);
        const LatticeState next = p.apply(s, lat);
        const bool last = !reduce || i + 1 == n;
        const Vec2 xb = next.pose(lat).position();
        if (!last) {
          if (!pb_.map->inside(xb)) continue;
          const double sb = pb_.map->cell_at(xb).size;
          if (sa + sb < (xb - xa).norm()) continue;
        }
        if (!nominal_free(s, pid)) continue;
        auto [cost, end] = evaluate(s, b, pid);
        if (!last && cost.c != 0.0) continue;
        if (std::isfinite(cost.c)) out.push_back({next, pid, cost, end});
        if (reduce) break;
      }
    }
    return out;
  }

  /// One weighted search with a fixed inflation factor.
  PlanResult search(double epsilon) {
    const auto t0 = std::chrono::steady_clock::now();
    episode_evaluations_ = 0;
    PlanResult res;
    res.start = pb_.start;
    res.goal = pb_.goal;
    res.stats.epsilon = epsilon;
    const Lattice& lat = pb_.primitives->lattice();

    if (!goal_blocked_ && !pb_.footprint->collides(pb_.start.pose(lat), *pb_.map)) run(epsilon, res);

    res.stats.evaluations = episode_evaluations_;
    res.stats.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return res;
  }

  /// Episodes from epsilon0 down to 1; the published cost never increases.
  AnytimeResult plan(const std::function<void(const PlanResult&)>& on_episode = {}) {
    AnytimeResult out;
    out.heuristic_ms = heuristic_ms_;
    double eps = cfg_.epsilon0;
    while (true) {
      PlanResult r = search(eps);
      PlanResult published = r;
      if (out.best.found && (!r.found || out.best.cost < r.cost)) {
        published = out.best;
        published.stats = r.stats;
      }
      out.best = published;
      out.episodes.push_back(published);
      if (on_episode) on_episode(published);
      if (eps <= 1.0) break;
      eps = next_epsilon(eps, cfg_.epsilon_factor);
    }
    return out;
  }

  /// Beliefs along a primitive sequence from the start, as the planner predicts them.
  std::vector<PathStep> replay(const std::vector<std::pair<LatticeState, int>>& edges) const {
    std::vector<PathStep> steps;
    Belief b = start_belief();
    const Lattice& lat = pb_.primitives->lattice();
    for (const auto& [from, pid] : edges) {
      const MotionPrimitive& p = pb_.primitives->primitive(pid);
      const Pose base = from.pose(lat);
      PathStep st;
      st.from = from;
      st.primitive = pid;
      st.beliefs = propagate(b, p, Vec2(base.x, base.y), schedules_[static_cast<std::size_t>(pid)], pb_.noise);
      st.edge = edge_cost(st.beliefs, p, *pb_.footprint, *pb_.map, cfg_.lambdas);
      b = st.beliefs.final();
      steps.push_back(std::move(st));
    }
    return steps;
  }

private:
  struct EdgeKey {
    std::uint64_t state = 0;
    int prim = -1;
    std::array<double, 12> cov{};
    bool operator==(const EdgeKey& o) const {
      return state == o.state && prim == o.prim && std::memcmp(cov.data(), o.cov.data(), sizeof(cov)) == 0;
    }
  };
  struct EdgeKeyHash {
    std::size_t operator()(const EdgeKey& k) const {
      std::uint64_t h = 1469598103934665603ULL;
      auto mix = [&](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 1099511628211ULL;
      };
      mix(&k.state, sizeof(k.state));
      mix(&k.prim, sizeof(k.prim));
      mix(k.cov.data(), sizeof(k.cov));
      return static_cast<std::size_t>(h);
    }
  };

  static EdgeKey make_key(const LatticeState& s, const Belief& b, int prim) {
    EdgeKey k;
    k.state = s.key();
    k.prim = prim;
    int n = 0;
    for (const StateMat* m : {&b.estimation, &b.deviation})
      for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) k.cov[static_cast<std::size_t>(n++)] = (*m)(i, j) + 0.0;
    return k;
  }

  struct Label {
    LatticeState state;
    Belief belief;
    PathCost g;
    int parent = -1;
    int prim = -1;
    bool alive = true;
  };

  struct OpenEntry {
    double c, f, u;
    std::uint64_t seq;
    int label;
    bool operator>(const OpenEntry& o) const { return std::tie(c, f, u, seq) > std::tie(o.c, o.f, o.u, o.seq); }
  };

  double h_of(const LatticeState& s) {
    auto it = h_cache_.find(s);
    if (it != h_cache_.end()) return it->second;
    const double h = heuristic_(s);
    h_cache_.emplace(s, h);
    return h;
  }

  void run(double epsilon, PlanResult& res) {
    std::vector<Label> labels;
    std::unordered_map<LatticeState, std::vector<int>, LatticeStateHash> frontier;
    std::priority_queue<OpenEntry, std::vector<OpenEntry>, std::greater<>> open;
    std::uint64_t seq = 0;

    auto push = [&](Label&& l) {
      const int id = static_cast<int>(labels.size());
      if (!pareto_insert(
              frontier[l.state], id, l.g, [&](int o) -> const PathCost& { return labels[static_cast<std::size_t>(o)].g; },
              [&](int o) { labels[static_cast<std::size_t>(o)].alive = false; }))
        return;
      const double f = l.g.t + epsilon * h_of(l.state);
      open.push({l.g.c, f, l.g.u, seq++, id});
      labels.push_back(std::move(l));
      ++res.stats.insertions;
    };

    Label start;
    start.state = pb_.start;
    start.belief = start_belief();
    start.g = {0.0, 0.0, uncertainty_trace(start.belief.sigma())};
    push(std::move(start));

    int incumbent = -1;
    while (!open.empty()) {
      const OpenEntry top = open.top();
      if (incumbent >= 0) {
        const PathCost& best = labels[static_cast<std::size_t>(incumbent)].g;
        if (std::tie(top.c, top.f) > std::tie(best.c, best.t)) break;
      }
      open.pop();
      if (!labels[static_cast<std::size_t>(top.label)].alive) continue;
      const Label cur = labels[static_cast<std::size_t>(top.label)];
      if (heuristic_.is_goal(cur.state)) {
        if (incumbent < 0 || cur.g < labels[static_cast<std::size_t>(incumbent)].g) incumbent = top.label;
        continue;
      }
      if (cfg_.max_iterations != 0 && res.stats.iterations >= cfg_.max_iterations) break;
      ++res.stats.iterations;
      for (Successor& s : successors(cur.state, cur.belief)) {
        ++res.stats.emitted;
        Label next;
        next.state = s.state;
        next.belief = s.belief;
        next.g = {cur.g.c + s.edge.c, cur.g.t + s.edge.t, s.edge.u};
        next.parent = top.label;
        next.prim = s.primitive;
        push(std::move(next));
      }
    }
    if (incumbent < 0) return;

    std::vector<std::pair<LatticeState, int>> edges;
    for (int id = incumbent; labels[static_cast<std::size_t>(id)].parent >= 0;
         id = labels[static_cast<std::size_t>(id)].parent) {
      const Label& l = labels[static_cast<std::size_t>(id)];
      edges.emplace_back(labels[static_cast<std::size_t>(l.parent)].state, l.prim);
    }
    std::reverse(edges.begin(), edges.end());
    res.found = true;
    res.cost = labels[static_cast<std::size_t>(incumbent)].g;
    res.steps = replay(edges);
  }

  PlanningProblem pb_;
  PlannerConfig cfg_;
  StateMat start_cov_ = StateMat::Zero();
  bool goal_blocked_ = false;
  Heuristic heuristic_;
  double heuristic_ms_ = 0.0;
  std::vector<LqgSchedule> schedules_;
  std::unordered_map<EdgeKey, std::pair<PathCost, Belief>, EdgeKeyHash> edge_cache_;
  std::unordered_map<std::uint64_t, std::pair<LatticeState, std::pair<int, bool>>> nominal_cache_;
  std::unordered_map<LatticeState, double, LatticeStateHash> h_cache_;
  std::size_t episode_evaluations_ = 0;
};

}  // namespace latplan
