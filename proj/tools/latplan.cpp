// Command-line front end: plan, simulate, primgen, bench-heuristic, map-info.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "latplan/io.hpp"
#include "latplan/planner.hpp"
#include "latplan/simulator.hpp"

namespace {

using namespace latplan;
namespace fs = std::filesystem;
using io::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNoPath = 2;

fs::path cache_dir() {
  if (const char* d = std::getenv("LATPLAN_CACHE_DIR"); d != nullptr && *d != '\0') return d;
  if (const char* x = std::getenv("XDG_CACHE_HOME"); x != nullptr && *x != '\0') return fs::path(x) / "latplan";
  if (const char* h = std::getenv("HOME"); h != nullptr && *h != '\0') return fs::path(h) / ".cache" / "latplan";
  return fs::temp_directory_path() / "latplan-cache";
}

struct Loaded {
  io::Scenario scenario;
  MultiResMap map;
  Footprint footprint;
  PrimitiveSet primitives;
};

Loaded load(const fs::path& scenario_path, double max_leaf_override) {
  Loaded l;
  l.scenario = io::load_scenario(scenario_path);
  const double leaf = max_leaf_override > 0.0 ? max_leaf_override : l.scenario.max_leaf_size;
  l.map = io::load_map(l.scenario.pgm, l.scenario.sidecar, leaf);
  l.footprint = io::footprint_from_json(l.scenario.footprint, scenario_path.string() + ": footprint");
  if (!l.scenario.primitives_file.empty()) {
    l.primitives = io::primitives_from_json(io::load_json(l.scenario.primitives_file),
                                            l.scenario.primitives_file.string());
  } else {
    const io::ControlSetSpec spec =
        io::control_set_spec_from_json(l.scenario.primitives_spec, scenario_path.string() + ": primitives");
    l.primitives = build_control_set(spec.model, spec.lattice, spec.lengths, spec.options);
  }
  return l;
}

PlanningProblem problem_of(const Loaded& l) {
  PlanningProblem pb;
  pb.map = &l.map;
  pb.footprint = &l.footprint;
  pb.primitives = &l.primitives;
  pb.noise = l.scenario.noise;
  pb.start = l.scenario.start;
  pb.start_covariance = l.scenario.start_covariance;
  pb.goal = l.scenario.goal;
  pb.any_goal_heading = l.scenario.any_goal_heading;
  return pb;
}

std::optional<FshTable> fsh_for(const Loaded& l, const PlannerConfig& cfg, bool use_cache) {
  if (!cfg.heuristic.use_fsh) return std::nullopt;
  const int goal_heading = l.scenario.any_goal_heading ? -1 : l.scenario.goal.ith;
  if (!use_cache) return build_fsh(l.primitives, cfg.heuristic.fsh_radius, goal_heading);
  return io::cached_fsh(l.primitives, cfg.heuristic.fsh_radius, goal_heading, cache_dir());
}

struct PlanFlags {
  std::string scenario;
  std::string out = "out";
  double epsilon0 = -1.0;
  double epsilon_factor = -1.0;
  std::vector<double> lambdas;
  bool no_gf = false, no_fsh = false, no_h2dmr = false, no_cache = false, no_plot = false;
  double max_leaf = 0.0;
  std::size_t max_iterations = 0;
};

void apply_flags(const PlanFlags& f, PlannerConfig& cfg) {
  if (f.epsilon0 > 0.0) cfg.epsilon0 = f.epsilon0;
  if (f.epsilon_factor >= 0.0) cfg.epsilon_factor = f.epsilon_factor;
  if (!f.lambdas.empty()) cfg.lambdas = f.lambdas;
  if (f.no_gf) cfg.graduated_fidelity = false;
  if (f.no_fsh) cfg.heuristic.use_fsh = false;
  if (f.no_h2dmr) cfg.heuristic.use_h2dmr = false;
  if (f.max_iterations > 0) cfg.max_iterations = f.max_iterations;
}

int cmd_plan(const PlanFlags& f) {
  const Loaded l = load(f.scenario, f.max_leaf);
  PlannerConfig cfg = l.scenario.planner;
  apply_flags(f, cfg);
  Planner planner(problem_of(l), cfg, fsh_for(l, cfg, !f.no_cache));
  std::ostringstream stats;
  const AnytimeResult res = planner.plan([&](const PlanResult& r) {
    const std::string line = io::stats_to_json(r).dump();
    stats << line << "\n";
    std::cout << line << std::endl;
  });
  const fs::path out(f.out);
  io::atomic_write(out / "stats.jsonl", stats.str());
  io::atomic_write(out / "path.json", io::path_to_json(res.best, l.primitives).dump(2) + "\n");
  if (!f.no_plot)
    io::atomic_write(out / "plot.svg",
                     io::plot_svg(l.map, l.footprint, l.scenario.noise, res.best, l.primitives));
  if (!res.best.found) {
    std::cerr << "no path found (" << res.best.stats.iterations << " states expanded)\n";
    return kExitNoPath;
  }
  return kExitOk;
}

/// Rebuilds a plan from a path file, re-predicting the beliefs along it.
PlanResult plan_from_file(const fs::path& file, const Loaded& l, const PlannerConfig& cfg) {
  const json j = io::load_json(file);
  if (j.value("format", "") != "latplan-path") throw Error(file.string() + ": not a path file");
  PlannerConfig light = cfg;
  light.heuristic.use_fsh = false;
  light.heuristic.use_h2dmr = false;
  Planner planner(problem_of(l), light);
  PlanResult r;
  r.found = j.at("found").get<bool>();
  r.start = io::state_from_json(j.at("start"), file.string());
  r.goal = io::state_from_json(j.at("goal"), file.string());
  std::vector<std::pair<LatticeState, int>> edges;
  for (const json& s : j.at("steps")) {
    const int pid = s.at("primitive").get<int>();
    if (pid < 0 || static_cast<std::size_t>(pid) >= l.primitives.size())
      throw Error(file.string() + ": primitive id out of range");
    edges.emplace_back(io::state_from_json(s.at("from"), file.string()), pid);
  }
  r.steps = planner.replay(edges);
  PathCost c{0.0, 0.0, uncertainty_trace(planner.start_belief().sigma())};
  for (const PathStep& st : r.steps) c = {c.c + st.edge.c, c.t + st.edge.t, st.edge.u};
  r.cost = c;
  return r;
}

struct SimFlags {
  std::string scenario;
  std::string path;
  std::string out = "traces";
  std::size_t runs = 1000;
  std::uint64_t seed = 1;
  bool no_cache = false;
};

int cmd_simulate(const SimFlags& f) {
  const Loaded l = load(f.scenario, 0.0);
  const PlannerConfig cfg = l.scenario.planner;
  PlanResult plan;
  if (!f.path.empty()) {
    plan = plan_from_file(f.path, l, cfg);
  } else {
    Planner planner(problem_of(l), cfg, fsh_for(l, cfg, !f.no_cache));
    plan = planner.plan().best;
  }
  if (!plan.found) {
    std::cerr << "no path to simulate\n";
    return kExitNoPath;
  }
  ExecutionSetup env{&l.primitives.model(), &l.scenario.noise, &l.footprint, &l.map, cfg.weights};
  std::vector<ExecutionTrace> traces;
  const BatchSummary s = batch(plan, l.primitives, env, f.runs, f.seed, &traces);
  std::ostringstream lines;
  for (const ExecutionTrace& t : traces) {
    json poses = json::array();
    for (const StateVec& x : t.poses) poses.push_back({x(0), x(1), x(2)});
    lines << json{{"seed", t.seed}, {"collided", t.collided}, {"collision_step", t.collision_step}, {"poses", poses}}
                 .dump()
          << "\n";
  }
  json summary{{"runs", s.runs},
               {"collisions", s.collisions},
               {"collision_rate", s.collision_rate ? json(*s.collision_rate) : json(nullptr)},
               {"mean_final_deviation", s.mean_final_deviation},
               {"base_seed", f.seed}};
  const fs::path out(f.out);
  io::atomic_write(out / "traces.jsonl", lines.str());
  io::atomic_write(out / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump() << std::endl;
  return kExitOk;
}

int cmd_primgen(const std::string& spec_file, const std::string& out) {
  const io::ControlSetSpec spec = io::control_set_spec_from_json(io::load_json(spec_file), spec_file);
  const PrimitiveSet set = build_control_set(spec.model, spec.lattice, spec.lengths, spec.options);
  io::atomic_write(out, io::primitives_to_json(set).dump(1) + "\n");
  std::cout << set.size() << " primitives, " << set.groups().size() << " groups\n";
  return kExitOk;
}

struct BenchFlags {
  std::string pgm, sidecar;
  double empty_size = 0.0;
  double resolution = 0.1;
  double f_plus = 0.5;
  std::vector<double> c_plus{0.8, 1.6, 3.2, 6.4, 12.8};
  std::vector<double> start, goal;
  double radius = 0.0;
};

int cmd_bench(const BenchFlags& f) {
  OccupancyGrid grid;
  double cell = f.resolution;
  Vec2 origin = Vec2::Zero();
  if (!f.pgm.empty()) {
    const io::MapSidecar sc = io::read_sidecar(f.sidecar);
    grid = io::read_pgm(f.pgm, sc.occupied_threshold, sc.dark_is_occupied);
    cell = sc.cell_size;
    origin = sc.origin;
  } else if (f.empty_size > 0.0) {
    const int n = static_cast<int>(std::ceil(f.empty_size / cell - 1e-9));
    grid = OccupancyGrid(n, n);
  } else {
    throw Error("bench-heuristic needs --map/--sidecar or --empty");
  }
  const double w = grid.width * cell, h = grid.height * cell;
  const Vec2 start = f.start.size() == 2 ? Vec2(f.start[0], f.start[1]) : origin + Vec2(0.1 * w, 0.1 * h);
  const Vec2 goal = f.goal.size() == 2 ? Vec2(f.goal[0], f.goal[1]) : origin + Vec2(0.9 * w, 0.9 * h);
  std::cout << "c_plus,h2d_iterations,h2dmr_iterations,iteration_gain_pct,h2d_ms,h2dmr_ms,time_gain_pct\n";
  for (double cp : f.c_plus) {
    const MultiResMap map = MultiResMap::build_from_grid(grid, cell, origin, cp);
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    const H2dmrGrid sr = initialize_h2d_baseline(start, goal, map, f.f_plus, f.radius);
    auto t1 = clock::now();
    const H2dmrGrid mr = initialize_h2dmr(start, goal, map, f.f_plus, f.radius);
    auto t2 = clock::now();
    const double sr_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    const double mr_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    const double it_gain = 100.0 * (1.0 - static_cast<double>(mr.stats().iterations) / sr.stats().iterations);
    const double t_gain = sr_ms > 0.0 ? 100.0 * (1.0 - mr_ms / sr_ms) : 0.0;
    std::cout << cp << "," << sr.stats().iterations << "," << mr.stats().iterations << "," << it_gain << "," << sr_ms
              << "," << mr_ms << "," << t_gain << "\n";
  }
  return kExitOk;
}

int cmd_map_info(const std::string& pgm, const std::string& sidecar, double max_leaf) {
  const MultiResMap map = io::load_map(pgm, sidecar, max_leaf);
  std::map<double, std::pair<int, int>> sizes;  // size -> (free, occupied)
  for (std::size_t i = 0; i < map.leaf_count(); ++i) {
    const MapCell c = map.cell(static_cast<int>(i));
    auto& e = sizes[c.size];
    (c.occupied ? e.second : e.first)++;
  }
  json hist = json::array();
  for (const auto& [size, n] : sizes) hist.push_back({{"size", size}, {"free", n.first}, {"occupied", n.second}});
  json info{{"resolution", map.resolution()},
            {"origin", {map.origin().x(), map.origin().y()}},
            {"cells_per_side", map.cells_per_side()},
            {"extent", map.extent()},
            {"max_leaf_size", map.max_leaf_size()},
            {"leaves", map.leaf_count()},
            {"leaf_sizes", hist}};
  std::cout << info.dump(2) << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice motion planning under motion and sensing uncertainty"};
  app.require_subcommand(1);

  PlanFlags pf;
  auto* plan = app.add_subcommand("plan", "Plan a path for a scenario");
  plan->add_option("scenario", pf.scenario, "Scenario JSON file")->required();
  plan->add_option("--out", pf.out, "Output directory");
  plan->add_option("--epsilon0", pf.epsilon0, "Initial heuristic inflation");
  plan->add_option("--epsilon-factor", pf.epsilon_factor, "Shrink factor for the inflation excess");
  plan->add_option("--lambda", pf.lambdas, "Sample distances in standard deviations");
  plan->add_option("--max-leaf", pf.max_leaf, "Maximum map leaf size (m)");
  plan->add_option("--max-iterations", pf.max_iterations, "Expansion budget per episode");
  plan->add_flag("--no-gf", pf.no_gf, "Disable graduated fidelity");
  plan->add_flag("--no-fsh", pf.no_fsh, "Disable the free-space heuristic");
  plan->add_flag("--no-h2dmr", pf.no_h2dmr, "Disable the multi-resolution grid heuristic");
  plan->add_flag("--no-cache", pf.no_cache, "Do not read or write the heuristic table cache");
  plan->add_flag("--no-plot", pf.no_plot, "Skip the SVG plot");

  SimFlags sf;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo execution of a planned path");
  sim->add_option("scenario", sf.scenario, "Scenario JSON file")->required();
  sim->add_option("--path", sf.path, "Path JSON from 'plan' (plans again when omitted)");
  sim->add_option("--runs", sf.runs, "Number of runs");
  sim->add_option("--seed", sf.seed, "Base seed; run i uses seed + i");
  sim->add_option("--out", sf.out, "Trace directory");
  sim->add_flag("--no-cache", sf.no_cache, "Do not read or write the heuristic table cache");

  std::string spec_file, prim_out = "primitives.json";
  auto* gen = app.add_subcommand("primgen", "Generate a primitive set");
  gen->add_option("spec", spec_file, "Control set spec JSON")->required();
  gen->add_option("--out", prim_out, "Output primitive file");

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench-heuristic", "Compare grid heuristic initializations (CSV)");
  bench->add_option("--map", bf.pgm, "PGM map");
  bench->add_option("--sidecar", bf.sidecar, "Map sidecar JSON");
  bench->add_option("--empty", bf.empty_size, "Use an empty square map of this side (m)");
  bench->add_option("--resolution", bf.resolution, "Cell size for --empty");
  bench->add_option("--f-plus", bf.f_plus, "Finest primitive length (m)");
  bench->add_option("--c-plus", bf.c_plus, "Maximum leaf sizes to sweep")->delimiter(',');
  bench->add_option("--start", bf.start, "Start x,y")->delimiter(',')->expected(2);
  bench->add_option("--goal", bf.goal, "Goal x,y")->delimiter(',')->expected(2);
  bench->add_option("--radius", bf.radius, "Disc radius for point validity");

  std::string info_pgm, info_sidecar;
  double info_leaf = 0.0;
  auto* info = app.add_subcommand("map-info", "Summarize a map's quadtree");
  info->add_option("pgm", info_pgm)->required();
  info->add_option("sidecar", info_sidecar)->required();
  info->add_option("--max-leaf", info_leaf, "Maximum leaf size (m)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*plan) return cmd_plan(pf);
    if (*sim) return cmd_simulate(sf);
    if (*gen) return cmd_primgen(spec_file, prim_out);
    if (*bench) return cmd_bench(bf);
    if (*info) return cmd_map_info(info_pgm, info_sidecar, info_leaf);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
