#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "unweave/unweave.hpp"

namespace fs = std::filesystem;
using namespace unweave;

namespace {

double degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

void print_plan(const CableState& state, const PlanStep& step, const PlannerConfig& cfg) {
  const auto& r = *step.result;
  const auto& g = r.geometry;
  std::printf("primitive      %s\n", std::string(to_string(step.primitive)).c_str());
  std::printf("cable          %d\n", r.action.cable_id);
  std::printf("grasp node     %d\n", r.action.grasp_node_id);
  std::printf("theta          %.3f deg\n", degrees(r.action.theta));
  std::printf("pivot c        (%.1f, %.1f) px\n", g.pivot.x, g.pivot.y);
  std::printf("grasp g        (%.1f, %.1f) px\n", g.grasp.x, g.grasp.y);
  std::printf("place p        (%.1f, %.1f) px\n", g.place.x, g.place.y);
  std::printf("lift height    %.4f m%s\n", r.lift.h, r.lift.taut ? " (taut)" : "");
  std::printf("tail           %s\n", g.tail_bent ? "bent" : "straight");
  std::printf("predicted M    %d (%zu -> %zu crossings)\n", r.M, count_crossings(state), count_crossings(r.predicted));
  std::printf("reward         %.4f\n", r.reward);
  std::printf("subspaces      %zu\n", step.subspaces.size());
  std::printf("planning time  %.3f s\n", step.seconds);
  (void)cfg;
}

void dump_predictions(const fs::path& dir, const CableState& state, const PlanStep& step, const PlannerConfig& cfg) {
  fs::create_directories(dir);
  write_text(dir / "chosen.json", serialize_state(step.result->predicted));
  int k = 0;
  for (const auto& s : step.subspaces) {
    const Action a{s.cable_id, s.grasp_node_id, s.midpoint()};
    const auto predicted = predict(state, a, cfg.transition);
    char name[96];
    std::snprintf(name, sizeof name, "sub%03d_cable%d_node%d_M%d.json", k++, s.cable_id, s.grasp_node_id, s.M);
    write_text(dir / name, serialize_state(predicted));
  }
}

int cmd_perceive(const fs::path& image, const fs::path& config, const std::string& out, const std::string& overlay) {
  const auto cfg = perception_config_from_json(read_json(config));
  const Image img = read_png(image);
  const CableState state = build_state(img, cfg);
  if (out.empty())
    std::cout << serialize_state(state) << '\n';
  else
    write_text(out, serialize_state(state) + "\n");
  if (!overlay.empty()) {
    Image o = img;
    draw_state(o, state);
    write_png(o, overlay);
  }
  std::fprintf(stderr, "%zu cables, %zu crossings\n", state.graphs.size(), count_crossings(state));
  return 0;
}

int cmd_plan(const fs::path& state_path, const fs::path& config, bool redistribution, const std::string& landscape,
             const std::string& background, const std::string& dump_dir) {
  const auto cfg = planner_config_from_json(read_json(config));
  std::ifstream in(state_path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + state_path.string());
  std::stringstream text;
  text << in.rdbuf();
  const CableState state = deserialize_state(text.str());
  if (count_crossings(state) == 0) {
    std::printf("primitive      done\n");
    return 0;
  }
  const PlanStep step = plan(state, cfg, redistribution);
  print_plan(state, step, cfg);
  if (!landscape.empty()) {
    const Image base = background.empty() ? Image(640, 480, Rgb{195, 195, 195}) : read_png(background);
    Image img = base;
    draw_state(img, state);
    img = cost_landscape(img, state, cfg, step.primitive);
    draw_action(img, step.result->geometry);
    write_png(img, landscape);
  }
  if (!dump_dir.empty()) dump_predictions(dump_dir, state, step, cfg);
  return 0;
}

int cmd_gen(const fs::path& spec_path, const fs::path& out, std::optional<std::uint64_t> seed) {
  ScenarioSpec spec = scenario_from_json(read_json(spec_path));
  if (seed) spec.seed = *seed;
  const World w = generate_world(spec);
  write_text(out, world_to_json(w).dump(2) + "\n");
  std::fprintf(stderr, "%zu cables, %d crossings\n", w.cables.size(), geometric_crossing_count(w));
  return 0;
}

int cmd_render(const fs::path& world_path, const fs::path& out, const std::string& perception_out) {
  const World w = world_from_json(read_json(world_path));
  const auto r = render(w);
  write_png(r.image, out);
  if (!perception_out.empty())
    write_text(perception_out, perception_config_to_json(perception_config_for(w, {})).dump(2) + "\n");
  return 0;
}

int cmd_run(const fs::path& spec_path, const fs::path& physics_path, const fs::path& planner_path, bool redistribution,
            const std::string& frames, std::optional<std::uint64_t> seed, const std::string& log_path, int budget) {
  ScenarioSpec spec = scenario_from_json(read_json(spec_path));
  if (seed) spec.seed = *seed;
  EpisodeOptions opt;
  opt.physics = physics_config_from_json(read_json(physics_path));
  opt.planner = planner_config_from_json(read_json(planner_path));
  opt.allow_redistribution = redistribution;
  opt.budget = budget;
  opt.keep_worlds = !frames.empty();
  const EpisodeLog log = run_episode(spec, opt);
  for (const auto& r : log.records) {
    std::printf("iter %2d  true %d  perceived %s", r.iteration, r.true_crossings,
                r.state ? std::to_string(count_crossings(*r.state)).c_str() : "-");
    if (r.action)
      std::printf("  %-14s cable %d node %d theta %7.2f  M %d  dM %d  %.3f s", std::string(to_string(*r.primitive)).c_str(),
                  r.action->cable_id, r.action->grasp_node_id, degrees(r.action->theta), r.predicted_M, r.realized_dM,
                  r.planning_seconds);
    std::printf("\n");
  }
  std::printf("status %s%s%s after %d actions (budget %d)\n", std::string(to_string(log.status)).c_str(),
              log.detail.empty() ? "" : ": ", log.detail.c_str(), log.actions, log.budget);
  if (!frames.empty()) {
    fs::create_directories(frames);
    const auto imgs = render_episode(log);
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%03zu.png", i);
      write_png(imgs[i], fs::path(frames) / name);
    }
  }
  if (!log_path.empty()) write_text(log_path, episode_to_json(log).dump(2) + "\n");
  return 0;
}

int cmd_experiment(const fs::path& grid_path, int trials, const fs::path& out, const std::string& physics_path,
                   const std::string& planner_path, bool redistribution, std::optional<std::uint64_t> seed) {
  const GridDoc grid = grid_from_json(read_json(grid_path));
  ExperimentOptions opt;
  opt.trials = trials;
  opt.base_seed = seed.value_or(grid.seed);
  opt.stiffness = grid.stiffness;
  opt.allow_redistribution = redistribution;
  if (!physics_path.empty()) opt.physics = physics_config_from_json(read_json(physics_path));
  if (!planner_path.empty()) opt.planner = planner_config_from_json(read_json(planner_path));
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = run_experiment(grid.grid, opt);
  write_text(out, report_csv(report));
  std::cout << report_table(report);
  std::fprintf(stderr, "%.1f s\n", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-cable unweaving: perception, planning and a simulated closed loop"};
  app.require_subcommand(1);

  std::string image, config, out, overlay;
  auto* perceive = app.add_subcommand("perceive", "trace cables in a PNG and print the cable state document");
  perceive->add_option("--image", image, "input PNG")->required()->check(CLI::ExistingFile);
  perceive->add_option("--config", config, "perception config (fixed endpoints per color)")->required()->check(CLI::ExistingFile);
  perceive->add_option("--out", out, "write the state here instead of stdout");
  perceive->add_option("--overlay", overlay, "annotated PNG with nodes colored by kind");

  std::string state_path, plan_config, landscape, background, dump_dir;
  bool plan_no_redis = false;
  auto* plan_cmd = app.add_subcommand("plan", "plan one action for a cable state document");
  plan_cmd->add_option("--state", state_path, "cable state document")->required()->check(CLI::ExistingFile);
  plan_cmd->add_option("--config", plan_config, "planner config")->required()->check(CLI::ExistingFile);
  plan_cmd->add_flag("--no-redistribution", plan_no_redis, "elimination primitive only");
  plan_cmd->add_option("--cost-landscape", landscape, "write per-node best reward as a PNG");
  plan_cmd->add_option("--image", background, "background image for the cost landscape");
  plan_cmd->add_option("--dump-predictions", dump_dir, "write predicted states per subspace into this directory");

  std::string spec_path, world_out;
  std::optional<std::uint64_t> seed;
  auto* gen = app.add_subcommand("gen", "generate a world from a scenario spec");
  gen->add_option("--spec", spec_path, "scenario spec")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", world_out, "world document")->required();
  gen->add_option("--seed", seed, "override the spec's seed");

  std::string world_path, frame_out, perception_out;
  auto* render_cmd = app.add_subcommand("render", "rasterize a world document");
  render_cmd->add_option("--world", world_path, "world document")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--out", frame_out, "output PNG")->required();
  render_cmd->add_option("--perception-config", perception_out, "also write a matching perception config");

  std::string physics_path, planner_path, frames, log_path;
  bool run_no_redis = false;
  int budget = -1;
  auto* run = app.add_subcommand("run", "run one closed-loop episode");
  run->add_option("--spec", spec_path, "scenario spec")->required()->check(CLI::ExistingFile);
  run->add_option("--physics", physics_path, "physics config")->required()->check(CLI::ExistingFile);
  run->add_option("--planner", planner_path, "planner config")->required()->check(CLI::ExistingFile);
  run->add_flag("--no-redistribution", run_no_redis, "elimination primitive only");
  run->add_option("--frames", frames, "write annotated frames into this directory");
  run->add_option("--seed", seed, "override the spec's seed");
  run->add_option("--log", log_path, "write the episode log document");
  run->add_option("--budget", budget, "iteration budget (default 3 x crossings + 5)");

  std::string grid_path, report_out, exp_physics, exp_planner;
  int trials = 10;
  bool exp_no_redis = false;
  auto* experiment = app.add_subcommand("experiment", "run a grid of configurations and write a CSV report");
  experiment->add_option("--grid", grid_path, "grid document")->required()->check(CLI::ExistingFile);
  experiment->add_option("--trials", trials, "trials per configuration")->check(CLI::PositiveNumber);
  experiment->add_option("--out", report_out, "CSV report")->required();
  experiment->add_option("--physics", exp_physics, "physics config (default: the grid's stiffness preset)")
      ->check(CLI::ExistingFile);
  experiment->add_option("--planner", exp_planner, "planner config")->check(CLI::ExistingFile);
  experiment->add_flag("--no-redistribution", exp_no_redis, "elimination primitive only");
  experiment->add_option("--seed", seed, "base seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*perceive) return cmd_perceive(image, config, out, overlay);
    if (*plan_cmd) return cmd_plan(state_path, plan_config, !plan_no_redis, landscape, background, dump_dir);
    if (*gen) return cmd_gen(spec_path, world_out, seed);
    if (*render_cmd) return cmd_render(world_path, frame_out, perception_out);
    if (*run) return cmd_run(spec_path, physics_path, planner_path, !run_no_redis, frames, seed, log_path, budget);
    if (*experiment)
      return cmd_experiment(grid_path, trials, report_out, exp_physics, exp_planner, !exp_no_redis, seed);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
