#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unweave/cable_graph.hpp"
#include "unweave/errors.hpp"
#include "unweave/image.hpp"
#include "unweave/perception.hpp"
#include "unweave/planner.hpp"
#include "unweave/serialize.hpp"
#include "unweave/simworld.hpp"
#include "unweave/transition.hpp"

namespace unweave {

enum class EpisodeStatus { Success, Deadlock, PerceptionFailure, IterationBudgetExceeded };

inline std::string_view to_string(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::Success: return "success";
    case EpisodeStatus::Deadlock: return "deadlock";
    case EpisodeStatus::PerceptionFailure: return "perception_failure";
    case EpisodeStatus::IterationBudgetExceeded: return "iteration_budget_exceeded";
  }
  return "?";
}

// One perceive -> plan -> execute step. The last record of an episode has no
// action: it is the state on which the loop stopped.
struct IterationRecord {
  int iteration{0};
  std::optional<CableState> state;  // perceived; empty when perception failed
  int true_crossings{0};
  bool misclassified{false};
  std::optional<Primitive> primitive;
  std::optional<Action> action;
  std::optional<ActionGeometry> geometry;
  LiftHeight lift;
  int predicted_M{0};
  int realized_dM{0};
  double planning_seconds{0.0};
};

struct EpisodeLog {
  ScenarioSpec spec;
  EpisodeStatus status{EpisodeStatus::Success};
  std::string detail;  // failure reason, if any
  int actions{0};
  int budget{0};
  std::vector<IterationRecord> records;
  std::vector<World> worlds;  // world before each record, kept when requested
};

struct EpisodeOptions {
  PhysicsConfig physics{};
  PlannerConfig planner{};
  PerceptionConfig perception{};
  bool allow_redistribution{true};
  int budget{-1};                // <= 0: 3 x initial crossings + 5
  std::uint64_t physics_seed{0};
  bool keep_worlds{false};
};

inline int default_budget(int initial_crossings) { return 3 * initial_crossings + 5; }

// Perception differs from the truth but the state is still usable: a wrong
// crossing count or over/under assignment, or a node far from its cable.
inline bool misclassified(const CableState& perceived, const World& world, double tolerance_px) {
  const auto truth = world_crossings_px(world);
  if (perceived.crossings.size() != truth.size()) return true;
  for (const auto& [cid, rec] : perceived.crossings) {
    const WorldCrossing* best = nullptr;
    double best_d = tolerance_px;
    for (const auto& x : world.crossings) {
      const double d = distance(x.point / world.scale, rec.pos);
      if (d < best_d) {
        best_d = d;
        best = &x;
      }
    }
    if (best == nullptr || best->over != rec.over) return true;
    const int under = best->over == best->cable_a ? best->cable_b : best->cable_a;
    if (under != rec.under) return true;
  }
  for (const auto& g : perceived.graphs) {
    const WorldCable* c = world.find(g.cable_id);
    if (c == nullptr) return true;
    const auto px = world.polyline_px(*c);
    for (const auto& n : g.nodes)
      if (point_polyline_distance(n.pos, px) > tolerance_px) return true;
  }
  return false;
}

// Closed loop on a given world until perception reports no crossing, the
// planner deadlocks, perception fails, or the iteration budget runs out.
inline EpisodeLog run_episode(const World& initial, const EpisodeOptions& opt, const ScenarioSpec& spec = {}) {
  EpisodeLog log;
  log.spec = spec;
  World world = initial;
  const int initial_true = geometric_crossing_count(world);
  log.budget = opt.budget > 0 ? opt.budget : default_budget(initial_true);
  const PerceptionConfig pcfg = perception_config_for(world, opt.perception);

  for (int it = 0;; ++it) {
    IterationRecord rec;
    rec.iteration = it;
    rec.true_crossings = geometric_crossing_count(world);
    if (opt.keep_worlds) log.worlds.push_back(world);
    try {
      rec.state = build_state(render(world).image, pcfg);
    } catch (const Error& e) {
      log.status = EpisodeStatus::PerceptionFailure;
      log.detail = e.what();
      log.records.push_back(std::move(rec));
      break;
    }
    rec.misclassified = misclassified(*rec.state, world, pcfg.window_width / 2.0);
    if (count_crossings(*rec.state) == 0) {
      log.status = rec.true_crossings == 0 ? EpisodeStatus::Success : EpisodeStatus::PerceptionFailure;
      if (rec.true_crossings != 0) log.detail = "crossings left undetected";
      log.records.push_back(std::move(rec));
      break;
    }
    if (it >= log.budget) {
      log.status = EpisodeStatus::IterationBudgetExceeded;
      log.records.push_back(std::move(rec));
      break;
    }
    PlanStep step;
    try {
      step = plan(*rec.state, opt.planner, opt.allow_redistribution);
    } catch (const Error& e) {
      log.status = EpisodeStatus::Deadlock;
      log.detail = e.what();
      log.records.push_back(std::move(rec));
      break;
    }
    rec.planning_seconds = step.seconds;
    rec.primitive = step.primitive;
    const PlanResult& r = *step.result;
    rec.action = r.action;
    rec.geometry = r.geometry;
    rec.lift = r.lift;
    rec.predicted_M = r.M;
    world = execute(world, r.geometry, opt.physics, opt.physics_seed * 1000003ULL + static_cast<std::uint64_t>(it));
    rec.realized_dM = rec.true_crossings - geometric_crossing_count(world);
    log.records.push_back(std::move(rec));
    ++log.actions;
  }
  return log;
}

inline EpisodeLog run_episode(const ScenarioSpec& spec, const EpisodeOptions& opt) {
  EpisodeOptions o = opt;
  o.physics_seed = spec.seed;
  return run_episode(generate_world(spec), o, spec);
}

struct GridEntry {
  int n_cables{2};
  int n_crossings{2};
};

inline std::vector<GridEntry> standard_grid() { return {{2, 2}, {2, 3}, {3, 3}, {3, 4}, {3, 5}}; }

struct ReportRow {
  int n_cables{0};
  int n_crossings{0};
  int trials{0};
  double success_rate{0.0};          // %
  double mean_planning_time{0.0};    // s per action
  double perception_failure_rate{0.0};  // % of episodes
  double misclassification_rate{0.0};   // % of perceived frames
  int actions{0};
  std::vector<EpisodeStatus> outcomes;  // per trial
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  bool redistribution{true};
};

struct ExperimentOptions {
  int trials{10};
  std::uint64_t base_seed{0};
  bool allow_redistribution{true};
  std::optional<PhysicsConfig> physics;  // default: the scenario's stiffness preset
  Stiffness stiffness{Stiffness::Shoelace};
  PlannerConfig planner{};
};

inline ReportRow summarize(const GridEntry& cfg, const std::vector<EpisodeLog>& logs) {
  ReportRow row;
  row.n_cables = cfg.n_cables;
  row.n_crossings = cfg.n_crossings;
  row.trials = static_cast<int>(logs.size());
  int success = 0, perception = 0, frames = 0, wrong = 0;
  double planning = 0.0;
  for (const auto& log : logs) {
    row.outcomes.push_back(log.status);
    if (log.status == EpisodeStatus::Success) ++success;
    if (log.status == EpisodeStatus::PerceptionFailure) ++perception;
    for (const auto& r : log.records) {
      if (r.state) {
        ++frames;
        if (r.misclassified) ++wrong;
      }
      if (r.action) {
        planning += r.planning_seconds;
        ++row.actions;
      }
    }
  }
  const double n = std::max(1, row.trials);
  row.success_rate = 100.0 * success / n;
  row.perception_failure_rate = 100.0 * perception / n;
  row.misclassification_rate = frames > 0 ? 100.0 * wrong / frames : 0.0;
  row.mean_planning_time = row.actions > 0 ? planning / row.actions : 0.0;
  return row;
}

// Trial t of every configuration uses seed base_seed + t, so runs with and
// without redistribution see the same worlds and the same physics noise.
inline ExperimentReport run_experiment(const std::vector<GridEntry>& grid, const ExperimentOptions& opt) {
  if (grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty grid");
  if (opt.trials <= 0) throw Error(ErrorKind::InvalidArgument, "trials must be positive");
  ExperimentReport report;
  report.redistribution = opt.allow_redistribution;
  for (const auto& g : grid) {
    std::vector<EpisodeLog> logs;
    for (int t = 0; t < opt.trials; ++t) {
      ScenarioSpec spec{g.n_cables, g.n_crossings, opt.base_seed + static_cast<std::uint64_t>(t)};
      spec.stiffness = opt.stiffness;
      EpisodeOptions eo;
      eo.physics = opt.physics.value_or(physics_preset(opt.stiffness));
      eo.planner = opt.planner;
      eo.allow_redistribution = opt.allow_redistribution;
      logs.push_back(run_episode(spec, eo));
    }
    report.rows.push_back(summarize(g, logs));
  }
  return report;
}

inline std::string report_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "n_cables,n_crossings,trials,avg_planning_time_s,success_rate_pct,perception_failure_rate_pct,"
         "minor_misclassification_rate_pct\n";
  out << std::fixed;
  for (const auto& row : r.rows)
    out << row.n_cables << ',' << row.n_crossings << ',' << row.trials << ',' << std::setprecision(3)
        << row.mean_planning_time << ',' << std::setprecision(1) << row.success_rate << ','
        << row.perception_failure_rate << ',' << row.misclassification_rate << '\n';
  return out.str();
}

inline std::string report_table(const ExperimentReport& r) {
  std::ostringstream out;
  out << (r.redistribution ? "full method" : "elimination primitive only") << '\n';
  out << "cables  crossings  trials  plan time/action (s)  success (%)  perception fail (%)  misclass (%)\n";
  out << std::fixed;
  for (const auto& row : r.rows)
    out << std::setw(6) << row.n_cables << std::setw(11) << row.n_crossings << std::setw(8) << row.trials
        << std::setw(22) << std::setprecision(3) << row.mean_planning_time << std::setw(13) << std::setprecision(1)
        << row.success_rate << std::setw(21) << row.perception_failure_rate << std::setw(14)
        << row.misclassification_rate << '\n';
  return out.str();
}

inline nlohmann::json action_to_json(const IterationRecord& r) {
  if (!r.action || !r.geometry) return nullptr;
  const auto& g = *r.geometry;
  return {{"primitive", std::string(to_string(*r.primitive))},
          {"cable_id", r.action->cable_id},
          {"grasp_node_id", r.action->grasp_node_id},
          {"theta", r.action->theta},
          {"pivot", {g.pivot.x, g.pivot.y}},
          {"grasp", {g.grasp.x, g.grasp.y}},
          {"place", {g.place.x, g.place.y}},
          {"lift_height_m", r.lift.h},
          {"taut", r.lift.taut},
          {"tail_bent", g.tail_bent}};
}

inline nlohmann::json episode_to_json(const EpisodeLog& log) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : log.records) {
    records.push_back({{"iteration", r.iteration},
                       {"state", r.state ? state_to_json(*r.state) : nlohmann::json(nullptr)},
                       {"true_crossings", r.true_crossings},
                       {"misclassified", r.misclassified},
                       {"action", action_to_json(r)},
                       {"predicted_M", r.predicted_M},
                       {"realized_dM", r.realized_dM},
                       {"planning_time_s", r.planning_seconds}});
  }
  return {{"spec",
           {{"n_cables", log.spec.n_cables},
            {"n_crossings", log.spec.n_crossings},
            {"seed", log.spec.seed},
            {"stiffness", std::string(to_string(log.spec.stiffness))}}},
          {"status", std::string(to_string(log.status))},
          {"detail", log.detail},
          {"actions", log.actions},
          {"budget", log.budget},
          {"records", records}};
}

// Overlay colors for node kinds.
inline Rgb node_color(NodeKind k) {
  switch (k) {
    case NodeKind::Endpoint: return {0, 0, 0};
    case NodeKind::Regular: return {255, 255, 255};
    case NodeKind::OverCrossing: return {255, 0, 255};
    case NodeKind::UnderCrossing: return {0, 200, 200};
  }
  return {};
}

inline void draw_state(Image& img, const CableState& state) {
  for (const auto& g : state.graphs) {
    const auto pts = g.polyline();
    draw_polyline(img, pts, 1.0, {60, 60, 60});
    for (const auto& n : g.nodes) {
      fill_disk(img, n.pos, 3.5, {40, 40, 40});
      fill_disk(img, n.pos, 2.5, node_color(n.kind));
    }
  }
}

inline void draw_action(Image& img, const ActionGeometry& g) {
  draw_arrow(img, g.grasp, g.place, 2.0, {20, 20, 20});
  fill_disk(img, g.pivot, 5.0, {255, 140, 0});   // c
  fill_disk(img, g.grasp, 5.0, {0, 120, 255});   // g
  fill_disk(img, g.place, 5.0, {0, 200, 0});     // p
}

// One annotated frame per record (initial state and the state after each
// action); requires the log to have kept its worlds.
inline std::vector<Image> render_episode(const EpisodeLog& log) {
  std::vector<Image> frames;
  for (std::size_t i = 0; i < log.records.size() && i < log.worlds.size(); ++i) {
    Image img = render(log.worlds[i]).image;
    const auto& r = log.records[i];
    if (r.state) draw_state(img, *r.state);
    if (r.geometry) draw_action(img, *r.geometry);
    frames.push_back(std::move(img));
  }
  return frames;
}

// Per-grasp-node best reward over theta for the given primitive, painted as a
// heat dot at each node (low: blue, high: red; invalid nodes grey).
inline Image cost_landscape(const Image& base, const CableState& state, const PlannerConfig& cfg, Primitive primitive) {
  Image img = base;
  const PlanningContext ctx(state, cfg);
  const auto subs = enumerate_subspaces(ctx);
  struct Heat {
    Vec2 pos;
    double best;
  };
  std::vector<Heat> heat;
  for (std::size_t slot = 0; slot < ctx.cable_count(); ++slot) {
    if (!ctx.pivot(slot)) continue;
    for (auto gi : ctx.grasps(slot)) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& s : subs) {
        if (s.cable_id != ctx.graph(slot).cable_id || s.grasp_index != gi || !in_domain(s, primitive)) continue;
        for (int k = s.sample_lo; k <= s.sample_hi; ++k) {
          const auto ev = ctx.evaluate(slot, gi, ctx.theta_at(k));
          best = std::max(best, combine_reward(ctx.terms(slot, ev), primitive, cfg));
        }
      }
      heat.push_back({ctx.graph(slot).nodes[gi].pos, best});
    }
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& h : heat)
    if (std::isfinite(h.best)) {
      lo = std::min(lo, h.best);
      hi = std::max(hi, h.best);
    }
  for (const auto& h : heat) {
    Rgb c{150, 150, 150};
    if (std::isfinite(h.best)) {
      const double t = hi > lo ? (h.best - lo) / (hi - lo) : 1.0;
      c = {static_cast<std::uint8_t>(255 * t), 0, static_cast<std::uint8_t>(255 * (1.0 - t))};
    }
    fill_disk(img, h.pos, 6.0, {0, 0, 0});
    fill_disk(img, h.pos, 5.0, c);
  }
  return img;
}

}  // namespace unweave
