#pragma once

// Config documents (JSON). Every key is optional; missing keys keep their
// defaults. Angles are given in degrees in documents.

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unweave/errors.hpp"
#include "unweave/harness.hpp"
#include "unweave/perception.hpp"
#include "unweave/planner.hpp"
#include "unweave/simworld.hpp"

namespace unweave {

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedDocument, path.string() + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

namespace detail {

constexpr double deg = std::numbers::pi / 180.0;

template <class T>
void load(const nlohmann::json& doc, const char* key, T& field) {
  if (doc.contains(key)) field = doc.at(key).get<T>();
}

inline void load_deg(const nlohmann::json& doc, const char* key, double& radians) {
  if (doc.contains(key)) radians = doc.at(key).get<double>() * deg;
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedDocument, std::string(what) + ": " + e.what());
  }
}

}  // namespace detail

// {"window_width": 35, "step": 17, "fixed_endpoints": {"red": [20, 130], ...}}
// Only the listed colors are traced: "colors" if given, else the colors with a
// fixed endpoint, in palette order.
inline PerceptionConfig perception_config_from_json(const nlohmann::json& doc) {
  return detail::guarded("perception config", [&] {
    PerceptionConfig c;
    detail::load(doc, "window_width", c.window_width);
    detail::load(doc, "step", c.step);
    detail::load(doc, "min_component_px", c.min_component_px);
    detail::load(doc, "min_island_px", c.min_island_px);
    if (doc.contains("fixed_endpoints"))
      for (const auto& [color, xy] : doc.at("fixed_endpoints").items())
        c.fixed_endpoints[color] = Vec2{xy.at(0).get<double>(), xy.at(1).get<double>()};
    const auto palette = default_palette();
    std::vector<std::string> colors;
    if (doc.contains("colors")) {
      colors = doc.at("colors").get<std::vector<std::string>>();
    } else {
      for (const auto& pc : palette)
        if (c.fixed_endpoints.contains(pc.name)) colors.push_back(pc.name);
    }
    if (!colors.empty()) {
      c.palette.clear();
      for (const auto& name : colors) {
        const auto* pc = find_color(palette, name);
        if (pc == nullptr) throw Error(ErrorKind::InvalidArgument, "unknown color " + name);
        c.palette.push_back(*pc);
      }
    }
    return c;
  });
}

inline nlohmann::json perception_config_to_json(const PerceptionConfig& c) {
  nlohmann::json fixed = nlohmann::json::object();
  for (const auto& [color, p] : c.fixed_endpoints) fixed[color] = {p.x, p.y};
  nlohmann::json colors = nlohmann::json::array();
  for (const auto& pc : c.palette) colors.push_back(pc.name);
  return {{"window_width", c.window_width},
          {"colors", colors},
          {"step", c.step},
          {"min_component_px", c.min_component_px},
          {"min_island_px", c.min_island_px},
          {"fixed_endpoints", fixed}};
}

inline PlannerConfig planner_config_from_json(const nlohmann::json& doc) {
  return detail::guarded("planner config", [&] {
    PlannerConfig c;
    detail::load(doc, "d_f", c.d_f);
    detail::load_deg(doc, "theta_grid_deg", c.theta_grid);
    detail::load(doc, "w_dist", c.w_dist);
    detail::load(doc, "w_curv", c.w_curv);
    detail::load(doc, "w_cred", c.w_cred);
    detail::load(doc, "w_std", c.w_std);
    detail::load(doc, "w_elim", c.w_elim);
    detail::load(doc, "refine_iters", c.refine_iters);
    detail::load_deg(doc, "refine_step_deg", c.refine_step);
    detail::load(doc, "window_width_px", c.window_width_px);
    detail::load(doc, "image_height_px", c.image_height_px);
    detail::load(doc, "endpoint_clearance", c.endpoint_clearance);
    detail::load(doc, "k", c.transition.k);
    detail::load_deg(doc, "theta_min_deg", c.transition.theta_min);
    detail::load_deg(doc, "theta_max_deg", c.transition.theta_max);
    detail::load(doc, "meters_per_pixel", c.transition.meters_per_pixel);
    detail::load(doc, "resample_step_m", c.transition.resample_step_m);
    detail::load(doc, "merge_radius_px", c.transition.merge_radius_px);
    if (doc.contains("workspace")) {
      const auto& w = doc.at("workspace");
      c.workspace.box_m = Box{w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(), w.at(3).get<double>()};
    }
    if (c.theta_grid <= 0.0) throw Error(ErrorKind::InvalidArgument, "theta_grid_deg must be positive");
    if (c.transition.theta_min > c.transition.theta_max) throw Error(ErrorKind::InvalidArgument, "empty theta range");
    return c;
  });
}

inline nlohmann::json planner_config_to_json(const PlannerConfig& c) {
  const auto& b = c.workspace.box_m;
  return {{"d_f", c.d_f},
          {"theta_grid_deg", c.theta_grid / detail::deg},
          {"w_dist", c.w_dist},
          {"w_curv", c.w_curv},
          {"w_cred", c.w_cred},
          {"w_std", c.w_std},
          {"w_elim", c.w_elim},
          {"refine_iters", c.refine_iters},
          {"refine_step_deg", c.refine_step / detail::deg},
          {"window_width_px", c.window_width_px},
          {"image_height_px", c.image_height_px},
          {"endpoint_clearance", c.endpoint_clearance},
          {"k", c.transition.k},
          {"theta_min_deg", c.transition.theta_min / detail::deg},
          {"theta_max_deg", c.transition.theta_max / detail::deg},
          {"meters_per_pixel", c.transition.meters_per_pixel},
          {"resample_step_m", c.transition.resample_step_m},
          {"merge_radius_px", c.transition.merge_radius_px},
          {"workspace", {b.x_min, b.y_min, b.x_max, b.y_max}}};
}

// {"preset": "electric"} or explicit {"noise_sigma": .., "elasticity_bleed": ..};
// explicit values override the preset.
inline PhysicsConfig physics_config_from_json(const nlohmann::json& doc) {
  return detail::guarded("physics config", [&] {
    PhysicsConfig c{0.0, 0.0};
    if (doc.contains("preset")) c = physics_preset(stiffness_from_string(doc.at("preset").get<std::string>()));
    detail::load(doc, "noise_sigma", c.noise_sigma);
    detail::load(doc, "elasticity_bleed", c.elasticity_bleed);
    if (c.noise_sigma < 0.0) throw Error(ErrorKind::InvalidArgument, "noise_sigma must be >= 0");
    if (c.elasticity_bleed < 0.0 || c.elasticity_bleed > 1.0)
      throw Error(ErrorKind::InvalidArgument, "elasticity_bleed must lie in [0, 1]");
    return c;
  });
}

inline ScenarioSpec scenario_from_json(const nlohmann::json& doc) {
  return detail::guarded("scenario spec", [&] {
    ScenarioSpec s;
    detail::load(doc, "n_cables", s.n_cables);
    detail::load(doc, "n_crossings", s.n_crossings);
    detail::load(doc, "seed", s.seed);
    detail::load(doc, "length_min_m", s.length_min_m);
    detail::load(doc, "length_max_m", s.length_max_m);
    if (doc.contains("stiffness")) s.stiffness = stiffness_from_string(doc.at("stiffness").get<std::string>());
    if (s.n_cables < 1 || s.n_cables > static_cast<int>(default_palette().size()))
      throw Error(ErrorKind::InvalidArgument, "n_cables out of range");
    return s;
  });
}

// {"configurations": [[2,2],[2,3],...], "stiffness": "electric", "seed": 0}
// or a bare list of pairs.
struct GridDoc {
  std::vector<GridEntry> grid;
  Stiffness stiffness{Stiffness::Shoelace};
  std::uint64_t seed{0};
};

inline GridDoc grid_from_json(const nlohmann::json& doc) {
  return detail::guarded("grid", [&] {
    GridDoc g;
    const nlohmann::json* list = &doc;
    if (doc.is_object()) {
      list = &doc.at("configurations");
      if (doc.contains("stiffness")) g.stiffness = stiffness_from_string(doc.at("stiffness").get<std::string>());
      detail::load(doc, "seed", g.seed);
    }
    for (const auto& e : *list) g.grid.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    if (g.grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty grid");
    return g;
  });
}

}  // namespace unweave
