#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "unweave/cable_graph.hpp"
#include "unweave/crossings.hpp"
#include "unweave/errors.hpp"
#include "unweave/geometry.hpp"
#include "unweave/image.hpp"
#include "unweave/perception.hpp"
#include "unweave/planner.hpp"
#include "unweave/transition.hpp"

namespace unweave {

// Ground-truth cable: dense polyline in world meters, v_free first, v_fix last.
struct WorldCable {
  int cable_id{0};
  std::string color;
  Polyline polyline;
  double width_m{0.012};
};

// Over/under truth for one crossing of cables a < b.
struct WorldCrossing {
  int cable_a{0};
  int cable_b{0};
  Vec2 point{};  // meters
  int over{0};
};

struct World {
  std::vector<WorldCable> cables;  // sorted by cable_id
  std::vector<WorldCrossing> crossings;
  Workspace workspace{};
  double scale{1.0 / 500.0};  // meters per pixel
  int canvas_width{640};
  int canvas_height{480};

  [[nodiscard]] const WorldCable* find(int cable_id) const {
    for (const auto& c : cables)
      if (c.cable_id == cable_id) return &c;
    return nullptr;
  }
  [[nodiscard]] Polyline polyline_px(const WorldCable& c) const {
    Polyline out;
    out.reserve(c.polyline.size());
    for (auto p : c.polyline) out.push_back(p / scale);
    return out;
  }
};

enum class Stiffness { Electric, Shoelace };

struct ScenarioSpec {
  int n_cables{2};
  int n_crossings{2};
  std::uint64_t seed{0};
  double length_min_m{0.88};
  double length_max_m{1.12};
  Stiffness stiffness{Stiffness::Shoelace};
};

struct PhysicsConfig {
  double noise_sigma{0.0};       // meters, per node
  double elasticity_bleed{0.0};  // fraction of the pre-action tail shape kept
};

inline PhysicsConfig physics_preset(Stiffness s) {
  if (s == Stiffness::Electric) return {0.0015, 0.15};
  return {0.001, 0.05};
}

struct GeneratorConfig {
  double knot_spacing_px{60.0};
  double heading_sigma{0.6};
  double initial_heading_max{1.0};
  double heading_clamp{75.0 * std::numbers::pi / 180.0};
  double wall_margin_px{60.0};
  double wall_push{1.0};
  double vertex_step_px{3.0};
  double width_m{0.012};
  double window_width_px{35.0};
  double crossing_margin_px{6.0};   // on top of sqrt(2) d_w
  double crossing_end_margin_px{30.0};
  double min_crossing_angle{30.0 * std::numbers::pi / 180.0};
  double min_gap_px{12.0};           // between cables away from crossings
  double crossing_zone_px{30.0};     // radius around a crossing exempt from min_gap
  double free_end_clearance_px{25.0};
  double anchor_spacing_px{0.0};    // fixed endpoints this far apart around the edge center; 0 spreads them over the edge
  int attempt_budget{50000};
};

inline std::vector<CablePolyline> as_cable_polylines(const std::vector<WorldCable>& cables,
                                                     const std::vector<Polyline>& px) {
  std::vector<CablePolyline> out;
  for (std::size_t i = 0; i < cables.size(); ++i) out.push_back({cables[i].cable_id, px[i]});
  return out;
}

// Geometric crossings of the world, in pixels.
inline std::vector<GeometricCrossing> world_crossings_px(const World& w, double merge_radius_px = 17.5) {
  std::vector<Polyline> px;
  for (const auto& c : w.cables) px.push_back(w.polyline_px(c));
  return geometric_crossings(as_cable_polylines(w.cables, px), merge_radius_px);
}

inline std::vector<Issue> validate_world(const World& w, double window_width_px = 35.0) {
  std::vector<Issue> issues;
  auto add = [&](std::string code, std::string detail) { issues.push_back({std::move(code), std::move(detail)}); };
  for (const auto& c : w.cables) {
    if (c.polyline.size() < 2) {
      add("short cable", c.color);
      continue;
    }
    if (std::abs(c.polyline.back().x - w.workspace.fixed_edge_x()) > 1e-9) add("fixed endpoint off edge", c.color);
    const auto px = w.polyline_px(c);
    for (std::size_t i = 0; i + 1 < px.size(); ++i)
      for (std::size_t j = i + 2; j + 1 < px.size(); ++j) {
        try {
          if (intersect_segments(px[i], px[i + 1], px[j], px[j + 1])) add("self intersection", c.color);
        } catch (const DegenerateOverlapError&) {
          add("self intersection", c.color);
        }
      }
  }
  const auto hits = world_crossings_px(w);
  for (std::size_t i = 0; i < hits.size(); ++i)
    for (std::size_t j = i + 1; j < hits.size(); ++j)
      if (distance(hits[i].point, hits[j].point) < std::numbers::sqrt2 * window_width_px)
        add("crossing spacing", std::to_string(i) + "," + std::to_string(j));
  if (hits.size() != w.crossings.size()) add("registry mismatch", "geometric vs registered count");
  for (const auto& h : hits) {
    const bool found = std::any_of(w.crossings.begin(), w.crossings.end(), [&](const WorldCrossing& x) {
      return x.cable_a == h.cable_a && x.cable_b == h.cable_b && distance(x.point / w.scale, h.point) < 1e-6;
    });
    if (!found) add("unregistered crossing", std::to_string(h.cable_a) + "/" + std::to_string(h.cable_b));
  }
  return issues;
}

namespace detail {

inline double catmull_rom(double p0, double p1, double p2, double p3, double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  return 0.5 * (2.0 * p1 + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3);
}

// Grows one cable from `start` rightwards with a smoothed heading random walk.
// Heading knots are drawn lazily; each new knot is nudged away from the
// top/bottom of `bounds` based on where the cable would be two knots ahead.
// Returned fix -> free.
inline Polyline grow_cable(Vec2 start, double length_px, const Box& bounds, const GeneratorConfig& cfg,
                           std::mt19937_64& rng) {
  std::normal_distribution<double> turn(0.0, cfg.heading_sigma);
  std::uniform_real_distribution<double> initial(-cfg.initial_heading_max, cfg.initial_heading_max);
  std::vector<double> heading{initial(rng)};
  Vec2 p = start;
  auto extend_to = [&](std::size_t n) {
    while (heading.size() < n) {
      const double h = heading.back();
      const Vec2 ahead = p + Vec2{std::cos(h), -std::sin(h)} * (2.0 * cfg.knot_spacing_px);
      double push = 0.0;
      if (ahead.y < bounds.y_min + cfg.wall_margin_px)
        push = -cfg.wall_push * (bounds.y_min + cfg.wall_margin_px - ahead.y) / cfg.wall_margin_px;
      if (ahead.y > bounds.y_max - cfg.wall_margin_px)
        push = cfg.wall_push * (ahead.y - bounds.y_max + cfg.wall_margin_px) / cfg.wall_margin_px;
      heading.push_back(std::clamp(h + turn(rng) + push, -cfg.heading_clamp, cfg.heading_clamp));
    }
  };
  Polyline pts{start};
  double s = 0.0;
  while (s < length_px - 1e-9) {
    const double ds = std::min(cfg.vertex_step_px, length_px - s);
    const double u = (s + 0.5 * ds) / cfg.knot_spacing_px;
    const auto k = static_cast<std::size_t>(u);
    extend_to(k + 3);
    const double t = u - static_cast<double>(k);
    const double h0 = heading[k == 0 ? 0 : k - 1];
    const double h = std::clamp(catmull_rom(h0, heading[k], heading[k + 1], heading[k + 2], t), -cfg.heading_clamp,
                                cfg.heading_clamp);
    p += Vec2{std::cos(h), -std::sin(h)} * ds;
    pts.push_back(p);
    s += ds;
  }
  return pts;
}

// Checks every acceptance rule except the crossing count.
inline bool acceptable(const std::vector<Polyline>& px, const std::vector<GeometricCrossing>& hits, const Box& ws_px,
                       const GeneratorConfig& cfg) {
  for (const auto& c : px)
    for (auto p : c)
      if (!ws_px.contains(p)) return false;
  const double spacing = std::numbers::sqrt2 * cfg.window_width_px + cfg.crossing_margin_px;
  for (std::size_t i = 0; i < hits.size(); ++i)
    for (std::size_t j = i + 1; j < hits.size(); ++j)
      if (distance(hits[i].point, hits[j].point) < spacing) return false;
  for (const auto& h : hits) {
    const auto& a = px[static_cast<std::size_t>(h.cable_a)];
    const auto& b = px[static_cast<std::size_t>(h.cable_b)];
    const double la = polyline_length(a);
    const double lb = polyline_length(b);
    const double m = cfg.crossing_end_margin_px;
    if (h.arc_a < m || h.arc_a > la - m || h.arc_b < m || h.arc_b > lb - m) return false;
    const Vec2 da = a[h.segment_a + 1] - a[h.segment_a];
    const Vec2 db = b[h.segment_b + 1] - b[h.segment_b];
    const double ang = angle_between(da, db);
    if (std::min(ang, std::numbers::pi - ang) < cfg.min_crossing_angle) return false;
  }
  for (std::size_t i = 0; i < px.size(); ++i)
    for (std::size_t j = 0; j < px.size(); ++j) {
      if (i == j) continue;
      if (point_polyline_distance(px[i].front(), px[j]) < cfg.free_end_clearance_px) return false;
      for (std::size_t v = 0; v < px[i].size(); v += 2) {
        const Vec2 q = px[i][v];
        const bool near_crossing = std::any_of(hits.begin(), hits.end(), [&](const GeometricCrossing& h) {
          const bool pair = (h.cable_a == static_cast<int>(std::min(i, j)) && h.cable_b == static_cast<int>(std::max(i, j)));
          return pair && distance(q, h.point) < cfg.crossing_zone_px;
        });
        if (!near_crossing && point_polyline_distance(q, px[j]) < cfg.min_gap_px) return false;
      }
    }
  return true;
}

}  // namespace detail

inline std::vector<std::string> cable_colors(int n) {
  const auto palette = default_palette();
  if (n < 1 || n > static_cast<int>(palette.size()))
    throw Error(ErrorKind::InvalidArgument, "cable count must be 1.." + std::to_string(palette.size()));
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(palette[static_cast<std::size_t>(i)].name);
  return out;
}

// Rejection sampler: fixed endpoints evenly on the left edge, each cable a
// smoothed random walk; accepted when the crossing count matches and every
// spacing rule holds. Deterministic per seed.
inline World generate_world(const ScenarioSpec& spec, const GeneratorConfig& cfg = {}) {
  if (spec.n_crossings < 0) throw Error(ErrorKind::InvalidArgument, "negative crossing count");
  if (!(spec.length_min_m > 0.0 && spec.length_max_m >= spec.length_min_m))
    throw Error(ErrorKind::InvalidArgument, "bad cable length range");
  const auto colors = cable_colors(spec.n_cables);
  World w;
  const Box ws_px{w.workspace.box_m.x_min / w.scale, w.workspace.box_m.y_min / w.scale,
                  w.workspace.box_m.x_max / w.scale, w.workspace.box_m.y_max / w.scale};
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> length(spec.length_min_m / w.scale, spec.length_max_m / w.scale);
  std::bernoulli_distribution coin(0.5);
  std::vector<WorldCable> cables(static_cast<std::size_t>(spec.n_cables));
  for (int i = 0; i < spec.n_cables; ++i)
    cables[static_cast<std::size_t>(i)] = WorldCable{i, colors[static_cast<std::size_t>(i)], {}, cfg.width_m};

  for (int attempt = 0; attempt < cfg.attempt_budget; ++attempt) {
    std::vector<Polyline> px;
    for (int i = 0; i < spec.n_cables; ++i) {
      const double y = cfg.anchor_spacing_px > 0.0
                           ? ws_px.y_min + ws_px.height() / 2.0 + cfg.anchor_spacing_px * (i - (spec.n_cables - 1) / 2.0)
                           : ws_px.y_min + ws_px.height() * (i + 1) / (spec.n_cables + 1);
      auto pts = detail::grow_cable({ws_px.x_min, y}, length(rng), ws_px, cfg, rng);
      std::reverse(pts.begin(), pts.end());
      px.push_back(std::move(pts));
    }
    const auto hits = geometric_crossings(as_cable_polylines(cables, px), cfg.window_width_px / 2.0);
    if (static_cast<int>(hits.size()) != spec.n_crossings) continue;
    if (!detail::acceptable(px, hits, ws_px, cfg)) continue;
    for (std::size_t i = 0; i < cables.size(); ++i) {
      cables[i].polyline.clear();
      for (auto p : px[i]) cables[i].polyline.push_back(p * w.scale);
      cables[i].polyline.back().x = w.workspace.fixed_edge_x();
    }
    w.cables = cables;
    for (const auto& h : hits)
      w.crossings.push_back({h.cable_a, h.cable_b, h.point * w.scale, coin(rng) ? h.cable_a : h.cable_b});
    return w;
  }
  throw Error(ErrorKind::GenerationBudgetExceeded,
              std::to_string(spec.n_cables) + " cables / " + std::to_string(spec.n_crossings) + " crossings");
}

struct Rendering {
  Image image;
  std::vector<int> painted;  // per cable, in world cable order
};

// Strokes every cable; overlapping pixels go to the over cable of the nearest
// crossing, then each crossing gets a disk (diameter twice the stroke) in the
// over cable's color.
inline Rendering render(const World& w) {
  const auto palette = default_palette();
  const Rgb background{195, 195, 195};
  const int W = w.canvas_width;
  const int H = w.canvas_height;
  std::vector<std::uint8_t> cover(static_cast<std::size_t>(W) * H, 0);
  std::vector<Rgb> colors;
  for (std::size_t ci = 0; ci < w.cables.size(); ++ci) {
    const auto& c = w.cables[ci];
    const auto* pc = find_color(palette, c.color);
    colors.push_back(pc != nullptr ? pc->rgb : Rgb{0, 0, 0});
    const auto px = w.polyline_px(c);
    const double r = c.width_m / w.scale / 2.0;
    for (std::size_t i = 0; i + 1 < px.size(); ++i) {
      const Box b = bounding_box(px[i], px[i + 1]);
      for (int y = std::max(0, static_cast<int>(std::floor(b.y_min - r))); y <= std::min(H - 1, static_cast<int>(std::ceil(b.y_max + r))); ++y)
        for (int x = std::max(0, static_cast<int>(std::floor(b.x_min - r))); x <= std::min(W - 1, static_cast<int>(std::ceil(b.x_max + r))); ++x)
          if (point_segment_distance(pixel_center(x, y), px[i], px[i + 1]) <= r)
            cover[static_cast<std::size_t>(y) * W + x] |= static_cast<std::uint8_t>(1u << ci);
    }
  }
  auto slot_of = [&](int cable_id) {
    for (std::size_t i = 0; i < w.cables.size(); ++i)
      if (w.cables[i].cable_id == cable_id) return static_cast<int>(i);
    return -1;
  };
  std::vector<int> owner(cover.size(), -1);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const auto bits = cover[static_cast<std::size_t>(y) * W + x];
      if (bits == 0) continue;
      int pick = -1;
      if ((bits & (bits - 1)) == 0) {
        pick = std::countr_zero(static_cast<unsigned>(bits));
      } else {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& xc : w.crossings) {
          const int sa = slot_of(xc.cable_a);
          const int sb = slot_of(xc.cable_b);
          if (sa < 0 || sb < 0 || !(bits >> sa & 1u) || !(bits >> sb & 1u)) continue;
          const double d = distance(pixel_center(x, y), xc.point / w.scale);
          if (d < best) {
            best = d;
            pick = slot_of(xc.over);
          }
        }
        if (pick < 0) pick = 31 - std::countl_zero(static_cast<unsigned>(bits));
      }
      owner[static_cast<std::size_t>(y) * W + x] = pick;
    }
  for (const auto& xc : w.crossings) {
    const int s = slot_of(xc.over);
    if (s < 0) continue;
    const Vec2 c = xc.point / w.scale;
    const double r = w.cables[static_cast<std::size_t>(s)].width_m / w.scale;
    for (int y = std::max(0, static_cast<int>(std::floor(c.y - r))); y <= std::min(H - 1, static_cast<int>(std::ceil(c.y + r))); ++y)
      for (int x = std::max(0, static_cast<int>(std::floor(c.x - r))); x <= std::min(W - 1, static_cast<int>(std::ceil(c.x + r))); ++x)
        if (distance_sq(pixel_center(x, y), c) <= r * r) owner[static_cast<std::size_t>(y) * W + x] = s;
  }
  Rendering out{Image(W, H, background), std::vector<int>(w.cables.size(), 0)};
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int o = owner[static_cast<std::size_t>(y) * W + x];
      if (o < 0) continue;
      out.image.at(x, y) = colors[static_cast<std::size_t>(o)];
      ++out.painted[static_cast<std::size_t>(o)];
    }
  return out;
}

inline PerceptionConfig perception_config_for(const World& w, PerceptionConfig base = {}) {
  const auto palette = default_palette();
  base.palette.clear();
  base.fixed_endpoints.clear();
  for (const auto& c : w.cables) {
    const auto* pc = find_color(palette, c.color);
    if (pc == nullptr) throw Error(ErrorKind::InvalidArgument, "no palette entry for " + c.color);
    base.palette.push_back(*pc);
    base.fixed_endpoints[c.color] = c.polyline.back() / w.scale;
  }
  return base;
}

// Over/under for a fresh set of geometric crossings: crossings on the moved
// part (arc below `moved_arc`) put the moved cable on top; the rest keep the
// registry entry at the same place.
inline std::vector<WorldCrossing> rederive_over_under(const World& before, const World& after, int moved_cable,
                                                      double moved_arc_px) {
  std::vector<WorldCrossing> out;
  for (const auto& h : world_crossings_px(after)) {
    WorldCrossing x{h.cable_a, h.cable_b, h.point * after.scale, std::max(h.cable_a, h.cable_b)};
    const bool involves = h.cable_a == moved_cable || h.cable_b == moved_cable;
    const double arc_on_moved = h.cable_a == moved_cable ? h.arc_a : h.arc_b;
    if (involves && arc_on_moved < moved_arc_px) {
      x.over = moved_cable;
    } else {
      double best = 2.0;  // pixels
      bool matched = false;
      for (const auto& old : before.crossings) {
        if (old.cable_a != h.cable_a || old.cable_b != h.cable_b) continue;
        const double d = distance(old.point / before.scale, h.point);
        if (d < best) {
          best = d;
          x.over = old.over;
          matched = true;
        }
      }
      if (!matched && involves) x.over = moved_cable;
    }
    out.push_back(x);
  }
  return out;
}

// Physical execution of an action given in image pixels: the grasped segment
// is laid straight from c toward p with its true arc length, the tail follows
// the branch the planner predicted, then bleed and jitter perturb the moved
// part.
inline World execute(const World& world, const ActionGeometry& geo, const PhysicsConfig& physics,
                     std::uint64_t seed = 0, double node_step_px = 17.0) {
  if (physics.noise_sigma < 0.0 || physics.elasticity_bleed < 0.0 || physics.elasticity_bleed > 1.0)
    throw Error(ErrorKind::InvalidArgument, "physics parameters out of range");
  World next = world;
  WorldCable* cable = nullptr;
  for (auto& c : next.cables)
    if (c.cable_id == geo.cable_id) cable = &c;
  if (cable == nullptr) throw Error(ErrorKind::InvalidArgument, "unknown cable " + std::to_string(geo.cable_id));
  const double s = world.scale;
  const Polyline P = world.polyline_px(*cable);
  const double vstep = std::max(1.0, polyline_length(P) / static_cast<double>(P.size() - 1));

  const auto pc = project_onto_polyline(geo.pivot, P);
  const double arc_c = pc.arc;
  const double arc_g = std::min(project_onto_polyline(geo.grasp, P).arc, arc_c);
  const Vec2 c_w = pc.point;
  const Vec2 g_w = point_at_arc(P, arc_g);
  Vec2 dir = normalized(geo.place - geo.pivot);
  if (norm_sq(dir) == 0.0) dir = normalized(g_w - c_w);
  const double l_grasp = arc_c - arc_g;
  const Vec2 p_w = c_w + dir * l_grasp;

  // p -> c, excluding c
  Polyline grasp_part = sample_segment(c_w, p_w, vstep);
  std::reverse(grasp_part.begin(), grasp_part.end());

  // tail p -> free end, excluding p
  Polyline tail;
  if (arc_g > 0.0) {
    Vec2 tdir = dir;
    if (geo.tail_bent) {
      const Vec2 toward = normalized(P.front() - p_w);
      if (norm_sq(toward) > 0.0) tdir = toward;
    }
    tail = sample_segment(p_w, p_w + tdir * arc_g, vstep);
    if (physics.elasticity_bleed > 0.0) {
      Polyline old_tail = slice_by_arc(P, 0.0, arc_g);
      std::reverse(old_tail.begin(), old_tail.end());  // g -> free
      const Vec2 shift = p_w - g_w;
      const double b = physics.elasticity_bleed;
      Polyline old_shape{p_w};
      for (std::size_t i = 0; i < tail.size(); ++i) {
        const double arc = distance(tail[i], p_w);
        old_shape.push_back(point_at_arc(old_tail, arc) + shift);
        tail[i] = tail[i] * (1.0 - b) + old_shape.back() * b;
      }
      // Blending shortens the tail; stretch it back to the length the two
      // shapes have at this bleed (b = 1 keeps the old shape untouched).
      Polyline with_p{p_w};
      with_p.insert(with_p.end(), tail.begin(), tail.end());
      const double len = polyline_length(with_p);
      const double target = (1.0 - b) * arc_g + b * polyline_length(old_shape);
      if (len > 0.0)
        for (auto& q : tail) q = p_w + (q - p_w) * (target / len);
    }
  }

  // free -> c (excluding c)
  Polyline moved(tail.rbegin(), tail.rend());
  moved.insert(moved.end(), grasp_part.begin(), grasp_part.end());

  if (physics.noise_sigma > 0.0 && !moved.empty()) {
    // Gaussian offsets at node spacing from the free end, zero at the pivot,
    // linearly interpolated onto the dense vertices.
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jitter(0.0, physics.noise_sigma / s);
    Polyline with_c = moved;
    with_c.push_back(c_w);
    const auto arc = cumulative_length(with_c);
    const double total = arc.back();
    const auto knots = static_cast<std::size_t>(std::ceil(total / node_step_px));
    std::vector<double> knot_arc;
    std::vector<Vec2> offset;
    for (std::size_t k = 0; k < knots; ++k) {
      knot_arc.push_back(static_cast<double>(k) * node_step_px);
      offset.push_back({jitter(rng), jitter(rng)});
    }
    knot_arc.push_back(total);
    offset.push_back({});
    for (std::size_t i = 0; i < moved.size(); ++i) {
      const auto k = std::min(static_cast<std::size_t>(arc[i] / node_step_px), knots - 1);
      const double span = knot_arc[k + 1] - knot_arc[k];
      const double t = span > 0.0 ? std::clamp((arc[i] - knot_arc[k]) / span, 0.0, 1.0) : 0.0;
      moved[i] += offset[k] * (1.0 - t) + offset[k + 1] * t;
    }
  }

  const double moved_arc = polyline_length(moved) + (moved.empty() ? 0.0 : distance(moved.back(), c_w));
  Polyline kept = slice_by_arc(P, arc_c, polyline_length(P));
  Polyline full = moved;
  full.insert(full.end(), kept.begin(), kept.end());
  cable->polyline.clear();
  for (auto q : full) cable->polyline.push_back(q * s);
  cable->polyline.back().x = world.workspace.fixed_edge_x();
  next.crossings = rederive_over_under(world, next, geo.cable_id, moved_arc - 1e-9);
  return next;
}

// Ground-truth discretization: nodes every `step` pixels from v_fix, crossing
// nodes at the geometric crossings, Regular nodes closer than step/2 to a
// crossing or to v_free dropped.
inline CableState state_from_world(const World& w, double step_px = 17.0, double merge_radius_px = 17.5) {
  CableState state;
  std::vector<Polyline> px;
  for (const auto& c : w.cables) px.push_back(w.polyline_px(c));
  const auto hits = geometric_crossings(as_cable_polylines(w.cables, px), merge_radius_px);
  struct Mark {
    double arc;
    NodeKind kind;
    int crossing;
    Vec2 pos;
  };
  std::vector<std::vector<Mark>> marks(w.cables.size());
  int cid = 0;
  for (const auto& h : hits) {
    int over = std::max(h.cable_a, h.cable_b);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& x : w.crossings)
      if (x.cable_a == h.cable_a && x.cable_b == h.cable_b && distance(x.point / w.scale, h.point) < best) {
        best = distance(x.point / w.scale, h.point);
        over = x.over;
      }
    const int under = over == h.cable_a ? h.cable_b : h.cable_a;
    const auto slot = [&](int id) {
      for (std::size_t i = 0; i < w.cables.size(); ++i)
        if (w.cables[i].cable_id == id) return i;
      return std::size_t{0};
    };
    const double arc_over = over == h.cable_a ? h.arc_a : h.arc_b;
    const double arc_under = over == h.cable_a ? h.arc_b : h.arc_a;
    marks[slot(over)].push_back({arc_over, NodeKind::OverCrossing, cid, h.point});
    marks[slot(under)].push_back({arc_under, NodeKind::UnderCrossing, cid, h.point});
    state.crossings[cid] = CrossingRecord{cid, over, under, h.point};
    ++cid;
  }
  int nid = 0;
  for (std::size_t i = 0; i < w.cables.size(); ++i) {
    const auto& P = px[i];
    const double L = polyline_length(P);
    std::vector<Mark> all = marks[i];
    all.push_back({0.0, NodeKind::Endpoint, -1, P.front()});
    all.push_back({L, NodeKind::Endpoint, -1, P.back()});
    for (int k = 1;; ++k) {
      const double arc = L - k * step_px;
      if (arc < step_px / 2.0) break;
      const bool near = std::any_of(marks[i].begin(), marks[i].end(),
                                    [&](const Mark& m) { return std::abs(m.arc - arc) < step_px / 2.0; });
      if (!near) all.push_back({arc, NodeKind::Regular, -1, point_at_arc(P, arc)});
    }
    std::sort(all.begin(), all.end(), [](const Mark& a, const Mark& b) { return a.arc < b.arc; });
    CableGraph g;
    g.cable_id = w.cables[i].cable_id;
    g.color = w.cables[i].color;
    for (const auto& m : all) {
      Node n{nid++, m.kind, m.pos, std::nullopt};
      if (m.crossing >= 0) {
        n.id = -1;
        n.crossing_id = m.crossing;
      }
      g.nodes.push_back(n);
    }
    state.graphs.push_back(std::move(g));
  }
  // crossing node pairs share an id
  std::map<int, int> crossing_node_id;
  for (auto& g : state.graphs)
    for (auto& n : g.nodes)
      if (n.crossing_id) {
        auto [it, fresh] = crossing_node_id.emplace(*n.crossing_id, nid);
        if (fresh) ++nid;
        n.id = it->second;
      }
  for (auto& g : state.graphs) recompute_edges(g);
  return state;
}

inline int geometric_crossing_count(const World& w) { return static_cast<int>(world_crossings_px(w).size()); }

// World document: {"scale", "canvas": [w, h], "workspace": [x0, y0, x1, y1],
//   "cables": [{"cable_id", "color", "width_m", "points": [[x, y], ...]}],
//   "crossings": [{"a", "b", "over", "x", "y"}]}   (meters)
inline nlohmann::json world_to_json(const World& w) {
  nlohmann::json cables = nlohmann::json::array();
  for (const auto& c : w.cables) {
    nlohmann::json pts = nlohmann::json::array();
    for (auto p : c.polyline) pts.push_back({p.x, p.y});
    cables.push_back({{"cable_id", c.cable_id}, {"color", c.color}, {"width_m", c.width_m}, {"points", pts}});
  }
  nlohmann::json xs = nlohmann::json::array();
  for (const auto& x : w.crossings)
    xs.push_back({{"a", x.cable_a}, {"b", x.cable_b}, {"over", x.over}, {"x", x.point.x}, {"y", x.point.y}});
  const auto& b = w.workspace.box_m;
  return {{"scale", w.scale},
          {"canvas", {w.canvas_width, w.canvas_height}},
          {"workspace", {b.x_min, b.y_min, b.x_max, b.y_max}},
          {"cables", cables},
          {"crossings", xs}};
}

inline World world_from_json(const nlohmann::json& doc) {
  try {
    World w;
    w.scale = doc.at("scale").get<double>();
    w.canvas_width = doc.at("canvas").at(0).get<int>();
    w.canvas_height = doc.at("canvas").at(1).get<int>();
    const auto& b = doc.at("workspace");
    w.workspace.box_m = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
    for (const auto& jc : doc.at("cables")) {
      WorldCable c;
      c.cable_id = jc.at("cable_id").get<int>();
      c.color = jc.at("color").get<std::string>();
      c.width_m = jc.at("width_m").get<double>();
      for (const auto& p : jc.at("points")) c.polyline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      w.cables.push_back(std::move(c));
    }
    std::sort(w.cables.begin(), w.cables.end(), [](const auto& a, const auto& b) { return a.cable_id < b.cable_id; });
    for (const auto& jx : doc.at("crossings"))
      w.crossings.push_back({jx.at("a").get<int>(), jx.at("b").get<int>(),
                             {jx.at("x").get<double>(), jx.at("y").get<double>()}, jx.at("over").get<int>()});
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedDocument, e.what());
  }
}

inline Stiffness stiffness_from_string(const std::string& s) {
  if (s == "electric") return Stiffness::Electric;
  if (s == "shoelace") return Stiffness::Shoelace;
  throw Error(ErrorKind::InvalidArgument, "unknown stiffness '" + s + "'");
}

inline std::string_view to_string(Stiffness s) { return s == Stiffness::Electric ? "electric" : "shoelace"; }

}  // namespace unweave
