#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unweave/cable_graph.hpp"
#include "unweave/errors.hpp"
#include "unweave/geometry.hpp"
#include "unweave/image.hpp"

namespace unweave {

// Inclusive HSV box. Hue wraps around 360 when h_lo > h_hi.
struct HsvRange {
  double h_lo{0.0};
  double h_hi{360.0};
  double s_lo{0.0};
  double s_hi{1.0};
  double v_lo{0.0};
  double v_hi{1.0};

  [[nodiscard]] bool contains(const Hsv& c) const {
    const bool hue = h_lo <= h_hi ? (c.h >= h_lo && c.h <= h_hi) : (c.h >= h_lo || c.h <= h_hi);
    return hue && c.s >= s_lo && c.s <= s_hi && c.v >= v_lo && c.v <= v_hi;
  }
};

struct PaletteColor {
  std::string name;
  HsvRange range;
  Rgb rgb;  // paint color used by the renderer
};

inline std::vector<PaletteColor> default_palette() {
  return {
      {"red", {345.0, 15.0, 0.5, 1.0, 0.35, 1.0}, {220, 30, 30}},
      {"yellow", {40.0, 70.0, 0.5, 1.0, 0.35, 1.0}, {230, 200, 20}},
      {"blue", {200.0, 250.0, 0.5, 1.0, 0.35, 1.0}, {30, 80, 220}},
      {"green", {100.0, 160.0, 0.5, 1.0, 0.35, 1.0}, {30, 170, 60}},
  };
}

inline const PaletteColor* find_color(const std::vector<PaletteColor>& palette, const std::string& name) {
  for (const auto& c : palette)
    if (c.name == name) return &c;
  return nullptr;
}

struct PerceptionConfig {
  double window_width{35.0};  // d_w, pixels
  double step{17.0};          // slide step, pixels
  std::vector<PaletteColor> palette{default_palette()};
  std::map<std::string, Vec2> fixed_endpoints;  // color -> v_fix pixel
  int min_component_px{20};                     // noise cleanup threshold
  int min_island_px{8};                         // islands smaller than this are ignored inside a window

  [[nodiscard]] GraphLimits limits() const { return {window_width, step}; }
};

struct CableMask {
  int cable_id{0};
  std::string color;
  int width{0};
  int height{0};
  std::vector<std::uint8_t> bits;
  int pixel_count{0};

  [[nodiscard]] bool at(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height && bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
};

struct TraceWindow {
  Vec2 center{};
  double width{35.0};
  Vec2 heading{1.0, 0.0};
};

namespace detail {

// Removes 8-connected components smaller than `min_px`; returns the number of
// pixels kept.
inline int remove_small_components(std::vector<std::uint8_t>& bits, int w, int h, int min_px) {
  std::vector<int> label(bits.size(), -1);
  std::vector<int> stack;
  std::vector<int> members;
  int kept = 0;
  for (int start = 0; start < static_cast<int>(bits.size()); ++start) {
    if (!bits[start] || label[start] >= 0) continue;
    members.clear();
    stack.assign(1, start);
    label[start] = start;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      members.push_back(p);
      const int px = p % w;
      const int py = p / w;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = px + dx;
          const int ny = py + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int q = ny * w + nx;
          if (bits[q] && label[q] < 0) {
            label[q] = start;
            stack.push_back(q);
          }
        }
    }
    if (static_cast<int>(members.size()) < min_px)
      for (int p : members) bits[p] = 0;
    else
      kept += static_cast<int>(members.size());
  }
  return kept;
}

struct Island {
  int pixels{0};
  unsigned edges{0};  // bit 0 left, 1 right, 2 top, 3 bottom
  std::size_t first{0};  // offset of this island's pixels in WindowScan::points
  [[nodiscard]] int edge_count() const { return std::popcount(edges); }
};

// Mask pixels inside an axis-aligned window, grouped into 8-connected islands.
struct WindowScan {
  std::vector<Island> islands;  // only islands with at least min_island_px pixels
  std::vector<Vec2> points;     // pixel centers of all pixels in kept islands
  [[nodiscard]] int count() const { return static_cast<int>(islands.size()); }
  [[nodiscard]] Vec2 mean() const { return centroid(points); }
  [[nodiscard]] std::span<const Vec2> pixels_of(std::size_t i) const {
    return std::span(points).subspan(islands[i].first, static_cast<std::size_t>(islands[i].pixels));
  }
  // Island holding the pixel closest to q.
  [[nodiscard]] std::size_t island_near(Vec2 q) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < islands.size(); ++i)
      for (auto p : pixels_of(i))
        if (distance_sq(p, q) < best_d) {
          best_d = distance_sq(p, q);
          best = i;
        }
    return best;
  }

  static Vec2 centroid(std::span<const Vec2> pts) {
    Vec2 m{};
    for (auto p : pts) m += p;
    return pts.empty() ? m : m / static_cast<double>(pts.size());
  }
};

inline WindowScan scan_window(const CableMask& mask, Vec2 center, double width, int min_island_px) {
  const double half = width / 2.0;
  // Pixels whose centers fall inside [center - half, center + half].
  const int x0 = std::max(0, static_cast<int>(std::ceil(center.x - half - 0.5)));
  const int x1 = std::min(mask.width - 1, static_cast<int>(std::floor(center.x + half - 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(center.y - half - 0.5)));
  const int y1 = std::min(mask.height - 1, static_cast<int>(std::floor(center.y + half - 0.5)));
  WindowScan scan;
  if (x0 > x1 || y0 > y1) return scan;
  const int w = x1 - x0 + 1;
  const int h = y1 - y0 + 1;
  std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
  std::vector<int> stack;
  std::vector<int> members;
  for (int ly = 0; ly < h; ++ly) {
    for (int lx = 0; lx < w; ++lx) {
      const int start = ly * w + lx;
      if (label[start] >= 0 || !mask.at(x0 + lx, y0 + ly)) continue;
      Island island;
      members.clear();
      stack.assign(1, start);
      label[start] = 0;
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        members.push_back(p);
        const int px = p % w;
        const int py = p / w;
        if (px == 0) island.edges |= 1u;
        if (px == w - 1) island.edges |= 2u;
        if (py == 0) island.edges |= 4u;
        if (py == h - 1) island.edges |= 8u;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = px + dx;
            const int ny = py + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const int q = ny * w + nx;
            if (label[q] < 0 && mask.at(x0 + nx, y0 + ny)) {
              label[q] = 0;
              stack.push_back(q);
            }
          }
      }
      island.pixels = static_cast<int>(members.size());
      if (island.pixels < min_island_px) continue;
      island.first = scan.points.size();
      scan.islands.push_back(island);
      for (int p : members) scan.points.push_back(pixel_center(x0 + p % w, y0 + p / w));
    }
  }
  return scan;
}

// True when an island touches a window edge facing along `heading`, i.e. the
// cable leaves the window ahead.
inline bool reaches_ahead(const WindowScan& scan, Vec2 heading) {
  unsigned forward = 0;
  if (heading.x > 0.3) forward |= 2u;
  if (heading.x < -0.3) forward |= 1u;
  if (heading.y > 0.3) forward |= 8u;
  if (heading.y < -0.3) forward |= 4u;
  return std::any_of(scan.islands.begin(), scan.islands.end(), [&](const Island& i) { return (i.edges & forward) != 0; });
}

// Unit principal axis of a point cloud (largest-eigenvalue eigenvector of the
// 2x2 covariance), sign-matched to `reference`.
inline Vec2 principal_axis(std::span<const Vec2> pts, Vec2 reference) {
  if (pts.size() < 2) return reference;
  Vec2 m{};
  for (auto p : pts) m += p;
  m = m / static_cast<double>(pts.size());
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (auto p : pts) {
    const Vec2 d = p - m;
    sxx += d.x * d.x;
    sxy += d.x * d.y;
    syy += d.y * d.y;
  }
  const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  Vec2 axis{std::cos(angle), std::sin(angle)};
  if (dot(axis, reference) < 0.0) axis = -axis;
  return axis;
}

// Tip of the cable ahead of `pos` along `heading`: the mean of the mask pixels
// that lie furthest along the heading within the two windows ahead.
inline Vec2 refine_tip(const CableMask& mask, Vec2 pos, Vec2 heading, const PerceptionConfig& cfg) {
  std::vector<Vec2> pts = scan_window(mask, pos, cfg.window_width, cfg.min_island_px).points;
  const auto ahead = scan_window(mask, pos + heading * (cfg.window_width / 2.0), cfg.window_width, cfg.min_island_px);
  pts.insert(pts.end(), ahead.points.begin(), ahead.points.end());
  double best = -std::numeric_limits<double>::infinity();
  for (auto p : pts) {
    // Only pixels near the traced centerline count toward the tip.
    const Vec2 d = p - pos;
    if (std::abs(cross(heading, d)) > cfg.window_width / 2.0) continue;
    best = std::max(best, dot(d, heading));
  }
  if (!std::isfinite(best) || best <= 0.0) return pos;
  Vec2 sum{};
  int n = 0;
  for (auto p : pts) {
    const Vec2 d = p - pos;
    if (std::abs(cross(heading, d)) > cfg.window_width / 2.0) continue;
    if (dot(d, heading) >= best - 1.5) {
      sum += p;
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

// Inserts interpolated Regular nodes wherever consecutive nodes are more than
// 1.5 steps apart. New nodes get id -1.
inline void densify(std::vector<Node>& nodes, double step) {
  std::vector<Node> out;
  out.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i > 0) {
      const Vec2 a = out.back().pos;
      const Vec2 b = nodes[i].pos;
      const double gap = distance(a, b);
      if (gap > 1.5 * step) {
        const auto pieces = static_cast<int>(std::ceil(gap / step));
        for (int k = 1; k < pieces; ++k)
          out.push_back(Node{-1, NodeKind::Regular, lerp(a, b, static_cast<double>(k) / pieces), std::nullopt});
      }
    }
    out.push_back(nodes[i]);
  }
  nodes = std::move(out);
}

}  // namespace detail

// One mask per palette entry (cable_id = palette index). A pixel is assigned
// to the first palette color whose range contains it; components smaller
// than min_component_px are dropped as noise.
inline std::vector<CableMask> segment_by_color(const Image& image, const PerceptionConfig& cfg) {
  if (cfg.palette.empty()) throw Error(ErrorKind::InvalidArgument, "empty palette");
  const int w = image.width();
  const int h = image.height();
  std::vector<CableMask> masks;
  for (std::size_t i = 0; i < cfg.palette.size(); ++i)
    masks.push_back({static_cast<int>(i), cfg.palette[i].name, w, h,
                     std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0), 0});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Hsv c = to_hsv(image.at(x, y));
      for (std::size_t i = 0; i < cfg.palette.size(); ++i)
        if (cfg.palette[i].range.contains(c)) {
          masks[i].bits[static_cast<std::size_t>(y) * w + x] = 1;
          break;
        }
    }
  for (auto& m : masks) {
    m.pixel_count = detail::remove_small_components(m.bits, w, h, cfg.min_component_px);
    if (m.pixel_count == 0) throw Error(ErrorKind::CableNotVisible, m.color);
  }
  return masks;
}

// Node type of the window per the island rules: two islands mean an
// undercrossing; one island touching two or more window edges is a regular
// node; otherwise the window is advanced by d_w/2 and one or zero islands
// there mean an endpoint.
inline NodeKind classify_window(const CableMask& mask, const TraceWindow& window, const PerceptionConfig& cfg) {
  const auto scan = detail::scan_window(mask, window.center, window.width, cfg.min_island_px);
  if (scan.count() == 0) throw Error(ErrorKind::EmptyWindow);
  if (scan.count() >= 2) return NodeKind::UnderCrossing;
  if (scan.islands.front().edge_count() >= 2) return NodeKind::Regular;
  if (detail::reaches_ahead(scan, window.heading)) return NodeKind::Regular;
  const auto ahead =
      detail::scan_window(mask, window.center + window.heading * (window.width / 2.0), window.width, cfg.min_island_px);
  return ahead.count() <= 1 ? NodeKind::Endpoint : NodeKind::UnderCrossing;
}

namespace detail {

// Mean of the pixels lying furthest along `heading` (within 1.5 px of the max).
inline Vec2 island_tip(std::span<const Vec2> pts, Vec2 heading) {
  double far = -std::numeric_limits<double>::infinity();
  for (auto p : pts) far = std::max(far, dot(p, heading));
  Vec2 sum{};
  int n = 0;
  for (auto p : pts)
    if (dot(p, heading) >= far - 1.5) {
      sum += p;
      ++n;
    }
  return n == 0 ? sum : sum / static_cast<double>(n);
}

struct Hop {
  Vec2 under;    // middle of the gap
  Vec2 resume;   // where the cable reappears
  Vec2 heading;  // direction of the reappearing part
};

// Crossing the occlusion gap from island `behind` to the nearest island
// ahead of its tip, if one starts within `max_gap`.
inline std::optional<Hop> hop_across(const WindowScan& scan, std::size_t behind, Vec2 heading, double max_gap) {
  const Vec2 tip = island_tip(scan.pixels_of(behind), heading);
  std::optional<std::size_t> pick;
  Vec2 entry{};
  double best = max_gap;
  for (std::size_t j = 0; j < scan.islands.size(); ++j) {
    if (j == behind) continue;
    for (auto q : scan.pixels_of(j)) {
      const double d = distance(q, tip);
      if (d <= best && dot(q - tip, heading) > -2.0) {
        best = d;
        entry = q;
        pick = j;
      }
    }
  }
  if (!pick) return std::nullopt;
  const auto pts = scan.pixels_of(*pick);
  std::vector<Vec2> near;
  for (auto q : pts)
    if (distance(q, entry) < 8.0) near.push_back(q);
  const Vec2 resume = WindowScan::centroid(near);
  // The cable is close to straight across a short gap.
  Vec2 dir = normalized(resume - tip);
  if (norm_sq(dir) == 0.0 || dot(dir, heading) < 0.5) dir = heading;
  return Hop{(tip + resume) / 2.0, resume, dir};
}

inline bool touches(const CableMask* mask, Vec2 p, double radius) {
  if (mask == nullptr) return false;
  const int r = static_cast<int>(std::ceil(radius));
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const int x = static_cast<int>(std::floor(p.x)) + dx;
      const int y = static_cast<int>(std::floor(p.y)) + dy;
      if (mask->at(x, y) && distance(pixel_center(x, y), p) <= radius) return true;
    }
  return false;
}

}  // namespace detail

// Slides a d_w window from the fixed endpoint toward the free end. Returns the
// nodes ordered v_free -> v_fix with provisional kinds (Endpoint, Regular,
// UnderCrossing); ids are left at -1. Two islands in a window, or a dead end
// touching `occluders` (pixels of other cables), mean the cable passes under
// something: the tracer hops the gap and resumes on the far side.
inline std::vector<Node> trace_cable(const CableMask& mask, Vec2 fixed_endpoint, const PerceptionConfig& cfg,
                                     const CableMask* occluders = nullptr) {
  const double half = cfg.window_width / 2.0;
  const double min_under_sep = std::numbers::sqrt2 * cfg.window_width;

  const auto start = detail::scan_window(mask, fixed_endpoint, cfg.window_width, cfg.min_island_px);
  if (start.count() == 0)
    throw Error(ErrorKind::TraceBroke, "no mask pixels near the fixed endpoint of " + mask.color);
  Vec2 heading = normalized(start.mean() - fixed_endpoint);
  if (norm_sq(heading) == 0.0) heading = {1.0, 0.0};
  heading = detail::principal_axis(start.points, heading);

  std::vector<Node> nodes{Node{-1, NodeKind::Endpoint, fixed_endpoint, std::nullopt}};
  std::vector<Vec2> unders;
  Vec2 pos = fixed_endpoint;

  auto add_under = [&](const detail::Hop& hop) {
    const bool duplicate =
        std::any_of(unders.begin(), unders.end(), [&](Vec2 u) { return distance(u, hop.under) < min_under_sep; });
    if (!duplicate) {
      unders.push_back(hop.under);
      nodes.push_back(Node{-1, NodeKind::UnderCrossing, hop.under, std::nullopt});
    }
    heading = hop.heading;
    pos = hop.resume;
  };

  const double diag = std::hypot(mask.width, mask.height);
  const auto budget = static_cast<int>(std::ceil(diag / cfg.step * 4.0));
  bool finished = false;
  int iter = 0;
  for (; iter < budget && !finished; ++iter) {
    const Vec2 cand = pos + heading * cfg.step;
    if (cand.x < 0.0 || cand.y < 0.0 || cand.x >= mask.width || cand.y >= mask.height) break;  // leaves the image
    const auto scan = detail::scan_window(mask, cand, cfg.window_width, cfg.min_island_px);
    if (scan.count() == 0) break;
    const std::size_t here = scan.island_near(pos);

    if (scan.count() >= 2) {
      if (auto hop = detail::hop_across(scan, here, heading, cfg.window_width)) {
        add_under(*hop);
        continue;
      }
    }
    const auto pts = scan.pixels_of(here);
    const auto& island = scan.islands[here];
    const bool open_ahead = island.edge_count() >= 2 || detail::reaches_ahead(scan, heading) ||
                            distance(cand, fixed_endpoint) <= cfg.window_width;
    if (!open_ahead) {
      // Dead end: the free end, or the cable disappearing under another one.
      const Vec2 tip = detail::island_tip(pts, heading);
      const bool occluded =
          occluders != nullptr ? detail::touches(occluders, tip, 3.0)
                               : detail::scan_window(mask, cand + heading * half, cfg.window_width, cfg.min_island_px)
                                         .count() >= 2;
      if (occluded) {
        const auto wide = detail::scan_window(mask, tip + heading * half, 2.0 * cfg.window_width, cfg.min_island_px);
        if (wide.count() >= 2) {
          if (auto hop = detail::hop_across(wide, wide.island_near(tip), heading, cfg.window_width)) {
            add_under(*hop);
            continue;
          }
        }
        throw Error(ErrorKind::TraceBroke, "trace of " + mask.color + " ended inside an occlusion");
      }
      nodes.push_back(Node{-1, NodeKind::Endpoint, detail::refine_tip(mask, detail::WindowScan::centroid(pts), heading, cfg),
                           std::nullopt});
      finished = true;
      break;
    }

    const Vec2 node_pos = detail::WindowScan::centroid(pts);
    if (dot(node_pos - pos, heading) < cfg.step / 4.0) {
      // No progress: the window is parked on the free end.
      nodes.push_back(Node{-1, NodeKind::Endpoint, detail::refine_tip(mask, node_pos, heading, cfg), std::nullopt});
      finished = true;
      break;
    }
    heading = detail::principal_axis(pts, heading);
    nodes.push_back(Node{-1, NodeKind::Regular, node_pos, std::nullopt});
    pos = node_pos;
  }
  if (!finished) {
    if (nodes.size() >= 2 && nodes.back().kind == NodeKind::UnderCrossing)
      throw Error(ErrorKind::TraceBroke, "trace of " + mask.color + " ended inside an occlusion");
    if (iter >= budget) throw Error(ErrorKind::TraceRunaway, mask.color);
    nodes.back().kind = NodeKind::Endpoint;
    nodes.back().pos = detail::refine_tip(mask, nodes.back().pos, heading, cfg);
  }
  if (nodes.size() < 3 || distance(nodes.front().pos, nodes.back().pos) < cfg.step)
    throw Error(ErrorKind::CableTooShort, mask.color);

  detail::densify(nodes, cfg.step);
  std::reverse(nodes.begin(), nodes.end());
  return nodes;
}

struct TracedCable {
  int cable_id{0};
  std::string color;
  std::vector<Node> nodes;  // v_free -> v_fix, provisional kinds
};

// Pairs every undercrossing with the nearest Regular node on another cable,
// which becomes the overcrossing at the same id and coordinates.
inline CableState refine_overcrossings(std::vector<TracedCable> traced, const PerceptionConfig& cfg) {
  const double max_dist = std::numbers::sqrt2 * cfg.window_width;
  std::sort(traced.begin(), traced.end(), [](const auto& a, const auto& b) { return a.cable_id < b.cable_id; });

  CableState state;
  int next_id = 0;
  for (auto& t : traced) {
    CableGraph g{t.cable_id, t.color, std::move(t.nodes), {}};
    for (auto& n : g.nodes) {
      n.id = next_id++;
      n.crossing_id.reset();
      if (n.kind == NodeKind::OverCrossing) n.kind = NodeKind::Regular;
    }
    state.graphs.push_back(std::move(g));
  }

  int next_crossing = 0;
  for (auto& gi : state.graphs) {
    for (auto& u : gi.nodes) {
      if (u.kind != NodeKind::UnderCrossing || u.crossing_id) continue;
      Node* best = nullptr;
      int best_cable = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (auto& gj : state.graphs) {
        if (gj.cable_id == gi.cable_id) continue;
        for (auto& v : gj.nodes) {
          if (v.kind != NodeKind::Regular) continue;
          const double d = distance(u.pos, v.pos);
          if (d < best_d) {
            best_d = d;
            best = &v;
            best_cable = gj.cable_id;
          }
        }
      }
      if (best == nullptr || best_d > max_dist)
        throw Error(ErrorKind::OrphanUndercrossing,
                    gi.color + " near (" + std::to_string(u.pos.x) + ", " + std::to_string(u.pos.y) + ")");
      const int cid = next_crossing++;
      u.crossing_id = cid;
      best->kind = NodeKind::OverCrossing;
      best->pos = u.pos;
      best->id = u.id;
      best->crossing_id = cid;
      state.crossings[cid] = CrossingRecord{cid, best_cable, gi.cable_id, u.pos};
    }
  }
  for (auto& g : state.graphs) {
    detail::densify(g.nodes, cfg.step);
    recompute_edges(g);
  }
  canonicalize_ids(state);
  return state;
}

// segment_by_color -> trace_cable per cable -> refine_overcrossings; the
// result passes every CableState invariant or an Error is thrown.
inline CableState build_state(const Image& image, const PerceptionConfig& cfg) {
  const auto masks = segment_by_color(image, cfg);
  std::vector<TracedCable> traced;
  for (const auto& m : masks) {
    CableMask others = m;
    std::fill(others.bits.begin(), others.bits.end(), std::uint8_t{0});
    for (const auto& o : masks)
      if (o.cable_id != m.cable_id)
        for (std::size_t i = 0; i < o.bits.size(); ++i) others.bits[i] |= o.bits[i];
    const auto fixed = cfg.fixed_endpoints.find(m.color);
    if (fixed == cfg.fixed_endpoints.end())
      throw Error(ErrorKind::InvalidArgument, "no fixed endpoint configured for " + m.color);
    try {
      traced.push_back({m.cable_id, m.color, trace_cable(m, fixed->second, cfg, &others)});
    } catch (const Error& e) {
      throw Error(e.kind(), "cable " + m.color + ": " + e.what());
    }
  }
  CableState state = refine_overcrossings(std::move(traced), cfg);
  require_valid(state, cfg.limits());
  return state;
}

}  // namespace unweave
