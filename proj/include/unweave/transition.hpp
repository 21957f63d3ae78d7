#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "unweave/cable_graph.hpp"
#include "unweave/crossings.hpp"
#include "unweave/errors.hpp"
#include "unweave/geometry.hpp"

namespace unweave {

// Pick-and-place action a = [g, theta] on one cable.
struct Action {
  int cable_id{0};
  int grasp_node_id{0};
  double theta{0.0};  // radians, counter-clockwise in the y-up frame

  friend bool operator==(const Action&, const Action&) = default;
};

struct TransitionConfig {
  double k{0.8};  // stiffness threshold between straight and bent tail
  double theta_min{-5.0 * std::numbers::pi / 6.0};
  double theta_max{5.0 * std::numbers::pi / 6.0};
  double meters_per_pixel{1.0 / 500.0};
  double resample_step_m{17.0 / 500.0};  // node respacing of predicted segments
  double merge_radius_px{17.5};          // d_w / 2

  [[nodiscard]] double resample_step_px() const { return resample_step_m / meters_per_pixel; }
};

// Derived geometry of one action. Positions are pixels; lengths are stored
// in pixels with meter accessors.
struct ActionGeometry {
  int cable_id{0};
  std::size_t pivot_index{0};
  std::size_t grasp_index{0};
  double theta{0.0};
  Vec2 pivot{};      // c
  Vec2 pivot_succ{};  // first unmoved node after c toward v_fix
  Vec2 grasp{};      // g before the action
  Vec2 place{};      // p
  Vec2 old_free{};   // v_free before the action
  double l_grasp_px{0.0};
  double l_tail_px{0.0};
  bool tail_bent{false};
  double meters_per_pixel{1.0 / 500.0};

  [[nodiscard]] double l_grasp_m() const { return l_grasp_px * meters_per_pixel; }
  [[nodiscard]] double l_tail_m() const { return l_tail_px * meters_per_pixel; }
};

// Index of the pivot node c: the predecessor (walking v_free -> v_fix) of the
// first undercrossing, or of v_fix when the cable has none.
inline std::size_t pivot_index(const CableGraph& g) {
  if (g.nodes.size() < 3) throw Error(ErrorKind::CableTooShortToPivot, "cable " + std::to_string(g.cable_id));
  std::size_t stop = g.nodes.size() - 1;
  for (std::size_t i = 1; i + 1 < g.nodes.size(); ++i)
    if (g.nodes[i].kind == NodeKind::UnderCrossing) {
      stop = i;
      break;
    }
  if (stop < 2) throw Error(ErrorKind::CableTooShortToPivot, "cable " + std::to_string(g.cable_id));
  return stop - 1;
}

inline const Node& pivot_node(const CableGraph& g) { return g.nodes[pivot_index(g)]; }

// Grasp nodes allowed on this cable: Regular nodes strictly between v_free
// and the pivot.
inline std::vector<std::size_t> grasp_candidates(const CableGraph& g, std::size_t pivot) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < pivot; ++i)
    if (g.nodes[i].kind == NodeKind::Regular) out.push_back(i);
  return out;
}

inline ActionGeometry action_geometry(const CableGraph& g, std::size_t grasp_index, double theta,
                                      const TransitionConfig& cfg) {
  if (!(theta >= cfg.theta_min && theta <= cfg.theta_max))
    throw Error(ErrorKind::ThetaOutOfBounds, std::to_string(theta));
  const std::size_t c = pivot_index(g);
  if (grasp_index == 0 || grasp_index >= c || g.nodes[grasp_index].kind != NodeKind::Regular)
    throw Error(ErrorKind::InvalidGraspNode,
                "node " + std::to_string(grasp_index < g.nodes.size() ? g.nodes[grasp_index].id : -1) + " on cable " +
                    std::to_string(g.cable_id));
  const auto pts = g.polyline();
  ActionGeometry geo;
  geo.cable_id = g.cable_id;
  geo.pivot_index = c;
  geo.grasp_index = grasp_index;
  geo.theta = theta;
  geo.pivot = pts[c];
  geo.pivot_succ = pts[c + 1];
  geo.grasp = pts[grasp_index];
  geo.old_free = pts.front();
  geo.l_grasp_px = polyline_length(std::span(pts).subspan(grasp_index, c - grasp_index + 1));
  geo.l_tail_px = polyline_length(std::span(pts).subspan(0, grasp_index + 1));
  geo.meters_per_pixel = cfg.meters_per_pixel;
  const Vec2 dir = rotate_ccw(normalized(geo.grasp - geo.pivot), theta);
  geo.place = geo.pivot + dir * geo.l_grasp_px;
  geo.tail_bent = !(geo.l_tail_px < cfg.k * geo.l_grasp_px);
  return geo;
}

inline ActionGeometry action_geometry(const CableState& state, const Action& action, const TransitionConfig& cfg) {
  const CableGraph* g = state.find(action.cable_id);
  if (g == nullptr) throw Error(ErrorKind::InvalidGraspNode, "unknown cable " + std::to_string(action.cable_id));
  const auto idx = g->index_of(action.grasp_node_id);
  if (!idx) throw Error(ErrorKind::InvalidGraspNode, "unknown node " + std::to_string(action.grasp_node_id));
  return action_geometry(*g, *idx, action.theta, cfg);
}

// Unit direction of the tail after the action.
inline Vec2 tail_direction(const ActionGeometry& geo) {
  const Vec2 along = normalized(geo.place - geo.pivot);
  if (!geo.tail_bent) return along;
  const Vec2 toward_old_free = normalized(geo.old_free - geo.place);
  return norm_sq(toward_old_free) == 0.0 ? along : toward_old_free;
}

// New positions of the moved part, ordered v_free -> (node just before c).
// `place_slot` receives the index of the node sitting at p.
inline Polyline moved_positions(const ActionGeometry& geo, double step_px, std::size_t* place_slot = nullptr) {
  Polyline outward = sample_segment(geo.pivot, geo.place, step_px);  // c -> p, excludes c
  const std::size_t place_from_c = outward.size() - 1;
  if (geo.l_tail_px > 0.0) {
    const Vec2 tail_end = geo.place + tail_direction(geo) * geo.l_tail_px;
    const Polyline tail = sample_segment(geo.place, tail_end, step_px);
    outward.insert(outward.end(), tail.begin(), tail.end());
  }
  if (place_slot != nullptr) *place_slot = outward.size() - 1 - place_from_c;
  std::reverse(outward.begin(), outward.end());
  return outward;
}

// Intersection of the moved part (a polyline ending at the pivot) with one
// other cable. Hits at the pivot itself are dropped: that point belongs to the
// unmoved side.
struct MovedHit {
  int other_cable{0};
  Vec2 point{};
  std::size_t moved_segment{0};
  double moved_arc{0.0};
  std::size_t other_segment{0};
  double other_arc{0.0};
};

inline std::vector<MovedHit> moved_part_hits(std::span<const Vec2> moved_with_pivot, int moved_cable,
                                             std::span<const Vec2> other, int other_cable, double merge_radius) {
  const CablePolyline pair[2] = {{moved_cable, moved_with_pivot}, {other_cable, other}};
  const auto hits = geometric_crossings(pair, merge_radius);
  const double total = polyline_length(moved_with_pivot);
  std::vector<MovedHit> out;
  for (const auto& h : hits) {
    const bool moved_first = h.cable_a == moved_cable;
    MovedHit m{other_cable,
               h.point,
               moved_first ? h.segment_a : h.segment_b,
               moved_first ? h.arc_a : h.arc_b,
               moved_first ? h.segment_b : h.segment_a,
               moved_first ? h.arc_b : h.arc_a};
    if (m.moved_arc >= total - 1e-9) continue;
    out.push_back(m);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.moved_arc < b.moved_arc; });
  return out;
}

namespace detail {

// Inserts `extra` nodes (each after vertex `segment`, ordered by arc) into `nodes`.
struct Insertion {
  std::size_t segment{0};
  double arc{0.0};
  Node node;
};

inline std::vector<Node> insert_nodes(const std::vector<Node>& nodes, std::vector<Insertion> extra) {
  std::sort(extra.begin(), extra.end(), [](const auto& a, const auto& b) { return a.arc < b.arc; });
  std::vector<Node> out;
  out.reserve(nodes.size() + extra.size());
  std::size_t e = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    out.push_back(nodes[i]);
    while (e < extra.size() && extra[e].segment == i) out.push_back(extra[e++].node);
  }
  return out;
}

}  // namespace detail

// Deterministic transition S' = predict(S, a). The segment v_fix..c is kept,
// L_grasp becomes the straight segment c -> p, and the tail is straight along
// c -> p when l_tail < k * l_grasp, otherwise straight from p toward the old
// v_free. New crossings put the moved cable on top. Other cables keep every
// node position; only crossing nodes shared with the moved cable change.
inline CableState predict(const CableState& state, const Action& action, const TransitionConfig& cfg) {
  const ActionGeometry geo = action_geometry(state, action, cfg);
  CableState next = state;
  CableGraph& moved = *next.find(action.cable_id);

  // Crossings on the moved part disappear with it.
  for (std::size_t i = 0; i < geo.pivot_index; ++i) {
    const auto& n = moved.nodes[i];
    if (!n.crossing_id) continue;
    const int cid = *n.crossing_id;
    const auto rec = next.crossings.find(cid);
    if (rec != next.crossings.end()) {
      const int partner = rec->second.over == moved.cable_id ? rec->second.under : rec->second.over;
      if (CableGraph* pg = next.find(partner)) {
        for (auto& pn : pg->nodes)
          if (pn.crossing_id == cid) {
            pn.kind = NodeKind::Regular;
            pn.crossing_id.reset();
          }
        recompute_edges(*pg);
      }
      next.crossings.erase(rec);
    }
  }

  int next_node_id = max_node_id(state) + 1;
  int next_crossing_id = max_crossing_id(state) + 1;

  std::size_t place_slot = 0;
  const Polyline moved_pts = moved_positions(geo, cfg.resample_step_px(), &place_slot);
  std::vector<Node> new_nodes;
  new_nodes.reserve(moved_pts.size() + moved.nodes.size() - geo.pivot_index);
  const int grasp_id = moved.nodes[geo.grasp_index].id;
  for (std::size_t i = 0; i < moved_pts.size(); ++i) {
    Node n{i == place_slot ? grasp_id : next_node_id++, i == 0 ? NodeKind::Endpoint : NodeKind::Regular, moved_pts[i],
           std::nullopt};
    new_nodes.push_back(n);
  }
  // A moved part of a single node is the free end landing at p.
  if (moved_pts.size() == 1) new_nodes.front().kind = NodeKind::Endpoint;
  new_nodes.insert(new_nodes.end(), moved.nodes.begin() + static_cast<std::ptrdiff_t>(geo.pivot_index),
                   moved.nodes.end());

  Polyline moved_with_pivot = moved_pts;
  moved_with_pivot.push_back(geo.pivot);

  std::vector<detail::Insertion> on_moved;
  for (auto& other : next.graphs) {
    if (other.cable_id == moved.cable_id) continue;
    const Polyline other_pts = other.polyline();
    const auto hits = moved_part_hits(moved_with_pivot, moved.cable_id, other_pts, other.cable_id, cfg.merge_radius_px);
    std::vector<detail::Insertion> on_other;
    for (const auto& h : hits) {
      const int cid = next_crossing_id++;
      const int nid = next_node_id++;
      on_moved.push_back({h.moved_segment, h.moved_arc, Node{nid, NodeKind::OverCrossing, h.point, cid}});
      on_other.push_back({h.other_segment, h.other_arc, Node{nid, NodeKind::UnderCrossing, h.point, cid}});
      next.crossings[cid] = CrossingRecord{cid, moved.cable_id, other.cable_id, h.point};
    }
    if (!on_other.empty()) {
      other.nodes = detail::insert_nodes(other.nodes, std::move(on_other));
      recompute_edges(other);
    }
  }
  moved.nodes = detail::insert_nodes(new_nodes, std::move(on_moved));
  recompute_edges(moved);
  return next;
}

// M = crossings(S) - crossings(S'); negative when the action adds crossings.
inline int crossings_eliminated(const CableState& state, const Action& action, const TransitionConfig& cfg) {
  const CableState next = predict(state, action, cfg);
  return static_cast<int>(count_crossings(state)) - static_cast<int>(count_crossings(next));
}

}  // namespace unweave
