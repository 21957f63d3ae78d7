#pragma once

#include <string>
#include <vector>

#include "unweave/unweave.hpp"

namespace fixtures {

using namespace unweave;

inline std::vector<Node> nodes_along(Vec2 from, Vec2 to, int count) {
  std::vector<Node> out;
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / (count - 1);
    out.push_back(Node{0, NodeKind::Regular, from + (to - from) * t, std::nullopt});
  }
  out.front().kind = NodeKind::Endpoint;
  out.back().kind = NodeKind::Endpoint;
  return out;
}

// Two straight cables crossing once at (105, 100): red runs horizontally
// from its free end (190, 100) to (20, 100), yellow vertically from (105, 15)
// to (105, 185). Nodes every 17 px; red is on top.
inline CableState two_cable_cross(bool red_over = true) {
  CableGraph red{0, "red", nodes_along({190, 100}, {20, 100}, 11), {}};
  CableGraph yellow{1, "yellow", nodes_along({105, 15}, {105, 185}, 11), {}};
  red.nodes[5].kind = red_over ? NodeKind::OverCrossing : NodeKind::UnderCrossing;
  red.nodes[5].crossing_id = 0;
  yellow.nodes[5].kind = red_over ? NodeKind::UnderCrossing : NodeKind::OverCrossing;
  yellow.nodes[5].crossing_id = 0;
  recompute_edges(red);
  recompute_edges(yellow);
  CableState s;
  s.graphs = {red, yellow};
  s.crossings[0] = CrossingRecord{0, red_over ? 0 : 1, red_over ? 1 : 0, {105, 100}};
  canonicalize_ids(s);
  return s;
}

// World from pixel polylines ordered free end -> fixed end. `over[i]` picks
// the over cable of the i-th geometric crossing (sorted as returned).
inline World world_from_px(const std::vector<Polyline>& px, const std::vector<int>& over = {}) {
  World w;
  const auto colors = cable_colors(static_cast<int>(px.size()));
  for (std::size_t i = 0; i < px.size(); ++i) {
    WorldCable c{static_cast<int>(i), colors[i], {}, 0.012};
    for (auto p : px[i]) c.polyline.push_back(p * w.scale);
    w.cables.push_back(c);
  }
  const auto hits = world_crossings_px(w);
  for (std::size_t k = 0; k < hits.size(); ++k) {
    const int o = k < over.size() ? over[k] : hits[k].cable_a;
    w.crossings.push_back({hits[k].cable_a, hits[k].cable_b, hits[k].point * w.scale, o});
  }
  return w;
}

// Cable through `corners` (free end first), nodes every `step` px or less.
inline CableGraph path_graph(int id, const std::vector<Vec2>& corners, double step = 17.0) {
  CableGraph g{id, cable_colors(4)[static_cast<std::size_t>(id)], {}, {}};
  g.nodes.push_back(Node{0, NodeKind::Endpoint, corners.front(), std::nullopt});
  for (std::size_t i = 0; i + 1 < corners.size(); ++i)
    for (auto p : sample_segment(corners[i], corners[i + 1], step)) g.nodes.push_back(Node{0, NodeKind::Regular, p, std::nullopt});
  g.nodes.back().kind = NodeKind::Endpoint;
  recompute_edges(g);
  return g;
}

// Straight polyline sampled densely, free end first.
inline Polyline dense_line(Vec2 free_end, Vec2 fixed_end, double step = 3.0) {
  Polyline p = sample_segment(free_end, fixed_end, step);
  p.insert(p.begin(), free_end);
  return p;
}

}  // namespace fixtures
