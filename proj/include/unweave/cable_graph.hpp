#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "unweave/errors.hpp"
#include "unweave/geometry.hpp"

namespace unweave {

enum class NodeKind { Endpoint, Regular, OverCrossing, UnderCrossing };

enum class EdgeLabel { Plus, Minus, Plain };

inline std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Endpoint: return "endpoint";
    case NodeKind::Regular: return "regular";
    case NodeKind::OverCrossing: return "over";
    case NodeKind::UnderCrossing: return "under";
  }
  return "?";
}

inline std::optional<NodeKind> node_kind_from_string(std::string_view s) {
  if (s == "endpoint") return NodeKind::Endpoint;
  if (s == "regular") return NodeKind::Regular;
  if (s == "over") return NodeKind::OverCrossing;
  if (s == "under") return NodeKind::UnderCrossing;
  return std::nullopt;
}

inline bool is_crossing(NodeKind k) { return k == NodeKind::OverCrossing || k == NodeKind::UnderCrossing; }

struct Node {
  int id{0};
  NodeKind kind{NodeKind::Regular};
  Vec2 pos{};  // pixels, image frame
  std::optional<int> crossing_id;

  friend bool operator==(const Node&, const Node&) = default;
};

// A single cable as a simple directed path from the free endpoint
// (nodes.front()) to the fixed endpoint (nodes.back()).
struct CableGraph {
  int cable_id{0};
  std::string color;
  std::vector<Node> nodes;
  std::vector<EdgeLabel> edges;  // edges[i] joins nodes[i] and nodes[i + 1]

  [[nodiscard]] const Node& free_end() const { return nodes.front(); }
  [[nodiscard]] const Node& fixed_end() const { return nodes.back(); }

  [[nodiscard]] Polyline polyline() const {
    Polyline out;
    out.reserve(nodes.size());
    for (const auto& n : nodes) out.push_back(n.pos);
    return out;
  }

  [[nodiscard]] std::optional<std::size_t> index_of(int node_id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].id == node_id) return i;
    return std::nullopt;
  }

  friend bool operator==(const CableGraph&, const CableGraph&) = default;
};

struct CrossingRecord {
  int id{0};
  int over{0};   // cable_id holding the overcrossing
  int under{0};  // cable_id holding the undercrossing
  Vec2 pos{};

  friend bool operator==(const CrossingRecord&, const CrossingRecord&) = default;
};

struct CableState {
  std::vector<CableGraph> graphs;          // sorted by cable_id
  std::map<int, CrossingRecord> crossings;  // crossing_id -> record

  [[nodiscard]] const CableGraph* find(int cable_id) const {
    for (const auto& g : graphs)
      if (g.cable_id == cable_id) return &g;
    return nullptr;
  }
  [[nodiscard]] CableGraph* find(int cable_id) {
    for (auto& g : graphs)
      if (g.cable_id == cable_id) return &g;
    return nullptr;
  }

  friend bool operator==(const CableState&, const CableState&) = default;
};

inline EdgeLabel edge_label_between(NodeKind a, NodeKind b) {
  if (a == NodeKind::OverCrossing || b == NodeKind::OverCrossing) return EdgeLabel::Plus;
  if (a == NodeKind::UnderCrossing || b == NodeKind::UnderCrossing) return EdgeLabel::Minus;
  return EdgeLabel::Plain;
}

inline void recompute_edges(CableGraph& g) {
  g.edges.clear();
  for (std::size_t i = 1; i < g.nodes.size(); ++i)
    g.edges.push_back(edge_label_between(g.nodes[i - 1].kind, g.nodes[i].kind));
}

inline std::size_t count_crossings(const CableState& state) { return state.crossings.size(); }

// Limits used by the spacing invariants.
struct GraphLimits {
  double window_width{35.0};  // d_w, pixels
  double step{17.0};          // tracing step, pixels

  [[nodiscard]] double crossing_spacing() const { return std::numbers::sqrt2 * window_width; }
  [[nodiscard]] double max_node_gap() const { return 1.5 * step; }
};

struct Issue {
  std::string code;  // stable identifier, e.g. "unpaired crossing"
  std::string detail;
};

// Checks every CableGraph/CableState invariant; an empty result means valid.
// `check_spacing` toggles the two metric invariants (node gap and crossing
// separation), which predicted states are allowed to violate.
inline std::vector<Issue> validate_state(const CableState& state, const GraphLimits& limits = {},
                                         bool check_spacing = true) {
  std::vector<Issue> issues;
  auto add = [&](std::string code, std::string detail) { issues.push_back({std::move(code), std::move(detail)}); };

  std::set<int> cable_ids;
  std::unordered_map<int, int> plain_ids;  // node id -> count, for V_e and V_r
  struct Seen {
    int over_count{0};
    int under_count{0};
    int over_cable{-1};
    int under_cable{-1};
    int node_id{0};
    Vec2 over_pos{};
    Vec2 under_pos{};
  };
  std::map<int, Seen> seen;

  for (std::size_t gi = 0; gi < state.graphs.size(); ++gi) {
    const auto& g = state.graphs[gi];
    const std::string where = "cable " + std::to_string(g.cable_id);
    if (!cable_ids.insert(g.cable_id).second) add("duplicate cable", where);
    if (gi > 0 && state.graphs[gi - 1].cable_id > g.cable_id) add("cable order", where);
    if (g.nodes.size() < 2) {
      add("path endpoints", where + " has fewer than two nodes");
      continue;
    }
    if (g.edges.size() != g.nodes.size() - 1) add("edge count", where);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const auto& n = g.nodes[i];
      const bool end = i == 0 || i + 1 == g.nodes.size();
      if (end != (n.kind == NodeKind::Endpoint))
        add("path endpoints", where + " node " + std::to_string(n.id) + " at index " + std::to_string(i));
      if (is_crossing(n.kind) != n.crossing_id.has_value())
        add("crossing id presence", where + " node " + std::to_string(n.id));
      if (!std::isfinite(n.pos.x) || !std::isfinite(n.pos.y)) add("non-finite position", where);
      if (n.crossing_id) {
        auto& s = seen[*n.crossing_id];
        if (n.kind == NodeKind::OverCrossing) {
          ++s.over_count;
          s.over_cable = g.cable_id;
          s.over_pos = n.pos;
        } else {
          ++s.under_count;
          s.under_cable = g.cable_id;
          s.under_pos = n.pos;
        }
        if (s.over_count + s.under_count > 1 && s.node_id != n.id)
          add("crossing node id", "crossing " + std::to_string(*n.crossing_id));
        s.node_id = n.id;
      } else {
        ++plain_ids[n.id];
      }
      if (i > 0) {
        const auto& prev = g.nodes[i - 1];
        if ((prev.kind == NodeKind::OverCrossing && n.kind == NodeKind::UnderCrossing) ||
            (prev.kind == NodeKind::UnderCrossing && n.kind == NodeKind::OverCrossing))
          add("over-under edge", where + " between nodes " + std::to_string(prev.id) + " and " + std::to_string(n.id));
        if (i - 1 < g.edges.size() && g.edges[i - 1] != edge_label_between(prev.kind, n.kind))
          add("edge label mismatch", where + " edge " + std::to_string(i - 1));
        if (check_spacing && distance(prev.pos, n.pos) > limits.max_node_gap() + 1e-9)
          add("node spacing", where + " between nodes " + std::to_string(prev.id) + " and " + std::to_string(n.id));
      }
    }
  }

  for (const auto& [id, count] : plain_ids)
    if (count > 1) add("duplicate node id", "node " + std::to_string(id));
  for (const auto& [cid, s] : seen)
    if (plain_ids.contains(s.node_id)) add("duplicate node id", "crossing node " + std::to_string(s.node_id));

  for (const auto& [cid, s] : seen) {
    const std::string what = "crossing " + std::to_string(cid);
    if (s.over_count != 1 || s.under_count != 1) {
      add("unpaired crossing", what);
      continue;
    }
    if (s.over_cable == s.under_cable) add("self crossing", what);
    if (s.over_pos != s.under_pos) add("crossing position mismatch", what);
    const auto rec = state.crossings.find(cid);
    if (rec == state.crossings.end()) {
      add("unregistered crossing", what);
      continue;
    }
    if (rec->second.over != s.over_cable || rec->second.under != s.under_cable || rec->second.pos != s.over_pos)
      add("registry mismatch", what);
  }
  for (const auto& [cid, rec] : state.crossings) {
    if (rec.id != cid) add("registry mismatch", "crossing " + std::to_string(cid) + " stored under another id");
    if (!seen.contains(cid)) add("unpaired crossing", "crossing " + std::to_string(cid) + " has no nodes");
  }

  if (check_spacing) {
    const double min_sep = limits.crossing_spacing();
    for (auto a = state.crossings.begin(); a != state.crossings.end(); ++a)
      for (auto b = std::next(a); b != state.crossings.end(); ++b)
        if (distance(a->second.pos, b->second.pos) < min_sep)
          add("crossing spacing",
              "crossings " + std::to_string(a->first) + " and " + std::to_string(b->first));
  }
  return issues;
}

inline bool has_issue(const std::vector<Issue>& issues, std::string_view code) {
  return std::any_of(issues.begin(), issues.end(), [&](const Issue& i) { return i.code == code; });
}

// Throws Error{InvariantViolation} naming the first violated invariant.
inline void require_valid(const CableState& state, const GraphLimits& limits = {}, bool check_spacing = true) {
  const auto issues = validate_state(state, limits, check_spacing);
  if (!issues.empty()) throw Error(ErrorKind::InvariantViolation, issues.front().code + " (" + issues.front().detail + ")");
}

// Renumbers node ids densely from 0 (cable order, then path order) and
// crossing ids densely from 0 in order of first appearance. Paired crossing
// nodes share one node id.
inline void canonicalize_ids(CableState& state) {
  std::map<int, int> crossing_remap;
  std::map<int, int> crossing_node_id;
  int next_node = 0;
  for (auto& g : state.graphs) {
    for (auto& n : g.nodes) {
      if (n.crossing_id) {
        auto [it, inserted] = crossing_remap.try_emplace(*n.crossing_id, static_cast<int>(crossing_remap.size()));
        if (inserted) crossing_node_id[it->second] = next_node++;
        n.crossing_id = it->second;
        n.id = crossing_node_id[it->second];
      } else {
        n.id = next_node++;
      }
    }
  }
  std::map<int, CrossingRecord> registry;
  for (const auto& [old_id, rec] : state.crossings) {
    const auto it = crossing_remap.find(old_id);
    if (it == crossing_remap.end()) continue;
    CrossingRecord r = rec;
    r.id = it->second;
    registry[r.id] = r;
  }
  state.crossings = std::move(registry);
}

// Largest node id in use, or -1 for an empty state.
inline int max_node_id(const CableState& state) {
  int m = -1;
  for (const auto& g : state.graphs)
    for (const auto& n : g.nodes) m = std::max(m, n.id);
  return m;
}

inline int max_crossing_id(const CableState& state) {
  return state.crossings.empty() ? -1 : state.crossings.rbegin()->first;
}

}  // namespace unweave
