#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "unweave/cable_graph.hpp"
#include "unweave/errors.hpp"

namespace unweave {

// State document layout:
//   {"cables":    [{"cable_id", "color", "nodes": [{"id", "kind", "x", "y", "crossing_id"?}]}],
//    "crossings": [{"id", "over", "under", "x", "y"}]}
// Edge labels are not stored; they are recomputed from node kinds.

inline nlohmann::json state_to_json(const CableState& state) {
  nlohmann::json cables = nlohmann::json::array();
  for (const auto& g : state.graphs) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : g.nodes) {
      nlohmann::json jn = {{"id", n.id}, {"kind", std::string(to_string(n.kind))}, {"x", n.pos.x}, {"y", n.pos.y}};
      if (n.crossing_id) jn["crossing_id"] = *n.crossing_id;
      nodes.push_back(std::move(jn));
    }
    cables.push_back({{"cable_id", g.cable_id}, {"color", g.color}, {"nodes", std::move(nodes)}});
  }
  nlohmann::json crossings = nlohmann::json::array();
  for (const auto& [id, rec] : state.crossings)
    crossings.push_back({{"id", rec.id}, {"over", rec.over}, {"under", rec.under}, {"x", rec.pos.x}, {"y", rec.pos.y}});
  return {{"cables", std::move(cables)}, {"crossings", std::move(crossings)}};
}

// Parses without validating invariants.
inline CableState state_from_json_unchecked(const nlohmann::json& doc) {
  try {
    CableState state;
    for (const auto& jc : doc.at("cables")) {
      CableGraph g;
      g.cable_id = jc.at("cable_id").get<int>();
      g.color = jc.at("color").get<std::string>();
      for (const auto& jn : jc.at("nodes")) {
        Node n;
        n.id = jn.at("id").get<int>();
        const auto kind = node_kind_from_string(jn.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorKind::MalformedDocument, "unknown node kind '" + jn.at("kind").get<std::string>() + "'");
        n.kind = *kind;
        n.pos = {jn.at("x").get<double>(), jn.at("y").get<double>()};
        if (jn.contains("crossing_id")) n.crossing_id = jn.at("crossing_id").get<int>();
        g.nodes.push_back(n);
      }
      recompute_edges(g);
      state.graphs.push_back(std::move(g));
    }
    for (const auto& jx : doc.at("crossings")) {
      CrossingRecord r;
      r.id = jx.at("id").get<int>();
      r.over = jx.at("over").get<int>();
      r.under = jx.at("under").get<int>();
      r.pos = {jx.at("x").get<double>(), jx.at("y").get<double>()};
      if (!state.crossings.emplace(r.id, r).second)
        throw Error(ErrorKind::MalformedDocument, "duplicate crossing id " + std::to_string(r.id));
    }
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedDocument, e.what());
  }
}

inline std::string serialize_state(const CableState& state) { return state_to_json(state).dump(2); }

// Parses and re-validates every invariant; violations throw
// Error{InvariantViolation} whose message names the invariant.
inline CableState deserialize_state(std::string_view text, const GraphLimits& limits = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedDocument, e.what());
  }
  CableState state = state_from_json_unchecked(doc);
  require_valid(state, limits);
  return state;
}

}  // namespace unweave
