#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "unweave/cable_graph.hpp"
#include "unweave/errors.hpp"
#include "unweave/geometry.hpp"
#include "unweave/transition.hpp"

namespace unweave {

// Visible and reachable table area, in world meters (image-aligned axes,
// world = pixel * meters_per_pixel). Fixed endpoints sit on the left edge.
struct Workspace {
  Box box_m{20.0 / 500.0, 20.0 / 500.0, 620.0 / 500.0, 460.0 / 500.0};

  [[nodiscard]] bool contains_px(Vec2 px, double meters_per_pixel) const { return box_m.contains(px * meters_per_pixel); }
  [[nodiscard]] double fixed_edge_x() const { return box_m.x_min; }
};

struct PlannerConfig {
  double d_f{0.02};                                 // gripper fingerpad clearance, meters
  double theta_grid{2.0 * std::numbers::pi / 180.0};  // validity sampling resolution
  double w_dist{1.0};
  double w_curv{100.0};
  double w_cred{100.0};
  double w_std{3000.0};
  double w_elim{30.0};
  int refine_iters{12};
  double refine_step{0.1 * std::numbers::pi / 180.0};  // central-difference half step
  double window_width_px{35.0};                        // d_w
  double image_height_px{480.0};
  double endpoint_clearance{0.02};  // meters between the new free end and other cables
  TransitionConfig transition{};
  Workspace workspace{};

  [[nodiscard]] double px(double meters) const { return meters / transition.meters_per_pixel; }
  [[nodiscard]] double crossing_clearance_px() const { return std::numbers::sqrt2 * window_width_px; }
};

enum class Primitive { Elimination, Redistribution, Done };

inline std::string_view to_string(Primitive p) {
  switch (p) {
    case Primitive::Elimination: return "elimination";
    case Primitive::Redistribution: return "redistribution";
    case Primitive::Done: return "done";
  }
  return "?";
}

struct Validity {
  bool ok{true};
  std::string reason;
  explicit operator bool() const { return ok; }
};

// A maximal run of consecutive valid theta samples sharing the same M for
// one grasp node.
struct ActionSubspace {
  int cable_id{0};
  int grasp_node_id{0};
  std::size_t grasp_index{0};
  double theta_lo{0.0};
  double theta_hi{0.0};
  int M{0};
  int sample_lo{0};  // grid indices, inclusive
  int sample_hi{0};

  [[nodiscard]] double midpoint() const { return 0.5 * (theta_lo + theta_hi); }
};

struct LiftHeight {
  double h{0.0};  // meters
  bool taut{false};
};

// h^2 = |c - g|^2 - |c - p|^2 after the orthographic pixel -> world map.
// A negative radicand (taut cable) yields h = 0 with the taut flag.
inline LiftHeight lift_height(Vec2 c, Vec2 g, Vec2 p, double meters_per_pixel) {
  const Vec2 cw = c * meters_per_pixel;
  const double radicand = distance_sq(cw, g * meters_per_pixel) - distance_sq(cw, p * meters_per_pixel);
  if (radicand < 0.0) return {0.0, true};
  return {std::sqrt(radicand), false};
}

// Individual reward features of a candidate; see combine_reward().
struct RewardTerms {
  double distance{0.0};     // sum over other graphs of mean squared node distance, m^2
  double curvature{0.0};    // Angle(c->Succ(c), c->p), radians
  double grasp_ratio{0.0};  // l_grasp / l_tail
  double spread{0.0};       // population std of normalized image y over G'
  int M{0};
};

// The M-free part of the elimination reward is snapped to a 2^-32 grid so
// that adding w_elim * M is exact: one more eliminated crossing then moves
// the reward by exactly w_elim (for w_elim a multiple of 2^-32).
inline double snap_reward(double r) { return std::ldexp(std::nearbyint(std::ldexp(r, 32)), -32); }

inline double combine_reward(const RewardTerms& t, Primitive primitive, const PlannerConfig& cfg) {
  const double shared = cfg.w_curv * t.curvature + cfg.w_cred * t.grasp_ratio;
  if (primitive == Primitive::Redistribution) return -cfg.w_std * t.spread + shared;
  return snap_reward(cfg.w_dist * t.distance + shared) + cfg.w_elim * t.M;
}

// `moved_graph` holds G' node positions (pixels); `others` the node positions
// of every other graph of S.
inline RewardTerms reward_terms(std::span<const Vec2> moved_graph, std::span<const std::span<const Vec2>> others,
                                const ActionGeometry& geo, int M, const PlannerConfig& cfg) {
  RewardTerms t;
  t.M = M;
  const double s = cfg.transition.meters_per_pixel;
  // sum_i sum_j |a_i - b_j|^2 = |B| sum|a|^2 + |A| sum|b|^2 - 2 (sum a).(sum b)
  Vec2 sum_a{};
  double sq_a = 0.0;
  for (auto a : moved_graph) {
    sum_a += a * s;
    sq_a += norm_sq(a * s);
  }
  const auto na = static_cast<double>(moved_graph.size());
  for (const auto& h : others) {
    if (h.empty() || moved_graph.empty()) continue;
    Vec2 sum_b{};
    double sq_b = 0.0;
    for (auto b : h) {
      sum_b += b * s;
      sq_b += norm_sq(b * s);
    }
    const auto nb = static_cast<double>(h.size());
    t.distance += (nb * sq_a + na * sq_b - 2.0 * dot(sum_a, sum_b)) / (na * nb);
  }
  t.curvature = angle_between(geo.pivot_succ - geo.pivot, geo.place - geo.pivot);
  const double eps = cfg.transition.resample_step_px();
  t.grasp_ratio = geo.l_grasp_px / std::max(geo.l_tail_px, eps);
  if (!moved_graph.empty()) {
    double mean = 0.0;
    for (auto a : moved_graph) mean += a.y / cfg.image_height_px;
    mean /= na;
    double var = 0.0;
    for (auto a : moved_graph) {
      const double d = a.y / cfg.image_height_px - mean;
      var += d * d;
    }
    t.spread = std::sqrt(var / na);
  }
  return t;
}

namespace detail {

inline std::vector<std::span<const Vec2>> spans_of(const std::vector<Polyline>& polys) {
  return {polys.begin(), polys.end()};
}

inline RewardTerms reward_terms_from_states(const CableState& before, const CableState& after,
                                            const ActionGeometry& geo, const PlannerConfig& cfg) {
  const CableGraph* moved = after.find(geo.cable_id);
  if (moved == nullptr) throw Error(ErrorKind::InvalidArgument, "moved cable missing from S'");
  const Polyline g_next = moved->polyline();
  std::vector<Polyline> others;
  for (const auto& h : before.graphs)
    if (h.cable_id != geo.cable_id) others.push_back(h.polyline());
  const auto spans = spans_of(others);
  const int M = static_cast<int>(count_crossings(before)) - static_cast<int>(count_crossings(after));
  return reward_terms(g_next, spans, geo, M, cfg);
}

}  // namespace detail

inline double reward_elimination(const CableState& before, const CableState& after, const ActionGeometry& geo,
                                 const PlannerConfig& cfg) {
  return combine_reward(detail::reward_terms_from_states(before, after, geo, cfg), Primitive::Elimination, cfg);
}

inline double reward_redistribution(const CableState& before, const CableState& after, const ActionGeometry& geo,
                                    const PlannerConfig& cfg) {
  return combine_reward(detail::reward_terms_from_states(before, after, geo, cfg), Primitive::Redistribution, cfg);
}

namespace detail {

// Validity criteria shared by the incremental evaluator and is_valid().

inline bool grasp_clear(Vec2 grasp, std::span<const std::span<const Vec2>> other_nodes, double min_px) {
  for (const auto& pts : other_nodes)
    for (auto q : pts)
      if (distance(grasp, q) < min_px) return false;
  return true;
}

// No Regular node outside the workspace unless the free endpoint is outside too.
inline bool unbroken(std::span<const Vec2> pos, std::span<const NodeKind> kinds, const Workspace& ws, double mpp) {
  if (pos.empty() || !ws.contains_px(pos.front(), mpp)) return true;
  for (std::size_t i = 0; i < pos.size(); ++i)
    if (kinds[i] == NodeKind::Regular && !ws.contains_px(pos[i], mpp)) return false;
  return true;
}

inline bool away_from(std::span<const Vec2> moved, std::span<const Vec2> forbidden, double min_px) {
  for (auto a : moved)
    for (auto f : forbidden)
      if (distance(a, f) < min_px) return false;
  return true;
}

inline bool crossings_spaced(std::span<const Vec2> fresh, std::span<const Vec2> kept, bool kept_ok, double min_px) {
  if (!kept_ok) return false;
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    for (auto k : kept)
      if (distance(fresh[i], k) < min_px) return false;
    for (std::size_t j = i + 1; j < fresh.size(); ++j)
      if (distance(fresh[i], fresh[j]) < min_px) return false;
  }
  return true;
}

inline bool all_pairs_spaced(std::span<const Vec2> pts, double min_px) {
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (distance(pts[i], pts[j]) < min_px) return false;
  return true;
}

// The new graph must not cross itself, and nodes that are far apart along the
// cable (>= 2 d_w) must stay at least d_w apart in the image. Only pairs with
// a moved node (index < moved_count) are checked.
inline bool no_self_contact(std::span<const Vec2> pos, std::size_t moved_count, double window_px) {
  const auto arc = cumulative_length(pos);
  for (std::size_t i = 0; i < moved_count && i < pos.size(); ++i)
    for (std::size_t j = i + 1; j < pos.size(); ++j)
      if (arc[j] - arc[i] >= 2.0 * window_px && distance(pos[i], pos[j]) < window_px) return false;
  for (std::size_t i = 0; i + 1 < moved_count && i + 1 < pos.size(); ++i)
    for (std::size_t j = i + 2; j + 1 < pos.size(); ++j) {
      if (i + 1 >= moved_count && j + 1 >= moved_count) break;
      try {
        if (auto hit = intersect_segments(pos[i], pos[i + 1], pos[j], pos[j + 1])) {
          // Touching at a shared vertex of a zero-length piece is not a crossing.
          if (distance(hit->point, pos[i + 1]) > 1e-9 || j != i + 1) return false;
        }
      } catch (const DegenerateOverlapError&) {
        return false;
      }
    }
  return true;
}

inline bool free_end_clear(Vec2 free_end, std::span<const std::span<const Vec2>> other_polylines, double min_px) {
  for (const auto& pts : other_polylines)
    if (point_polyline_distance(free_end, pts) < min_px) return false;
  return true;
}

}  // namespace detail

// Incremental candidate result: everything the planner needs without
// materializing the full predicted state.
struct CandidateEval {
  ActionGeometry geo;
  Polyline graph;                 // G' positions, v_free -> v_fix
  std::vector<NodeKind> kinds;    // G' node kinds
  std::size_t moved_count{0};     // leading nodes of `graph` that moved
  std::vector<Vec2> new_crossings;
  int M{0};
  Validity validity;
};

// Per-state precomputation shared by every candidate action.
class PlanningContext {
 public:
  PlanningContext(const CableState& state, const PlannerConfig& cfg) : state_(&state), cfg_(cfg) {
    for (const auto& g : state.graphs) polylines_.push_back(g.polyline());
    for (std::size_t i = 0; i < state.graphs.size(); ++i) {
      const auto& g = state.graphs[i];
      CableInfo info;
      try {
        info.pivot = pivot_index(g);
      } catch (const Error&) {
        info.pivot.reset();
      }
      if (info.pivot) {
        info.grasps = grasp_candidates(g, *info.pivot);
        std::vector<int> removed_ids;
        for (std::size_t k = 0; k < *info.pivot; ++k)
          if (g.nodes[k].crossing_id) removed_ids.push_back(*g.nodes[k].crossing_id);
        info.removed = static_cast<int>(removed_ids.size());
        for (const auto& [cid, rec] : state.crossings)
          if (std::find(removed_ids.begin(), removed_ids.end(), cid) == removed_ids.end())
            info.kept_crossings.push_back(rec.pos);
        info.kept_ok = detail::all_pairs_spaced(info.kept_crossings, cfg.crossing_clearance_px());
      }
      for (std::size_t j = 0; j < state.graphs.size(); ++j) {
        if (j == i) continue;
        info.others.push_back(j);
        for (const auto& n : state.graphs[j].nodes) {
          if (n.kind == NodeKind::Endpoint) {
            info.forbidden.push_back(n.pos);
          } else if (n.crossing_id) {
            const auto rec = state.crossings.find(*n.crossing_id);
            const bool involves = rec != state.crossings.end() &&
                                  (rec->second.over == g.cable_id || rec->second.under == g.cable_id);
            if (!involves) info.forbidden.push_back(n.pos);
          }
        }
      }
      cables_.push_back(std::move(info));
    }
  }

  [[nodiscard]] const CableState& state() const { return *state_; }
  [[nodiscard]] const PlannerConfig& config() const { return cfg_; }
  [[nodiscard]] std::size_t cable_count() const { return cables_.size(); }
  [[nodiscard]] const CableGraph& graph(std::size_t slot) const { return state_->graphs[slot]; }
  [[nodiscard]] std::optional<std::size_t> pivot(std::size_t slot) const { return cables_[slot].pivot; }
  [[nodiscard]] const std::vector<std::size_t>& grasps(std::size_t slot) const { return cables_[slot].grasps; }

  [[nodiscard]] std::size_t slot_of(int cable_id) const {
    for (std::size_t i = 0; i < state_->graphs.size(); ++i)
      if (state_->graphs[i].cable_id == cable_id) return i;
    throw Error(ErrorKind::InvalidArgument, "unknown cable " + std::to_string(cable_id));
  }

  [[nodiscard]] std::vector<std::span<const Vec2>> other_polylines(std::size_t slot) const {
    std::vector<std::span<const Vec2>> out;
    for (auto j : cables_[slot].others) out.emplace_back(polylines_[j]);
    return out;
  }

  [[nodiscard]] int theta_samples() const {
    const auto& t = cfg_.transition;
    return static_cast<int>(std::floor((t.theta_max - t.theta_min) / cfg_.theta_grid + 1e-9)) + 1;
  }
  [[nodiscard]] double theta_at(int k) const {
    return std::min(cfg_.transition.theta_min + k * cfg_.theta_grid, cfg_.transition.theta_max);
  }

  [[nodiscard]] CandidateEval evaluate(std::size_t slot, std::size_t grasp_index, double theta) const {
    const auto& info = cables_[slot];
    const auto& g = state_->graphs[slot];
    const auto& tc = cfg_.transition;
    CandidateEval ev;
    ev.geo = action_geometry(g, grasp_index, theta, tc);
    const Polyline moved = moved_positions(ev.geo, tc.resample_step_px());
    Polyline moved_with_pivot = moved;
    moved_with_pivot.push_back(ev.geo.pivot);

    std::vector<detail::Insertion> overs;
    for (auto j : info.others) {
      const auto hits = moved_part_hits(moved_with_pivot, g.cable_id, polylines_[j], state_->graphs[j].cable_id,
                                        tc.merge_radius_px);
      for (const auto& h : hits) {
        overs.push_back({h.moved_segment, h.moved_arc, Node{0, NodeKind::OverCrossing, h.point, 0}});
        ev.new_crossings.push_back(h.point);
      }
    }
    ev.M = info.removed - static_cast<int>(ev.new_crossings.size());

    std::vector<Node> nodes;
    nodes.reserve(moved.size() + g.nodes.size());
    for (std::size_t i = 0; i < moved.size(); ++i)
      nodes.push_back(Node{0, i == 0 ? NodeKind::Endpoint : NodeKind::Regular, moved[i], std::nullopt});
    nodes.insert(nodes.end(), g.nodes.begin() + static_cast<std::ptrdiff_t>(*info.pivot), g.nodes.end());
    std::sort(overs.begin(), overs.end(), [](const auto& a, const auto& b) { return a.arc < b.arc; });
    nodes = detail::insert_nodes(nodes, std::move(overs));
    ev.moved_count = moved.size() + ev.new_crossings.size();
    ev.graph.reserve(nodes.size());
    ev.kinds.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      ev.graph.push_back(nodes[i].pos);
      // Removed crossings on the moved part are gone; kinds of the kept part stay.
      ev.kinds.push_back(nodes[i].kind);
    }

    ev.validity = check(slot, ev);
    return ev;
  }

  [[nodiscard]] RewardTerms terms(std::size_t slot, const CandidateEval& ev) const {
    std::vector<std::span<const Vec2>> others;
    for (auto j : cables_[slot].others) others.emplace_back(polylines_[j]);
    return reward_terms(ev.graph, others, ev.geo, ev.M, cfg_);
  }

 private:
  struct CableInfo {
    std::optional<std::size_t> pivot;
    std::vector<std::size_t> grasps;
    std::vector<std::size_t> others;
    int removed{0};
    std::vector<Vec2> forbidden;
    std::vector<Vec2> kept_crossings;
    bool kept_ok{true};
  };

  [[nodiscard]] Validity check(std::size_t slot, const CandidateEval& ev) const {
    const auto& info = cables_[slot];
    const double mpp = cfg_.transition.meters_per_pixel;
    std::vector<std::span<const Vec2>> other_pts;
    for (auto j : info.others) other_pts.emplace_back(polylines_[j]);
    if (!detail::grasp_clear(ev.geo.grasp, other_pts, cfg_.px(cfg_.d_f))) return {false, "clearance"};
    if (!detail::unbroken(ev.graph, ev.kinds, cfg_.workspace, mpp)) return {false, "broken in the middle"};
    if (!detail::away_from(std::span(ev.graph).first(ev.moved_count), info.forbidden, cfg_.crossing_clearance_px()))
      return {false, "proximity"};
    if (!detail::crossings_spaced(ev.new_crossings, info.kept_crossings, info.kept_ok, cfg_.crossing_clearance_px()))
      return {false, "crossing spacing"};
    if (!detail::no_self_contact(ev.graph, ev.moved_count, cfg_.window_width_px)) return {false, "self contact"};
    if (!detail::free_end_clear(ev.graph.front(), other_pts, cfg_.px(cfg_.endpoint_clearance)))
      return {false, "tail clearance"};
    return {};
  }

  const CableState* state_;
  PlannerConfig cfg_;
  std::vector<Polyline> polylines_;
  std::vector<CableInfo> cables_;
};

// Validity of `action` judged on the fully materialized S' = predict(S, a):
//   1. g is at least d_f from every node of every other cable;
//   2. no Regular node of the new graph leaves the workspace unless its free
//      endpoint does too ("broken in the middle");
//   3. no moved node comes within sqrt(2) d_w of an endpoint or crossing of
//      other cables, and the crossings of S' stay sqrt(2) d_w apart;
// plus the no-self-loop assumption (no self crossing or self contact) and a
// clearance between the new free end and other cables.
inline Validity is_valid(const CableState& state, const Action& action, const PlannerConfig& cfg) {
  ActionGeometry geo;
  CableState next;
  try {
    geo = action_geometry(state, action, cfg.transition);
    next = predict(state, action, cfg.transition);
  } catch (const Error& e) {
    return {false, e.what()};
  }
  const double mpp = cfg.transition.meters_per_pixel;
  const CableGraph& moved = *next.find(action.cable_id);
  const CableGraph& before = *state.find(action.cable_id);

  std::vector<Polyline> other_before;
  for (const auto& h : state.graphs)
    if (h.cable_id != action.cable_id) other_before.push_back(h.polyline());
  const auto other_spans = detail::spans_of(other_before);
  if (!detail::grasp_clear(geo.grasp, other_spans, cfg.px(cfg.d_f))) return {false, "clearance"};

  const Polyline pos = moved.polyline();
  std::vector<NodeKind> kinds;
  for (const auto& n : moved.nodes) kinds.push_back(n.kind);
  if (!detail::unbroken(pos, kinds, cfg.workspace, mpp)) return {false, "broken in the middle"};

  const int pivot_id = before.nodes[geo.pivot_index].id;
  const auto pivot_now = moved.index_of(pivot_id);
  const std::size_t moved_count = pivot_now.value_or(0);
  std::vector<Vec2> forbidden;
  for (const auto& h : next.graphs) {
    if (h.cable_id == action.cable_id) continue;
    for (const auto& n : h.nodes) {
      if (n.kind == NodeKind::Endpoint) {
        forbidden.push_back(n.pos);
      } else if (n.crossing_id) {
        const auto& rec = next.crossings.at(*n.crossing_id);
        if (rec.over != action.cable_id && rec.under != action.cable_id) forbidden.push_back(n.pos);
      }
    }
  }
  if (!detail::away_from(std::span(pos).first(moved_count), forbidden, cfg.crossing_clearance_px()))
    return {false, "proximity"};
  std::vector<Vec2> all_crossings;
  for (const auto& [cid, rec] : next.crossings) all_crossings.push_back(rec.pos);
  if (!detail::all_pairs_spaced(all_crossings, cfg.crossing_clearance_px())) return {false, "crossing spacing"};
  if (!detail::no_self_contact(pos, moved_count, cfg.window_width_px)) return {false, "self contact"};

  std::vector<Polyline> other_after;
  for (const auto& h : next.graphs)
    if (h.cable_id != action.cable_id) other_after.push_back(h.polyline());
  if (!detail::free_end_clear(pos.front(), detail::spans_of(other_after), cfg.px(cfg.endpoint_clearance)))
    return {false, "tail clearance"};
  return {};
}

// Samples theta on the grid for every eligible grasp node of every cable and
// groups maximal runs of valid samples with equal M.
inline std::vector<ActionSubspace> enumerate_subspaces(const PlanningContext& ctx) {
  std::vector<ActionSubspace> out;
  const int samples = ctx.theta_samples();
  for (std::size_t slot = 0; slot < ctx.cable_count(); ++slot) {
    if (!ctx.pivot(slot)) continue;
    const auto& g = ctx.graph(slot);
    for (auto gi : ctx.grasps(slot)) {
      std::optional<ActionSubspace> run;
      for (int k = 0; k < samples; ++k) {
        const double theta = ctx.theta_at(k);
        const auto ev = ctx.evaluate(slot, gi, theta);
        const bool extend = ev.validity.ok && run && run->M == ev.M && run->sample_hi == k - 1;
        if (extend) {
          run->sample_hi = k;
          run->theta_hi = theta;
          continue;
        }
        if (run) out.push_back(*run);
        run.reset();
        if (ev.validity.ok) run = ActionSubspace{g.cable_id, g.nodes[gi].id, gi, theta, theta, ev.M, k, k};
      }
      if (run) out.push_back(*run);
    }
  }
  return out;
}

inline std::vector<ActionSubspace> enumerate_subspaces(const CableState& state, const PlannerConfig& cfg) {
  return enumerate_subspaces(PlanningContext(state, cfg));
}

// Done when no crossing remains; Elimination when some subspace has M > 0;
// Redistribution otherwise. An empty subspace set with crossings left is a
// deadlock.
inline Primitive select_primitive(std::span<const ActionSubspace> subspaces, const CableState& state) {
  if (count_crossings(state) == 0) return Primitive::Done;
  if (std::any_of(subspaces.begin(), subspaces.end(), [](const auto& s) { return s.M > 0; }))
    return Primitive::Elimination;
  if (subspaces.empty()) throw Error(ErrorKind::Deadlock, "no valid action subspace");
  return Primitive::Redistribution;
}

struct PlanResult {
  Primitive primitive{Primitive::Elimination};
  Action action;
  ActionGeometry geometry;
  int M{0};
  double reward{0.0};
  LiftHeight lift;
  CableState predicted;
};

// Default objective: the elimination or redistribution reward by primitive.
struct PrimitiveReward {
  const PlanningContext* ctx;
  double operator()(std::size_t slot, const CandidateEval& ev, Primitive primitive) const {
    return combine_reward(ctx->terms(slot, ev), primitive, ctx->config());
  }
};

inline bool in_domain(const ActionSubspace& s, Primitive primitive) {
  return primitive == Primitive::Elimination ? s.M > 0 : (primitive == Primitive::Redistribution && s.M == 0);
}

// Evaluates the reward on every grid sample (and the midpoint) of every
// in-domain subspace, refines the best sample of each subspace by numeric
// gradient ascent clamped to the subspace, and returns the overall argmax.
// Ties prefer the subspace midpoint, then smaller |theta|, smaller grasp
// index and smaller cable id. `reward(slot, eval, primitive)` is the seam for
// alternative objectives.
template <class RewardFn>
PlanResult optimize_action(const PlanningContext& ctx, std::span<const ActionSubspace> subspaces, Primitive primitive,
                           RewardFn&& reward) {
  const auto& cfg = ctx.config();
  struct Best {
    double reward{-std::numeric_limits<double>::infinity()};
    double theta{0.0};
    std::size_t slot{0};
    const ActionSubspace* sub{nullptr};
    CandidateEval eval;
  };
  std::optional<Best> overall;
  auto better_overall = [](const Best& a, const Best& b) {
    if (a.reward != b.reward) return a.reward > b.reward;
    return std::make_tuple(std::abs(a.theta), a.sub->grasp_index, a.sub->cable_id) <
           std::make_tuple(std::abs(b.theta), b.sub->grasp_index, b.sub->cable_id);
  };

  for (const auto& sub : subspaces) {
    if (!in_domain(sub, primitive)) continue;
    const std::size_t slot = ctx.slot_of(sub.cable_id);
    auto score = [&](double theta) -> std::optional<std::pair<double, CandidateEval>> {
      auto ev = ctx.evaluate(slot, sub.grasp_index, theta);
      if (!ev.validity.ok || ev.M != sub.M) return std::nullopt;
      const double r = reward(slot, ev, primitive);
      return std::make_pair(r, std::move(ev));
    };

    std::optional<Best> local;
    const double mid = sub.midpoint();
    auto offer = [&](double theta) {
      auto s = score(theta);
      if (!s) return;
      const bool take = !local || s->first > local->reward ||
                        (s->first == local->reward && std::abs(theta - mid) < std::abs(local->theta - mid));
      if (take) local = Best{s->first, theta, slot, &sub, std::move(s->second)};
    };
    for (int k = sub.sample_lo; k <= sub.sample_hi; ++k) offer(ctx.theta_at(k));
    offer(mid);
    if (!local) continue;

    // Sign-of-gradient ascent with a halving step, clamped to the interval.
    double step = cfg.theta_grid / 2.0;
    const double h = cfg.refine_step;
    for (int it = 0; it < cfg.refine_iters && step > 1e-9 && sub.theta_hi > sub.theta_lo; ++it) {
      const double theta = local->theta;
      const auto up = score(std::min(theta + h, sub.theta_hi));
      const auto down = score(std::max(theta - h, sub.theta_lo));
      const double r_up = up ? up->first : -std::numeric_limits<double>::infinity();
      const double r_down = down ? down->first : -std::numeric_limits<double>::infinity();
      if (!up && !down) break;
      const double grad = r_up - r_down;
      if (grad == 0.0) break;
      const double cand = std::clamp(theta + (grad > 0.0 ? step : -step), sub.theta_lo, sub.theta_hi);
      auto s = score(cand);
      if (s && s->first > local->reward) {
        local = Best{s->first, cand, slot, &sub, std::move(s->second)};
      } else {
        step /= 2.0;
      }
    }
    if (!overall || better_overall(*local, *overall)) overall = std::move(local);
  }
  if (!overall) throw Error(ErrorKind::NoCandidateActions, std::string(to_string(primitive)));

  PlanResult out;
  out.primitive = primitive;
  const auto& g = ctx.graph(overall->slot);
  out.action = Action{g.cable_id, g.nodes[overall->sub->grasp_index].id, overall->theta};
  out.geometry = overall->eval.geo;
  out.M = overall->eval.M;
  out.reward = overall->reward;
  out.lift = lift_height(out.geometry.pivot, out.geometry.grasp, out.geometry.place,
                         cfg.transition.meters_per_pixel);
  out.predicted = predict(ctx.state(), out.action, cfg.transition);
  return out;
}

inline PlanResult optimize_action(const PlanningContext& ctx, std::span<const ActionSubspace> subspaces,
                                  Primitive primitive) {
  return optimize_action(ctx, subspaces, primitive, PrimitiveReward{&ctx});
}

// One full planning step: enumerate, select the primitive, optimize.
struct PlanStep {
  Primitive primitive{Primitive::Done};
  std::vector<ActionSubspace> subspaces;
  std::optional<PlanResult> result;
  double seconds{0.0};
};

inline PlanStep plan(const CableState& state, const PlannerConfig& cfg, bool allow_redistribution = true) {
  const auto t0 = std::chrono::steady_clock::now();
  PlanStep step;
  const PlanningContext ctx(state, cfg);
  step.subspaces = enumerate_subspaces(ctx);
  step.primitive = select_primitive(step.subspaces, state);
  if (step.primitive == Primitive::Redistribution && !allow_redistribution)
    throw Error(ErrorKind::Deadlock, "no elimination action and redistribution disabled");
  if (step.primitive != Primitive::Done) {
    try {
      step.result = optimize_action(ctx, step.subspaces, step.primitive);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NoCandidateActions) throw Error(ErrorKind::Deadlock, e.what());
      throw;
    }
  }
  step.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return step;
}

}  // namespace unweave
