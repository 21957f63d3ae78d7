#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"

using namespace unweave;
using fixtures::path_graph;

namespace {

CableState of(std::vector<CableGraph> graphs) {
  CableState s;
  s.graphs = std::move(graphs);
  canonicalize_ids(s);
  return s;
}

PlannerConfig open_table() {
  PlannerConfig cfg;
  cfg.workspace.box_m = Box{-100, -100, 100, 100};
  return cfg;
}

// Direct evaluation of the two reward formulas from their definitions.
struct Oracle {
  double elimination{0.0};
  double redistribution{0.0};
};

Oracle oracle_reward(const CableState& before, const CableState& after, int cable_id, std::size_t grasp_index,
                     const PlannerConfig& cfg) {
  const double s = cfg.transition.meters_per_pixel;
  const CableGraph& old_g = *before.find(cable_id);
  const CableGraph& new_g = *after.find(cable_id);

  double dist = 0.0;
  for (const auto& h : before.graphs) {
    if (h.cable_id == cable_id) continue;
    double sum = 0.0;
    for (const auto& a : new_g.nodes)
      for (const auto& b : h.nodes) {
        const double dx = (a.pos.x - b.pos.x) * s, dy = (a.pos.y - b.pos.y) * s;
        sum += dx * dx + dy * dy;
      }
    dist += sum / (static_cast<double>(new_g.nodes.size()) * static_cast<double>(h.nodes.size()));
  }

  std::size_t c = old_g.nodes.size() - 1;
  for (std::size_t i = 1; i + 1 < old_g.nodes.size(); ++i)
    if (old_g.nodes[i].kind == NodeKind::UnderCrossing) {
      c = i;
      break;
    }
  c -= 1;
  double l_grasp = 0.0, l_tail = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    const double d = std::hypot(old_g.nodes[i + 1].pos.x - old_g.nodes[i].pos.x, old_g.nodes[i + 1].pos.y - old_g.nodes[i].pos.y);
    (i < grasp_index ? l_tail : l_grasp) += d;
  }
  const Vec2 cp = old_g.nodes[c].pos;
  const Vec2 succ = old_g.nodes[c + 1].pos;
  Vec2 place{};
  for (const auto& n : new_g.nodes)
    if (n.id == old_g.nodes[grasp_index].id) place = n.pos;
  const double ux = succ.x - cp.x, uy = succ.y - cp.y, vx = place.x - cp.x, vy = place.y - cp.y;
  const double cosang = (ux * vx + uy * vy) / (std::hypot(ux, uy) * std::hypot(vx, vy));
  const double angle = std::acos(std::clamp(cosang, -1.0, 1.0));
  const double ratio = l_grasp / std::max(l_tail, cfg.transition.resample_step_m / s);
  const int M = static_cast<int>(before.crossings.size()) - static_cast<int>(after.crossings.size());

  double mean = 0.0;
  for (const auto& n : new_g.nodes) mean += n.pos.y / cfg.image_height_px;
  mean /= static_cast<double>(new_g.nodes.size());
  double var = 0.0;
  for (const auto& n : new_g.nodes) var += std::pow(n.pos.y / cfg.image_height_px - mean, 2);
  const double sd = std::sqrt(var / static_cast<double>(new_g.nodes.size()));

  Oracle o;
  o.elimination = cfg.w_dist * dist + cfg.w_curv * angle + cfg.w_cred * ratio + cfg.w_elim * M;
  o.redistribution = -cfg.w_std * sd + cfg.w_curv * angle + cfg.w_cred * ratio;
  return o;
}

struct RandomAction {
  Action action;
  std::size_t grasp_index;
};

std::optional<RandomAction> random_action(const CableState& s, std::mt19937_64& rng, const TransitionConfig& tc) {
  std::vector<std::pair<int, std::size_t>> pool;
  for (const auto& g : s.graphs) {
    std::size_t c;
    try {
      c = pivot_index(g);
    } catch (const Error&) {
      continue;
    }
    for (auto gi : grasp_candidates(g, c)) pool.emplace_back(g.cable_id, gi);
  }
  if (pool.empty()) return std::nullopt;
  const auto [cid, gi] = pool[rng() % pool.size()];
  const double th = std::uniform_real_distribution<double>(tc.theta_min, tc.theta_max)(rng);
  return RandomAction{{cid, s.find(cid)->nodes[gi].id, th}, gi};
}

}  // namespace

TEST(Lift, ThreeFourFive) {
  const auto h = lift_height({0, 0}, {250, 0}, {150, 0}, 1.0 / 500.0);
  EXPECT_EQ(h.h, 0.4);
  EXPECT_FALSE(h.taut);
  EXPECT_DOUBLE_EQ(lift_height({0, 0}, {0.5, 0}, {0, 0.3}, 1.0).h, 0.4);
  EXPECT_EQ(lift_height({0, 0}, {3, 4}, {5, 0}, 1.0).h, 0.0);
}

TEST(Lift, TautCable) {
  const auto h = lift_height({0, 0}, {100, 0}, {0, 120}, 1.0 / 500.0);
  EXPECT_EQ(h.h, 0.0);
  EXPECT_TRUE(h.taut);
}

TEST(Lift, PythagoreanIdentity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> xy(0.0, 640.0), unit(0.0, 1.0);
  const double s = 1.0 / 500.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec2 c{xy(rng), xy(rng)}, g{xy(rng), xy(rng)};
    const double r = distance(c, g) * unit(rng);
    const double a = 2.0 * std::numbers::pi * unit(rng);
    const Vec2 p = c + Vec2{std::cos(a), std::sin(a)} * r;
    const auto h = lift_height(c, g, p, s);
    const double cp = distance(c * s, p * s), cg = distance(c * s, g * s);
    if (h.taut) continue;
    EXPECT_NEAR(h.h * h.h + cp * cp, cg * cg, 1e-9);
  }
}

TEST(Reward, HandExample) {
  PlannerConfig cfg;
  cfg.transition.meters_per_pixel = 1.0;
  const Polyline moved{{0, 0}, {2, 0}};
  const Polyline h{{1, std::sqrt(3.0)}};
  const std::vector<std::span<const Vec2>> others{h};
  ActionGeometry geo;
  geo.pivot = {0, 0};
  geo.pivot_succ = {-1, 0};
  geo.place = {2, 0};
  geo.l_grasp_px = 1.0;
  geo.l_tail_px = 1.0;
  const auto t = reward_terms(moved, others, geo, 1, cfg);
  EXPECT_NEAR(t.distance, 4.0, 1e-12);
  EXPECT_NEAR(t.curvature, std::numbers::pi, 1e-12);
  EXPECT_NEAR(combine_reward(t, Primitive::Elimination, cfg), 448.16, 0.005);
}

TEST(Reward, ZeroWeights) {
  PlannerConfig cfg;
  cfg.w_dist = cfg.w_curv = cfg.w_cred = cfg.w_std = cfg.w_elim = 0.0;
  const auto s = fixtures::two_cable_cross();
  for (double th : {-1.0, 0.0, 0.8}) {
    const Action a{0, s.graphs[0].nodes[2].id, th};
    const auto next = predict(s, a, cfg.transition);
    const auto geo = action_geometry(s, a, cfg.transition);
    EXPECT_EQ(reward_elimination(s, next, geo, cfg), 0.0);
    EXPECT_EQ(reward_redistribution(s, next, geo, cfg), 0.0);
  }
}

TEST(Reward, SpreadExample) {
  PlannerConfig cfg;
  const Polyline moved{{0, 0.2 * 480}, {10, 0.4 * 480}, {20, 0.6 * 480}};
  ActionGeometry geo;
  geo.pivot = {0, 0};
  geo.pivot_succ = {-1, 0};
  geo.place = {1, 0};
  geo.l_grasp_px = geo.l_tail_px = 1.0;
  const auto t = reward_terms(moved, {}, geo, 0, cfg);
  EXPECT_NEAR(t.spread, 0.1633, 5e-5);
  EXPECT_NEAR(cfg.w_std * t.spread, 489.9, 0.05);
  auto flat = t;
  flat.spread = 0.0;
  EXPECT_GT(combine_reward(flat, Primitive::Redistribution, cfg), combine_reward(t, Primitive::Redistribution, cfg));
  const Polyline level{{0, 100}, {10, 100}, {20, 100}};
  EXPECT_EQ(reward_terms(level, {}, geo, 0, cfg).spread, 0.0);
}

TEST(Reward, DistanceGrowsWithSeparation) {
  PlannerConfig cfg;
  const Polyline moved{{100, 100}, {120, 110}, {140, 130}};
  const Polyline near{{150, 200}, {170, 210}};
  Polyline far;
  for (auto p : near) far.push_back(Vec2{120, 110} + (p - Vec2{120, 110}) * 1.5);
  ActionGeometry geo;
  geo.pivot_succ = {-1, 0};
  geo.place = {1, 0};
  geo.l_grasp_px = geo.l_tail_px = 1.0;
  const std::vector<std::span<const Vec2>> a{near}, b{far};
  EXPECT_GT(reward_terms(moved, b, geo, 0, cfg).distance, reward_terms(moved, a, geo, 0, cfg).distance);
}

TEST(Reward, MatchesDirectEvaluation) {
  std::mt19937_64 rng(21);
  const PlannerConfig cfg;
  int cases = 0;
  for (std::uint64_t seed = 0; cases < 100; ++seed) {
    const auto s = state_from_world(generate_world({2 + static_cast<int>(seed % 2), 3, seed}));
    const auto ra = random_action(s, rng, cfg.transition);
    if (!ra) continue;
    const auto next = predict(s, ra->action, cfg.transition);
    const auto geo = action_geometry(s, ra->action, cfg.transition);
    const auto o = oracle_reward(s, next, ra->action.cable_id, ra->grasp_index, cfg);
    EXPECT_NEAR(reward_elimination(s, next, geo, cfg), o.elimination, 1e-9);
    EXPECT_NEAR(reward_redistribution(s, next, geo, cfg), o.redistribution, 1e-9);
    auto t = detail::reward_terms_from_states(s, next, geo, cfg);
    const double r1 = combine_reward(t, Primitive::Elimination, cfg);
    ++t.M;
    EXPECT_EQ(combine_reward(t, Primitive::Elimination, cfg) - r1, cfg.w_elim);
    ++cases;
  }
}

TEST(Validity, IdentityOnSeparatedScene) {
  const auto s = of({path_graph(0, {{300, 100}, {20, 100}}), path_graph(1, {{300, 300}, {20, 300}})});
  EXPECT_TRUE(is_valid(s, {0, s.graphs[0].nodes[3].id, 0.0}, PlannerConfig{}).ok);
}

TEST(Validity, GraspTooCloseToOtherCable) {
  auto red = path_graph(0, {{300, 240}, {20, 240}});
  const Vec2 g = red.nodes[4].pos;
  auto s = of({red, path_graph(1, {g + Vec2{0, 5}, {g.x, 400}, {20, 400}})});
  const auto v = is_valid(s, {0, s.graphs[0].nodes[4].id, 0.2}, PlannerConfig{});
  EXPECT_FALSE(v.ok);
  EXPECT_EQ(v.reason, "clearance");
}

TEST(Validity, BrokenInTheMiddle) {
  // l_grasp 460 px, l_tail 380 px (bent); a quarter turn sends c->p out of the
  // top of the workspace while the tail comes back in
  const auto s = of({path_graph(0, {{500, 60}, {500, 440}, {40, 440}, {23, 440}})});
  const auto& g = s.graphs[0];
  std::size_t gi = 0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (g.nodes[i].pos == Vec2{500, 440}) gi = i;
  const Action a{0, g.nodes[gi].id, std::numbers::pi / 2};
  const auto next = predict(s, a, PlannerConfig{}.transition);
  ASSERT_TRUE(PlannerConfig{}.workspace.contains_px(next.graphs[0].nodes.front().pos, 1.0 / 500.0));
  const auto v = is_valid(s, a, PlannerConfig{});
  EXPECT_FALSE(v.ok);
  EXPECT_EQ(v.reason, "broken in the middle");
}

TEST(Validity, FastPathAgreesWithFullCheck) {
  std::mt19937_64 rng(3);
  const PlannerConfig cfg;
  int cases = 0, valid = 0;
  for (std::uint64_t seed = 100; cases < 400; ++seed) {
    const auto s = state_from_world(generate_world({3, 3 + static_cast<int>(seed % 3), seed}));
    const PlanningContext ctx(s, cfg);
    for (int rep = 0; rep < 8; ++rep) {
      const auto ra = random_action(s, rng, cfg.transition);
      if (!ra) break;
      const auto ev = ctx.evaluate(ctx.slot_of(ra->action.cable_id), ra->grasp_index, ra->action.theta);
      const auto full = is_valid(s, ra->action, cfg);
      EXPECT_EQ(ev.validity.ok, full.ok) << ev.validity.reason << " vs " << full.reason;
      if (ev.validity.ok && full.ok) ++valid;
      EXPECT_EQ(ev.M, crossings_eliminated(s, ra->action, cfg.transition));
      ++cases;
    }
  }
  EXPECT_GT(valid, 10);
}

TEST(Subspaces, LoneStraightCable) {
  const auto cfg = open_table();
  const auto s = of({path_graph(0, {{300, 240}, {20, 240}})});
  const auto subs = enumerate_subspaces(s, cfg);
  const auto grasps = grasp_candidates(s.graphs[0], pivot_index(s.graphs[0]));
  ASSERT_EQ(subs.size(), grasps.size());
  const double range = cfg.transition.theta_max - cfg.transition.theta_min;
  for (const auto& sub : subs) {
    EXPECT_EQ(sub.M, 0);
    // a bent tail folds back over the fixed end near the theta bounds
    const auto geo = action_geometry(s.graphs[0], sub.grasp_index, 0.0, cfg.transition);
    EXPECT_GE(sub.theta_hi - sub.theta_lo, (geo.tail_bent ? 0.7 : 0.99) * range);
  }
}

TEST(Subspaces, SingleCrossingMatchesExhaustiveOracle) {
  const PlannerConfig cfg;
  const auto s = fixtures::two_cable_cross();
  const auto subs = enumerate_subspaces(s, cfg);
  const PlanningContext ctx(s, cfg);
  bool over_eliminates = false;
  for (const auto& g : s.graphs) {
    for (auto gi : grasp_candidates(g, pivot_index(g))) {
      for (int k = 0; k < ctx.theta_samples(); ++k) {
        const Action a{g.cable_id, g.nodes[gi].id, ctx.theta_at(k)};
        const bool ok = is_valid(s, a, cfg).ok;
        const int M = crossings_eliminated(s, a, cfg.transition);
        int covering = 0;
        for (const auto& sub : subs)
          if (sub.cable_id == g.cable_id && sub.grasp_index == gi && k >= sub.sample_lo && k <= sub.sample_hi) {
            ++covering;
            EXPECT_EQ(sub.M, M);
          }
        EXPECT_EQ(covering, ok ? 1 : 0);
        if (ok && M == 1 && g.cable_id == 0) over_eliminates = true;
      }
    }
  }
  EXPECT_TRUE(over_eliminates);
  // the under cable pivots before its crossing, so it can never remove it
  for (const auto& sub : subs)
    if (sub.cable_id == 1) {
      EXPECT_LE(sub.M, 0);
    }
}

TEST(Primitive, Selection) {
  const auto crossed = fixtures::two_cable_cross();
  const CableState clear = of({path_graph(0, {{300, 100}, {20, 100}})});
  EXPECT_EQ(select_primitive({}, clear), Primitive::Done);
  std::vector<ActionSubspace> mixed(2);
  mixed[1].M = 1;
  EXPECT_EQ(select_primitive(mixed, crossed), Primitive::Elimination);
  std::vector<ActionSubspace> flat(3);
  EXPECT_EQ(select_primitive(flat, crossed), Primitive::Redistribution);
  try {
    select_primitive({}, crossed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Deadlock);
  }
}

TEST(Optimizer, ConstantRewardReturnsMidpoint) {
  const auto cfg = open_table();
  const auto s = of({path_graph(0, {{300, 240}, {20, 240}})});
  const PlanningContext ctx(s, cfg);
  const auto subs = enumerate_subspaces(ctx);
  const std::vector<ActionSubspace> one{subs[2]};
  const auto r = optimize_action(ctx, one, Primitive::Redistribution,
                                 [](std::size_t, const CandidateEval&, Primitive) { return 1.0; });
  EXPECT_DOUBLE_EQ(r.action.theta, one[0].midpoint());
}

TEST(Optimizer, FindsQuadraticPeak) {
  const auto cfg = open_table();
  const auto s = of({path_graph(0, {{300, 240}, {20, 240}})});
  const PlanningContext ctx(s, cfg);
  const auto subs = enumerate_subspaces(ctx);
  for (double peak : {0.3217, -1.1093, 2.0001}) {
    const auto r = optimize_action(ctx, subs, Primitive::Redistribution,
                                   [peak](std::size_t, const CandidateEval& ev, Primitive) {
                                     return -(ev.geo.theta - peak) * (ev.geo.theta - peak);
                                   });
    EXPECT_LE(std::abs(r.action.theta - peak), cfg.theta_grid / 4);
  }
}

TEST(Optimizer, DominatesGridAndStaysValid) {
  const PlannerConfig cfg;
  int calls = 0;
  for (std::uint64_t seed = 0; calls < 12; ++seed) {
    const auto s = state_from_world(generate_world({3, 3, seed}));
    const PlanningContext ctx(s, cfg);
    const auto subs = enumerate_subspaces(ctx);
    Primitive prim;
    try {
      prim = select_primitive(subs, s);
    } catch (const Error&) {
      continue;
    }
    const auto r = optimize_action(ctx, subs, prim);
    const PrimitiveReward reward{&ctx};
    for (const auto& sub : subs) {
      if (!in_domain(sub, prim)) continue;
      const auto slot = ctx.slot_of(sub.cable_id);
      for (int k = sub.sample_lo; k <= sub.sample_hi; ++k)
        EXPECT_GE(r.reward, reward(slot, ctx.evaluate(slot, sub.grasp_index, ctx.theta_at(k)), prim));
    }
    EXPECT_TRUE(is_valid(s, r.action, cfg).ok);
    EXPECT_EQ(r.M, crossings_eliminated(s, r.action, cfg.transition));
    EXPECT_EQ(r.predicted, predict(s, r.action, cfg.transition));
    ++calls;
  }
}

TEST(Optimizer, Deterministic) {
  const PlannerConfig cfg;
  const auto s = state_from_world(generate_world({3, 4, 7}));
  const auto a = plan(s, cfg);
  const auto b = plan(s, cfg);
  ASSERT_TRUE(a.result && b.result);
  EXPECT_EQ(a.result->action.theta, b.result->action.theta);
  EXPECT_EQ(a.result->action.grasp_node_id, b.result->action.grasp_node_id);
  EXPECT_EQ(a.result->reward, b.result->reward);
}

TEST(Plan, DoneOnCrossingFreeState) {
  const auto s = of({path_graph(0, {{300, 100}, {20, 100}})});
  const auto step = plan(s, PlannerConfig{});
  EXPECT_EQ(step.primitive, Primitive::Done);
  EXPECT_FALSE(step.result);
}
