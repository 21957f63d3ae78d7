#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"

using namespace unweave;

namespace {

// Independent crossing count over every pair of dense world segments.
int brute_force_crossings(const World& w) {
  int n = 0;
  for (std::size_t a = 0; a < w.cables.size(); ++a)
    for (std::size_t b = a + 1; b < w.cables.size(); ++b) {
      const auto& P = w.cables[a].polyline;
      const auto& Q = w.cables[b].polyline;
      for (std::size_t i = 0; i + 1 < P.size(); ++i)
        for (std::size_t j = 0; j + 1 < Q.size(); ++j) {
          const Vec2 p0 = P[i], p1 = P[i + 1], q0 = Q[j], q1 = Q[j + 1];
          auto orient = [](Vec2 o, Vec2 x, Vec2 y) { return (x.x - o.x) * (y.y - o.y) - (x.y - o.y) * (y.x - o.x); };
          const double d1 = orient(p0, p1, q0), d2 = orient(p0, p1, q1), d3 = orient(q0, q1, p0), d4 = orient(q0, q1, p1);
          // proper crossings only; generated worlds never cross at a vertex
          if ((d1 > 0) != (d2 > 0) && d1 != 0 && d2 != 0 && (d3 > 0) != (d4 > 0) && d3 != 0 && d4 != 0) ++n;
        }
    }
  return n;
}

const WorldCable& cable(const World& w, int id) { return *w.find(id); }

}  // namespace

TEST(Generate, ExactCrossingCount) {
  const auto w = generate_world({2, 2, 7});
  EXPECT_EQ(brute_force_crossings(w), 2);
  EXPECT_EQ(w.crossings.size(), 2u);
  EXPECT_TRUE(validate_world(w).empty());
  for (const auto& c : w.cables) EXPECT_EQ(c.polyline.back().x, w.workspace.fixed_edge_x());
}

TEST(Generate, GridConfigurations) {
  for (const auto& [nc, nx] : standard_grid())
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto w = generate_world({nc, nx, seed});
      EXPECT_EQ(static_cast<int>(w.cables.size()), nc);
      EXPECT_EQ(brute_force_crossings(w), nx);
      for (const auto& is : validate_world(w)) ADD_FAILURE() << is.code << " " << is.detail;
    }
}

TEST(Generate, DisjointCables) {
  const auto w = generate_world({2, 0, 3});
  EXPECT_EQ(brute_force_crossings(w), 0);
  EXPECT_TRUE(w.crossings.empty());
}

TEST(Generate, DeterministicPerSeed) {
  EXPECT_EQ(world_to_json(generate_world({3, 4, 19})).dump(), world_to_json(generate_world({3, 4, 19})).dump());
  EXPECT_NE(world_to_json(generate_world({3, 4, 19})).dump(), world_to_json(generate_world({3, 4, 20})).dump());
}

TEST(Generate, BudgetExceeded) {
  GeneratorConfig cfg;
  cfg.attempt_budget = 1;
  try {
    for (std::uint64_t seed = 0; seed < 20; ++seed) generate_world({3, 5, seed}, cfg);
    FAIL() << "a single attempt never fails for 20 seeds";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GenerationBudgetExceeded);
  }
}

TEST(WorldJson, RoundTrip) {
  const auto w = generate_world({3, 3, 2});
  const auto back = world_from_json(world_to_json(w));
  EXPECT_EQ(world_to_json(back).dump(), world_to_json(w).dump());
  EXPECT_THROW(world_from_json(nlohmann::json::parse(R"({"scale": 0.002})")), Error);
}

TEST(Render, StraightCableArea) {
  const auto w = fixtures::world_from_px({fixtures::dense_line({420, 240}, {20, 240})});
  const auto r = render(w);
  const double stroke = w.cables[0].width_m / w.scale;
  EXPECT_NEAR(r.painted[0], 400.0 * stroke, 0.05 * 400.0 * stroke);
}

TEST(Render, UnderCableLosesOneDiskSlice) {
  // perpendicular crossing: the under stroke (width 6) inside a disk of radius
  // 6 has area 2 * (2 * (1.5 * sqrt(27) + 18 * asin(0.5))) = 68.9
  const auto red = fixtures::dense_line({420, 240}, {20, 240});
  const auto yellow = fixtures::dense_line({200, 60}, {200, 420});
  const auto both = render(fixtures::world_from_px({red, yellow}, {0}));
  const auto alone = render(fixtures::world_from_px({red, fixtures::dense_line({20, 20}, {20, 21})}));
  const auto yellow_alone = render(fixtures::world_from_px({fixtures::dense_line({600, 20}, {600, 21}), yellow}));
  const double expected = 2.0 * (2.0 * (1.5 * std::sqrt(27.0) + 18.0 * std::asin(0.5)));
  EXPECT_NEAR(expected, 68.88, 0.01);
  EXPECT_NEAR(yellow_alone.painted[1] - both.painted[1], expected, 0.15 * expected);
  EXPECT_GE(both.painted[0], alone.painted[0]);
}

TEST(Render, Deterministic) {
  const auto w = generate_world({3, 5, 4});
  EXPECT_EQ(render(w).image.pixels(), render(w).image.pixels());
}

TEST(Execute, ZeroPhysicsMatchesPrediction) {
  const PlannerConfig cfg;
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 10; ++seed) {
    const auto w = generate_world({3, 4, seed});
    const auto s = state_from_world(w);
    PlanStep step;
    try {
      step = plan(s, cfg);
    } catch (const Error&) {
      continue;
    }
    const auto& r = *step.result;
    const auto next = execute(w, r.geometry, PhysicsConfig{});
    EXPECT_EQ(geometric_crossing_count(next), static_cast<int>(count_crossings(r.predicted)));
    // over/under agrees crossing by crossing
    for (const auto& [id, rec] : r.predicted.crossings) {
      const WorldCrossing* best = nullptr;
      for (const auto& x : next.crossings)
        if (!best || distance(x.point / next.scale, rec.pos) < distance(best->point / next.scale, rec.pos)) best = &x;
      ASSERT_NE(best, nullptr);
      EXPECT_LT(distance(best->point / next.scale, rec.pos), 3.0);
      EXPECT_EQ(best->over, rec.over);
    }
    for (const auto& c : w.cables) {
      const double before = polyline_length(c.polyline), after = polyline_length(cable(next, c.cable_id).polyline);
      EXPECT_NEAR(after, before, 1e-3 * before);
    }
    ++checked;
  }
}

TEST(Execute, NoiseCausesSomeMismatch) {
  const PlannerConfig cfg;
  const PhysicsConfig noisy{0.002, 0.0};
  int actions = 0, mismatches = 0;
  for (std::uint64_t seed = 0; actions < 100; ++seed) {
    const auto w = generate_world({3, 3 + static_cast<int>(seed % 3), seed});
    const auto s = state_from_world(w);
    PlanStep step;
    try {
      step = plan(s, cfg);
    } catch (const Error&) {
      continue;
    }
    const auto next = execute(w, step.result->geometry, noisy, seed);
    if (geometric_crossing_count(next) != static_cast<int>(count_crossings(step.result->predicted))) ++mismatches;
    ++actions;
  }
  EXPECT_GT(mismatches, 0);
  EXPECT_LT(mismatches, 50);
}

TEST(Execute, FullBleedKeepsTailShape) {
  // L-shaped cable: tail (300,350) -> (300,100), then straight to the edge
  const Polyline px = [] {
    Polyline p = fixtures::dense_line({300, 350}, {300, 100});
    const auto rest = sample_segment({300, 100}, {20, 100}, 3.0);
    p.insert(p.end(), rest.begin(), rest.end());
    return p;
  }();
  const auto w = fixtures::world_from_px({px});
  const auto s = state_from_world(w);
  const auto& g = s.graphs[0];
  std::size_t gi = 0;
  for (std::size_t i = 1; i < g.nodes.size(); ++i)
    if (g.nodes[i].pos.y == 100.0 && std::abs(g.nodes[i].pos.x - 200) < std::abs(g.nodes[gi].pos.x - 200)) gi = i;
  const auto geo = action_geometry(g, gi, 0.4, TransitionConfig{});
  ASSERT_TRUE(geo.tail_bent);
  const auto next = execute(w, geo, PhysicsConfig{0.0, 1.0});
  const auto P = w.polyline_px(w.cables[0]);
  const auto Q = next.polyline_px(next.cables[0]);
  // g and p measured along the dense cable
  const double arc_c = project_onto_polyline(geo.pivot, P).arc;
  const double arc_g = project_onto_polyline(geo.grasp, P).arc;
  const Vec2 p_w = geo.pivot + normalized(geo.place - geo.pivot) * (arc_c - arc_g);
  const Vec2 shift = p_w - point_at_arc(P, arc_g);
  const Polyline old_tail = slice_by_arc(P, 0.0, arc_g);
  const auto q_arc = cumulative_length(Q);
  for (std::size_t i = 0; i < Q.size() && q_arc[i] < arc_g - 1e-6; ++i)
    EXPECT_LE(point_polyline_distance(Q[i] - shift, old_tail), 1e-6) << i;
  EXPECT_LE(distance(Q.front(), P.front() + shift), 1e-6);
}

TEST(Execute, RejectsBadPhysics) {
  const auto w = generate_world({2, 2, 1});
  const auto s = state_from_world(w);
  const auto& g = s.graphs[0];
  const auto geo = action_geometry(g, grasp_candidates(g, pivot_index(g)).front(), 0.0, TransitionConfig{});
  EXPECT_THROW(execute(w, geo, PhysicsConfig{-1.0, 0.0}), Error);
  EXPECT_THROW(execute(w, geo, PhysicsConfig{0.0, 1.5}), Error);
}

TEST(StateFromWorld, Invariants) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto w = generate_world({3, 5, seed});
    const auto s = state_from_world(w);
    EXPECT_EQ(count_crossings(s), 5u);
    for (const auto& is : validate_state(s)) ADD_FAILURE() << is.code << " " << is.detail;
  }
}

TEST(Presets, OrderedByElasticity) {
  EXPECT_GT(physics_preset(Stiffness::Electric).elasticity_bleed, physics_preset(Stiffness::Shoelace).elasticity_bleed);
  EXPECT_EQ(physics_preset(Stiffness::Electric).elasticity_bleed, 0.15);
  EXPECT_EQ(physics_preset(Stiffness::Shoelace).elasticity_bleed, 0.05);
  EXPECT_EQ(stiffness_from_string("electric"), Stiffness::Electric);
  EXPECT_THROW(stiffness_from_string("wire"), Error);
}
