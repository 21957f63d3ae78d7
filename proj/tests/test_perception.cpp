#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace unweave;
using fixtures::dense_line;
using fixtures::world_from_px;

namespace {

CableMask band_mask(int x0, int x1, int y0, int y1) {
  CableMask m{0, "red", 640, 480, std::vector<std::uint8_t>(640 * 480, 0), 0};
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      m.bits[static_cast<std::size_t>(y) * 640 + x] = 1;
      ++m.pixel_count;
    }
  return m;
}

void add_band(CableMask& m, int x0, int x1, int y0, int y1) {
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      auto& b = m.bits[static_cast<std::size_t>(y) * 640 + x];
      if (!b) ++m.pixel_count;
      b = 1;
    }
}

PerceptionConfig red_only() {
  PerceptionConfig c;
  c.palette = {*find_color(default_palette(), "red")};
  return c;
}

}  // namespace

TEST(Segmentation, SolidRedStroke) {
  Image img(640, 480, Rgb{195, 195, 195});
  const Rgb red = find_color(default_palette(), "red")->rgb;
  for (int y = 200; y < 206; ++y)
    for (int x = 50; x < 350; ++x) img.at(x, y) = red;
  const auto masks = segment_by_color(img, red_only());
  ASSERT_EQ(masks.size(), 1u);
  EXPECT_EQ(masks[0].pixel_count, 6 * 300);
  EXPECT_TRUE(masks[0].at(100, 203));
  EXPECT_FALSE(masks[0].at(100, 210));
}

TEST(Segmentation, MissingColorNamed) {
  Image img(640, 480, Rgb{195, 195, 195});
  const Rgb red = find_color(default_palette(), "red")->rgb;
  for (int y = 200; y < 206; ++y)
    for (int x = 50; x < 350; ++x) img.at(x, y) = red;
  PerceptionConfig cfg = red_only();
  cfg.palette.push_back(*find_color(default_palette(), "yellow"));
  try {
    segment_by_color(img, cfg);
    FAIL() << "expected cable not visible";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CableNotVisible);
    EXPECT_EQ(std::string(e.what()), "cable not visible: yellow");
  }
}

TEST(Segmentation, SmallSpecklesRemoved) {
  Image img(640, 480, Rgb{195, 195, 195});
  const Rgb red = find_color(default_palette(), "red")->rgb;
  for (int y = 200; y < 206; ++y)
    for (int x = 50; x < 350; ++x) img.at(x, y) = red;
  std::mt19937 rng(3);
  for (int k = 0; k < 200; ++k) img.at(static_cast<int>(rng() % 640), static_cast<int>(rng() % 190)) = red;
  EXPECT_EQ(segment_by_color(img, red_only())[0].pixel_count, 6 * 300);
}

TEST(Segmentation, MaskCountsTrackPaintedPixels) {
  const World w = generate_world({2, 2, 7});
  const auto r = render(w);
  const auto masks = segment_by_color(r.image, perception_config_for(w));
  ASSERT_EQ(masks.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(masks[i].pixel_count, r.painted[i], 0.1 * r.painted[i]);
    int set = 0;
    for (auto b : masks[i].bits) set += b;
    EXPECT_EQ(set, masks[i].pixel_count);
  }
  for (std::size_t k = 0; k < masks[0].bits.size(); ++k) EXPECT_FALSE(masks[0].bits[k] && masks[1].bits[k]);
}

TEST(ClassifyWindow, StraightCableIsRegular) {
  const auto m = band_mask(0, 639, 237, 243);
  EXPECT_EQ(classify_window(m, {{300, 240}, 35, {1, 0}}, {}), NodeKind::Regular);
}

TEST(ClassifyWindow, TwoFragmentsAreUnderCrossing) {
  auto m = band_mask(0, 294, 237, 243);
  add_band(m, 306, 639, 237, 243);
  EXPECT_EQ(classify_window(m, {{300, 240}, 35, {1, 0}}, {}), NodeKind::UnderCrossing);
}

TEST(ClassifyWindow, TipWithEmptyAdvanceIsEndpoint) {
  const auto m = band_mask(0, 300, 237, 243);
  EXPECT_EQ(classify_window(m, {{295, 240}, 35, {1, 0}}, {}), NodeKind::Endpoint);
}

TEST(ClassifyWindow, FragmentAheadMeansUnderCrossing) {
  // a gap right past the window edge: the advanced window sees both sides
  auto m = band_mask(0, 300, 237, 243);
  add_band(m, 312, 639, 237, 243);
  EXPECT_EQ(classify_window(m, {{290, 240}, 35, {1, 0}}, {}), NodeKind::UnderCrossing);
}

TEST(ClassifyWindow, EmptyWindow) {
  const auto m = band_mask(0, 100, 237, 243);
  EXPECT_THROW(classify_window(m, {{400, 240}, 35, {1, 0}}, {}), Error);
}

TEST(ClassifyWindow, Deterministic) {
  const World w = generate_world({3, 4, 1});
  const auto masks = segment_by_color(render(w).image, perception_config_for(w));
  for (const auto& g : state_from_world(w).graphs)
    for (const auto& n : g.nodes) {
      const TraceWindow win{n.pos, 35, {1, 0}};
      try {
        const auto a = classify_window(masks[g.cable_id], win, {});
        EXPECT_EQ(a, classify_window(masks[g.cable_id], win, {}));
      } catch (const Error&) {
      }
    }
}

TEST(Trace, StraightHorizontalCable) {
  const World w = world_from_px({dense_line({320, 240}, {20, 240})});
  const auto cfg = perception_config_for(w);
  const auto masks = segment_by_color(render(w).image, cfg);
  const auto nodes = trace_cable(masks[0], {20, 240}, cfg);
  // 300 px at 17 px steps
  EXPECT_GE(nodes.size(), 17u);
  EXPECT_LE(nodes.size(), 20u);
  EXPECT_EQ(nodes.front().kind, NodeKind::Endpoint);
  EXPECT_EQ(nodes.back().kind, NodeKind::Endpoint);
  for (std::size_t i = 1; i + 1 < nodes.size(); ++i) EXPECT_EQ(nodes[i].kind, NodeKind::Regular);
  // window means of a horizontal stroke sit on its centerline
  for (const auto& n : nodes) EXPECT_NEAR(n.pos.y, 240.0, 1.0);
  EXPECT_GT(nodes.front().pos.x, nodes.back().pos.x);  // v_free first
}

TEST(Trace, SingleOcclusionGivesOneUnderCrossing) {
  // vertical cable under a horizontal one
  const World w = world_from_px({dense_line({400, 240}, {20, 240}), dense_line({200, 60}, {200, 420})}, {0});
  const auto cfg = perception_config_for(w);
  const auto masks = segment_by_color(render(w).image, cfg);
  const auto nodes = trace_cable(masks[1], {200, 420}, cfg);
  int unders = 0;
  for (const auto& n : nodes) unders += n.kind == NodeKind::UnderCrossing;
  EXPECT_EQ(unders, 1);
}

TEST(Trace, DotIsTooShort) {
  Image img(640, 480, Rgb{195, 195, 195});
  fill_disk(img, {100, 100}, 4.0, find_color(default_palette(), "red")->rgb);
  PerceptionConfig cfg = red_only();
  const auto masks = segment_by_color(img, cfg);
  try {
    trace_cable(masks[0], {100, 100}, cfg);
    FAIL() << "expected cable too short";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CableTooShort);
  }
}

TEST(Refine, OneCrossingRegistry) {
  const World w = world_from_px({dense_line({400, 240}, {20, 240}), dense_line({200, 60}, {200, 420})}, {1});
  const auto s = build_state(render(w).image, perception_config_for(w));
  ASSERT_EQ(s.crossings.size(), 1u);
  const auto& rec = s.crossings.begin()->second;
  EXPECT_EQ(rec.over, 1);
  EXPECT_EQ(rec.under, 0);
  EXPECT_NEAR(rec.pos.x, 200.0, 17.5);
  EXPECT_NEAR(rec.pos.y, 240.0, 17.5);
}

TEST(Refine, NoUnderCrossingsIsIdentity) {
  std::vector<TracedCable> traced;
  traced.push_back({0, "red", fixtures::nodes_along({200, 50}, {20, 50}, 12)});
  traced.push_back({1, "yellow", fixtures::nodes_along({200, 150}, {20, 150}, 12)});
  const auto s = refine_overcrossings(traced, {});
  EXPECT_TRUE(s.crossings.empty());
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < traced[i].nodes.size(); ++k) {
      EXPECT_EQ(s.graphs[i].nodes[k].kind, traced[i].nodes[k].kind);
      EXPECT_EQ(s.graphs[i].nodes[k].pos, traced[i].nodes[k].pos);
    }
}

TEST(Refine, OrphanUnderCrossing) {
  std::vector<TracedCable> traced;
  traced.push_back({0, "red", fixtures::nodes_along({200, 50}, {20, 50}, 12)});
  traced.push_back({1, "yellow", fixtures::nodes_along({200, 250}, {20, 250}, 12)});
  traced[0].nodes[4].kind = NodeKind::UnderCrossing;
  try {
    refine_overcrossings(traced, {});
    FAIL() << "expected orphan undercrossing";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OrphanUndercrossing);
  }
}

TEST(BuildState, CrossingFreeWorld) {
  const World w = world_from_px({dense_line({400, 120}, {20, 120}), dense_line({400, 320}, {20, 320})});
  const auto s = build_state(render(w).image, perception_config_for(w));
  EXPECT_EQ(s.graphs.size(), 2u);
  EXPECT_EQ(count_crossings(s), 0u);
}

TEST(BuildState, TwoCrossingWorldsMatchTruth) {
  int exact = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const World w = generate_world({2, 2, seed});
    const auto s = build_state(render(w).image, perception_config_for(w));
    EXPECT_TRUE(validate_state(s).empty());
    bool ok = count_crossings(s) == 2;
    for (const auto& [id, rec] : s.crossings) {
      const WorldCrossing* truth = nullptr;
      for (const auto& x : w.crossings)
        if (distance(x.point / w.scale, rec.pos) < 17.5) truth = &x;
      ok = ok && truth != nullptr && truth->over == rec.over;
    }
    exact += ok;
  }
  EXPECT_GE(exact, 19);
}

TEST(BuildState, NodesNearCenterlineAndCountTracksLength) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const World w = generate_world({3, 3, seed});
    const auto s = build_state(render(w).image, perception_config_for(w));
    for (const auto& g : s.graphs) {
      const auto truth = w.polyline_px(*w.find(g.cable_id));
      for (const auto& n : g.nodes) EXPECT_LE(point_polyline_distance(n.pos, truth), 17.5) << "seed " << seed;
      const double len = polyline_length(truth);
      EXPECT_NEAR(static_cast<double>(g.nodes.size() - 1) * 17.0, len, 0.15 * len) << "seed " << seed;
    }
  }
}
