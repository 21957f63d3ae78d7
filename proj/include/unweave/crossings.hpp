#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <tuple>
#include <vector>

#include "unweave/geometry.hpp"

namespace unweave {

// A polyline tagged with the cable it belongs to.
struct CablePolyline {
  int cable_id{0};
  std::span<const Vec2> points;
};

// Transversal intersection between two distinct cables. `cable_a < cable_b`;
// arc positions are measured from the first vertex of each polyline.
struct GeometricCrossing {
  int cable_a{0};
  int cable_b{0};
  Vec2 point{};
  std::size_t segment_a{0};
  std::size_t segment_b{0};
  double arc_a{0.0};
  double arc_b{0.0};
};

namespace detail {

struct SweepSegment {
  Box box;
  std::size_t polyline{0};
  std::size_t index{0};  // first vertex of the segment
  double arc{0.0};       // arc length at the first vertex
  double length{0.0};
};

// Keeps the first hit (by arc along cable_a) of every cluster closer than
// `merge_radius` on the same cable pair. Input must be sorted by
// (cable_a, cable_b, arc_a).
inline std::vector<GeometricCrossing> merge_close_hits(std::vector<GeometricCrossing> hits, double merge_radius) {
  std::vector<GeometricCrossing> out;
  out.reserve(hits.size());
  for (const auto& h : hits) {
    bool merged = false;
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
      if (it->cable_a != h.cable_a || it->cable_b != h.cable_b) break;
      if (distance(it->point, h.point) < merge_radius) {
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(h);
  }
  return out;
}

}  // namespace detail

// All intersections between polylines of distinct cables, found with a
// sort-and-sweep over segment bounding boxes. Points within `merge_radius`
// on the same cable pair collapse to one crossing. Segments of the same cable
// are never tested against each other. Throws DegenerateOverlapError when two
// cables share a collinear stretch.
inline std::vector<GeometricCrossing> geometric_crossings(std::span<const CablePolyline> polylines,
                                                          double merge_radius) {
  std::vector<detail::SweepSegment> segs;
  for (std::size_t p = 0; p < polylines.size(); ++p) {
    const auto pts = polylines[p].points;
    double arc = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double len = distance(pts[i - 1], pts[i]);
      segs.push_back({bounding_box(pts[i - 1], pts[i]), p, i - 1, arc, len});
      arc += len;
    }
  }
  std::sort(segs.begin(), segs.end(), [](const auto& a, const auto& b) {
    return std::tie(a.box.x_min, a.polyline, a.index) < std::tie(b.box.x_min, b.polyline, b.index);
  });

  std::vector<GeometricCrossing> hits;
  std::vector<const detail::SweepSegment*> active;
  for (const auto& seg : segs) {
    std::erase_if(active, [&](const detail::SweepSegment* s) { return s->box.x_max < seg.box.x_min; });
    for (const auto* other : active) {
      if (polylines[other->polyline].cable_id == polylines[seg.polyline].cable_id) continue;
      if (other->box.y_max < seg.box.y_min || seg.box.y_max < other->box.y_min) continue;
      const auto& first = polylines[other->polyline].cable_id < polylines[seg.polyline].cable_id ? *other : seg;
      const auto& second = &first == other ? seg : *other;
      const auto pa = polylines[first.polyline].points;
      const auto pb = polylines[second.polyline].points;
      const auto hit = intersect_segments(pa[first.index], pa[first.index + 1], pb[second.index], pb[second.index + 1]);
      if (!hit) continue;
      hits.push_back({polylines[first.polyline].cable_id, polylines[second.polyline].cable_id, hit->point,
                      first.index, second.index, first.arc + hit->t * first.length,
                      second.arc + hit->u * second.length});
    }
    active.push_back(&seg);
  }

  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return std::tie(a.cable_a, a.cable_b, a.arc_a, a.arc_b) < std::tie(b.cable_a, b.cable_b, b.arc_a, b.arc_b);
  });
  return detail::merge_close_hits(std::move(hits), merge_radius);
}

}  // namespace unweave
