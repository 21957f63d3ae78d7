#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace unweave {

// Image-frame 2D point or vector: origin top-left, x right, y down.
struct Vec2 {
  double x{0.0};
  double y{0.0};

  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(Vec2 o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {a.x * s, a.y * s}; }
  friend constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
  friend constexpr bool operator==(Vec2 a, Vec2 b) = default;
};

using Polyline = std::vector<Vec2>;

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
constexpr double norm_sq(Vec2 a) { return dot(a, a); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
constexpr double distance_sq(Vec2 a, Vec2 b) { return norm_sq(a - b); }
constexpr Vec2 lerp(Vec2 a, Vec2 b, double t) { return a + (b - a) * t; }

inline Vec2 normalized(Vec2 a) {
  const double n = norm(a);
  if (n == 0.0) return {0.0, 0.0};
  return a / n;
}

// Rotates `v` counter-clockwise by `theta` as seen in the y-up mathematical
// frame. In the y-down image frame this is a clockwise matrix rotation.
inline Vec2 rotate_ccw(Vec2 v, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {v.x * c + v.y * s, -v.x * s + v.y * c};
}

// Unsigned angle between two vectors, in [0, pi].
inline double angle_between(Vec2 a, Vec2 b) {
  return std::atan2(std::abs(cross(a, b)), dot(a, b));
}

// Signed angle that rotates `from` onto `to`, counter-clockwise positive in
// the y-up frame, in (-pi, pi].
inline double signed_angle_ccw(Vec2 from, Vec2 to) {
  // cross() in image coordinates has the opposite sign of the y-up frame.
  return std::atan2(-cross(from, to), dot(from, to));
}

inline double polyline_length(std::span<const Vec2> pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += distance(pts[i - 1], pts[i]);
  return len;
}

// Cumulative arc length at every vertex; front() == 0.
inline std::vector<double> cumulative_length(std::span<const Vec2> pts) {
  std::vector<double> out(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) out[i] = out[i - 1] + distance(pts[i - 1], pts[i]);
  return out;
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = norm_sq(ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

inline double point_polyline_distance(Vec2 p, std::span<const Vec2> pts) {
  if (pts.empty()) return std::numeric_limits<double>::infinity();
  if (pts.size() == 1) return distance(p, pts[0]);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < pts.size(); ++i) best = std::min(best, point_segment_distance(p, pts[i - 1], pts[i]));
  return best;
}

struct PolylineProjection {
  std::size_t segment{0};  // index of the first vertex of the segment
  double t{0.0};           // parameter on the segment, [0, 1]
  double arc{0.0};         // arc length from pts.front()
  Vec2 point{};
  double dist{0.0};
};

inline PolylineProjection project_onto_polyline(Vec2 p, std::span<const Vec2> pts) {
  if (pts.size() < 2) throw std::invalid_argument("project_onto_polyline: need at least two vertices");
  PolylineProjection best;
  best.dist = std::numeric_limits<double>::infinity();
  double arc = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Vec2 a = pts[i - 1];
    const Vec2 ab = pts[i] - a;
    const double len2 = norm_sq(ab);
    const double t = len2 == 0.0 ? 0.0 : std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    const Vec2 q = a + ab * t;
    const double d = distance(p, q);
    const double seg_len = std::sqrt(len2);
    if (d < best.dist) best = {i - 1, t, arc + t * seg_len, q, d};
    arc += seg_len;
  }
  return best;
}

// Point at arc length `s` along the polyline (clamped to its extent).
inline Vec2 point_at_arc(std::span<const Vec2> pts, double s) {
  if (pts.empty()) throw std::invalid_argument("point_at_arc: empty polyline");
  if (s <= 0.0) return pts.front();
  double acc = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double seg = distance(pts[i - 1], pts[i]);
    if (acc + seg >= s) return seg == 0.0 ? pts[i] : lerp(pts[i - 1], pts[i], (s - acc) / seg);
    acc += seg;
  }
  return pts.back();
}

// Sub-polyline between arc lengths [s0, s1], endpoints interpolated.
inline Polyline slice_by_arc(std::span<const Vec2> pts, double s0, double s1) {
  Polyline out;
  if (pts.empty() || s1 < s0) return out;
  out.push_back(point_at_arc(pts, s0));
  double acc = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    acc += distance(pts[i - 1], pts[i]);
    if (acc > s0 && acc < s1) out.push_back(pts[i]);
  }
  out.push_back(point_at_arc(pts, s1));
  return out;
}

// Uniform samples strictly after `from` up to and including `to`, spaced no
// more than `step` apart.
inline Polyline sample_segment(Vec2 from, Vec2 to, double step) {
  const double len = distance(from, to);
  const auto pieces = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / step - 1e-12)));
  Polyline out;
  out.reserve(pieces);
  for (std::size_t i = 1; i < pieces; ++i) out.push_back(lerp(from, to, static_cast<double>(i) / pieces));
  out.push_back(to);
  return out;
}

// Resamples a polyline at uniform arc spacing no larger than `step`,
// keeping both endpoints exactly.
inline Polyline resample_polyline(std::span<const Vec2> pts, double step) {
  Polyline out;
  if (pts.empty()) return out;
  const double len = polyline_length(pts);
  out.push_back(pts.front());
  if (len == 0.0) return out;
  const auto pieces = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / step - 1e-12)));
  for (std::size_t i = 1; i < pieces; ++i) out.push_back(point_at_arc(pts, len * static_cast<double>(i) / pieces));
  out.push_back(pts.back());
  return out;
}

struct Box {
  double x_min{0.0};
  double y_min{0.0};
  double x_max{0.0};
  double y_max{0.0};

  [[nodiscard]] bool contains(Vec2 p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  [[nodiscard]] bool overlaps(const Box& o) const {
    return x_min <= o.x_max && o.x_min <= x_max && y_min <= o.y_max && o.y_min <= y_max;
  }
  [[nodiscard]] double width() const { return x_max - x_min; }
  [[nodiscard]] double height() const { return y_max - y_min; }
};

inline Box bounding_box(Vec2 a, Vec2 b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y)};
}

class DegenerateOverlapError : public std::runtime_error {
 public:
  DegenerateOverlapError() : std::runtime_error("degenerate overlap: collinear shared segment") {}
};

struct SegmentHit {
  double t{0.0};  // parameter on the first segment
  double u{0.0};  // parameter on the second segment
  Vec2 point{};
};

// Intersection of closed segments [a0,a1] and [b0,b1]. Collinear segments
// sharing more than a point throw DegenerateOverlapError.
inline std::optional<SegmentHit> intersect_segments(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
  const Vec2 r = a1 - a0;
  const Vec2 s = b1 - b0;
  const double o1 = cross(r, b0 - a0);
  const double o2 = cross(r, b1 - a0);
  const double o3 = cross(s, a0 - b0);
  const double o4 = cross(s, a1 - b0);

  if (o1 == 0.0 && o2 == 0.0) {
    // Collinear (or a degenerate segment on the line).
    const double rr = norm_sq(r);
    if (rr == 0.0) return std::nullopt;
    double u0 = dot(b0 - a0, r) / rr;
    double u1 = dot(b1 - a0, r) / rr;
    if (u0 > u1) std::swap(u0, u1);
    const double lo = std::max(0.0, u0);
    const double hi = std::min(1.0, u1);
    if (lo > hi) return std::nullopt;
    if (lo < hi) throw DegenerateOverlapError();
    const Vec2 pt = a0 + r * lo;
    const double ss = norm_sq(s);
    return SegmentHit{lo, ss == 0.0 ? 0.0 : dot(pt - b0, s) / ss, pt};
  }
  if ((o1 > 0.0 && o2 > 0.0) || (o1 < 0.0 && o2 < 0.0)) return std::nullopt;
  if ((o3 > 0.0 && o4 > 0.0) || (o3 < 0.0 && o4 < 0.0)) return std::nullopt;

  const double denom = cross(r, s);
  if (denom == 0.0) return std::nullopt;
  const double t = std::clamp(o3 / (o3 - o4), 0.0, 1.0);
  const double u = std::clamp(o1 / (o1 - o2), 0.0, 1.0);
  // Nearly collinear segments give orientation signs that are pure rounding
  // noise; a real hit has both parameters naming the same point.
  const Vec2 pa = a0 + r * t;
  if (!(distance(pa, b0 + s * u) <= 1e-9 * (1.0 + norm(r) + norm(s)))) return std::nullopt;
  return SegmentHit{t, u, pa};
}

}  // namespace unweave
