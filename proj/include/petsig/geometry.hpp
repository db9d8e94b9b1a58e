// Copyright 2026 the petsig authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace petsig {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }

/// Convex quadrilateral vehicle footprint. Corners are kept in
/// counter-clockwise order; construction rejects degenerate shapes.
class OrientedBox {
public:
  /// Accepts corners in either winding; throws std::invalid_argument when the
  /// four points do not form a convex quadrilateral with positive area.
  static OrientedBox from_corners(const std::array<Point2, 4>& corners) {
    OrientedBox box;
    box.corners_ = corners;
    double area2 = 0.0;
    for (int i = 0; i < 4; ++i) {
      area2 += cross(corners[i], corners[(i + 1) % 4]);
    }
    if (area2 < 0.0) {
      box.corners_ = {corners[0], corners[3], corners[2], corners[1]};
    }
    for (int i = 0; i < 4; ++i) {
      const Point2 e0 = box.corners_[(i + 1) % 4] - box.corners_[i];
      const Point2 e1 = box.corners_[(i + 2) % 4] - box.corners_[(i + 1) % 4];
      if (!(cross(e0, e1) > 0.0)) {
        throw std::invalid_argument("box corners are degenerate or non-convex");
      }
    }
    return box;
  }

  const std::array<Point2, 4>& corners() const { return corners_; }

  /// Vertex average; interior by convexity, exact center for rectangles.
  Point2 centroid() const {
    return {0.25 * (corners_[0].x + corners_[1].x + corners_[2].x + corners_[3].x),
            0.25 * (corners_[0].y + corners_[1].y + corners_[2].y + corners_[3].y)};
  }

  double area() const {
    double area2 = 0.0;
    for (int i = 0; i < 4; ++i) {
      area2 += cross(corners_[i], corners_[(i + 1) % 4]);
    }
    return 0.5 * area2;
  }

private:
  OrientedBox() = default;
  std::array<Point2, 4> corners_{};
};

/// Rectangle of the given dimensions centered on `center`. `heading_deg` is
/// measured clockwise from north (+y); the long axis follows the heading.
inline OrientedBox box_from_pose(Point2 center, double length, double width,
                                 double heading_deg) {
  if (!(length > 0.0) || !(width > 0.0)) {
    throw std::invalid_argument("box dimensions must be positive");
  }
  const double theta = heading_deg * (std::acos(-1.0) / 180.0);
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const double hw = 0.5 * width;
  const double hl = 0.5 * length;
  const std::array<Point2, 4> body = {Point2{hw, hl}, Point2{-hw, hl},
                                      Point2{-hw, -hl}, Point2{hw, -hl}};
  std::array<Point2, 4> world{};
  for (int i = 0; i < 4; ++i) {
    world[i] = {body[i].x * c + body[i].y * s + center.x,
                -body[i].x * s + body[i].y * c + center.y};
  }
  return OrientedBox::from_corners(world);
}

namespace detail {

inline void project(const OrientedBox& box, Point2 axis, double& lo, double& hi) {
  lo = hi = dot(box.corners()[0], axis);
  for (int i = 1; i < 4; ++i) {
    const double p = dot(box.corners()[i], axis);
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
}

}  // namespace detail

/// Separating-axis test over the edge normals of both boxes. Closed-region
/// semantics: touching boundaries count as intersecting.
inline bool boxes_intersect(const OrientedBox& a, const OrientedBox& b) {
  const OrientedBox* boxes[2] = {&a, &b};
  for (const OrientedBox* box : boxes) {
    for (int i = 0; i < 4; ++i) {
      const Point2 e = box->corners()[(i + 1) % 4] - box->corners()[i];
      const Point2 axis{-e.y, e.x};
      double alo, ahi, blo, bhi;
      detail::project(a, axis, alo, ahi);
      detail::project(b, axis, blo, bhi);
      if (ahi < blo || bhi < alo) {
        return false;
      }
    }
  }
  return true;
}

/// Closed-region membership: boundary points are inside.
inline bool point_in_box(Point2 p, const OrientedBox& box) {
  for (int i = 0; i < 4; ++i) {
    const Point2 e = box.corners()[(i + 1) % 4] - box.corners()[i];
    if (cross(e, p - box.corners()[i]) < 0.0) {
      return false;
    }
  }
  return true;
}

namespace detail {

inline double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 <= 0.0) {
    return norm(p - a);
  }
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

}  // namespace detail

/// Minimum boundary-to-boundary gap; zero when the boxes intersect.
inline double boundary_distance(const OrientedBox& a, const OrientedBox& b) {
  if (boxes_intersect(a, b)) {
    return 0.0;
  }
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    const Point2 a0 = a.corners()[i];
    const Point2 a1 = a.corners()[(i + 1) % 4];
    for (int j = 0; j < 4; ++j) {
      const Point2 b0 = b.corners()[j];
      const Point2 b1 = b.corners()[(j + 1) % 4];
      // Disjoint segments: the minimum is attained at an endpoint.
      best = std::min({best, detail::point_segment_distance(a0, b0, b1),
                       detail::point_segment_distance(a1, b0, b1),
                       detail::point_segment_distance(b0, a0, a1),
                       detail::point_segment_distance(b1, a0, a1)});
    }
  }
  return best;
}

/// Even-odd membership test for a simple polygon; used for the intersection
/// area flag, not for vehicle footprints.
inline bool point_in_polygon(Point2 p, const std::vector<Point2>& poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 pi = poly[i];
    const Point2 pj = poly[j];
    if ((pi.y > p.y) != (pj.y > p.y)) {
      const double xcross = pi.x + (p.y - pi.y) / (pj.y - pi.y) * (pj.x - pi.x);
      if (p.x < xcross) {
        inside = !inside;
      }
    }
  }
  return inside;
}

}  // namespace petsig
