#pragma once

#include <array>
#include <cmath>

#include "sim2real/geometry.hpp"

namespace sim2real {

struct ObbFootprint {
  Vec2 center;
  double yaw = 0.0;
  double length = 4.0;
  double width = 1.8;

  Vec2 axis_long() const { return heading_vector(yaw); }
  Vec2 axis_lat() const { return {-std::sin(yaw), std::cos(yaw)}; }

  std::array<Vec2, 4> corners() const {
    const Vec2 u = axis_long() * (0.5 * length);
    const Vec2 v = axis_lat() * (0.5 * width);
    return {center + u + v, center - u + v, center - u - v, center + u - v};
  }

  bool contains(const Vec2& p) const {
    const Vec2 r = p - center;
    return std::abs(r.dot(axis_long())) <= 0.5 * length && std::abs(r.dot(axis_lat())) <= 0.5 * width;
  }
};

namespace detail {

inline double projected_radius(const ObbFootprint& b, const Vec2& axis) {
  return 0.5 * b.length * std::abs(b.axis_long().dot(axis)) +
         0.5 * b.width * std::abs(b.axis_lat().dot(axis));
}

}  // namespace detail

/// Separating-axis test over the four face normals. Boxes that only touch
/// along an edge or corner do not overlap.
inline bool obb_overlap(const ObbFootprint& a, const ObbFootprint& b) {
  const Vec2 delta = b.center - a.center;
  const std::array<Vec2, 4> axes = {a.axis_long(), a.axis_lat(), b.axis_long(), b.axis_lat()};
  for (const Vec2& axis : axes) {
    const double dist = std::abs(delta.dot(axis));
    if (dist >= detail::projected_radius(a, axis) + detail::projected_radius(b, axis)) return false;
  }
  return true;
}

}  // namespace sim2real
