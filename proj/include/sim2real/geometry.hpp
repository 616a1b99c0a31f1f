#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "sim2real/error.hpp"

namespace sim2real {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

inline Vec2 heading_vector(double yaw) { return {std::cos(yaw), std::sin(yaw)}; }

// ---------------------------------------------------------------------------
// Frame conventions

enum class Handedness { kRight, kLeft };
enum class LateralAxis { kLeftPositive, kRightPositive };
enum class OriginRef { kRoofCenter, kWheelContactPlane };

/// Axis orientation and origin reference of an ego frame. Forward is +X and
/// up is +Z in every convention; only the lateral axis and the origin height
/// differ. Only the two presets below are valid.
struct FrameConvention {
  Handedness handedness = Handedness::kRight;
  LateralAxis lateral_axis = LateralAxis::kLeftPositive;
  OriginRef origin_ref = OriginRef::kRoofCenter;

  friend bool operator==(const FrameConvention&, const FrameConvention&) = default;
};

/// nuScenes-style: X forward, Y left, Z up, origin at the roof center.
inline constexpr FrameConvention kRhFluRoof{Handedness::kRight, LateralAxis::kLeftPositive,
                                            OriginRef::kRoofCenter};
/// CARLA-style: X forward, Y right, Z up, origin on the wheel contact plane.
inline constexpr FrameConvention kLhFruWheel{Handedness::kLeft, LateralAxis::kRightPositive,
                                             OriginRef::kWheelContactPlane};

inline bool is_preset(const FrameConvention& c) { return c == kRhFluRoof || c == kLhFruWheel; }

inline std::string to_string(const FrameConvention& c) {
  if (c == kRhFluRoof) return "RH_FLU_ROOF";
  if (c == kLhFruWheel) return "LH_FRU_WHEEL";
  throw Error(ErrorCode::kUnknownConvention, "frame convention is not a named preset");
}

inline FrameConvention parse_convention(std::string_view name) {
  if (name == "RH_FLU_ROOF") return kRhFluRoof;
  if (name == "LH_FRU_WHEEL") return kLhFruWheel;
  throw Error(ErrorCode::kUnknownConvention, "unknown frame convention '" + std::string(name) + "'");
}

/// Height of the roof center above the wheel contact plane.
struct RoofOffset {
  double h_roof = 1.5;
};

// ---------------------------------------------------------------------------
// Poses

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double yaw = 0.0;

  friend bool operator==(const Pose&, const Pose&) = default;

  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) && std::isfinite(yaw);
  }
  Vec2 xy() const { return {x, y}; }
};

inline Pose make_pose(double x, double y, double z, double yaw) {
  return {x, y, z, normalize_angle(yaw)};
}

namespace detail {

inline void require_preset(const FrameConvention& c) {
  if (!is_preset(c)) {
    throw Error(ErrorCode::kUnknownConvention, "frame convention is not a named preset");
  }
}

// Vertical shift applied to coordinates when moving from `from` to `to`.
inline double origin_shift(const FrameConvention& from, const FrameConvention& to,
                           const RoofOffset& off) {
  if (from.origin_ref == to.origin_ref) return 0.0;
  return from.origin_ref == OriginRef::kWheelContactPlane ? -off.h_roof : off.h_roof;
}

}  // namespace detail

/// Re-expresses a pose given in convention `from` in convention `to`.
/// A handedness flip negates y and yaw; an origin change shifts z by h_roof.
inline Pose convert_pose(const Pose& p, const FrameConvention& from, const FrameConvention& to,
                         const RoofOffset& off = {}) {
  if (!p.finite()) throw Error(ErrorCode::kInvalidPose, "pose has non-finite fields");
  detail::require_preset(from);
  detail::require_preset(to);
  if (from == to) return p;
  Pose out = p;
  if (from.handedness != to.handedness) {
    out.y = -p.y;
    out.yaw = normalize_angle(-p.yaw);
  }
  out.z = p.z + detail::origin_shift(from, to, off);
  return out;
}

/// Planar point conversion (waypoints carry no height).
inline Vec2 convert_point(const Vec2& p, const FrameConvention& from, const FrameConvention& to) {
  detail::require_preset(from);
  detail::require_preset(to);
  if (from.handedness == to.handedness) return p;
  return {p.x, -p.y};
}

// ---------------------------------------------------------------------------
// Homogeneous transforms

/// Row-major 4x4 homogeneous matrix.
struct Transform4 {
  std::array<double, 16> m{};

  static Transform4 identity() {
    Transform4 t;
    t.m[0] = t.m[5] = t.m[10] = t.m[15] = 1.0;
    return t;
  }
  static Transform4 translation(double tx, double ty, double tz) {
    Transform4 t = identity();
    t.m[3] = tx;
    t.m[7] = ty;
    t.m[11] = tz;
    return t;
  }
  static Transform4 rotation_z(double yaw) {
    Transform4 t = identity();
    const double c = std::cos(yaw), s = std::sin(yaw);
    t.m[0] = c;
    t.m[1] = -s;
    t.m[4] = s;
    t.m[5] = c;
    return t;
  }

  double& operator()(int r, int c) { return m[static_cast<std::size_t>(r * 4 + c)]; }
  double operator()(int r, int c) const { return m[static_cast<std::size_t>(r * 4 + c)]; }

  bool valid() const {
    for (double v : m) {
      if (!std::isfinite(v)) return false;
    }
    return m[12] == 0.0 && m[13] == 0.0 && m[14] == 0.0 && m[15] == 1.0;
  }

  std::array<double, 3> apply(const std::array<double, 3>& p) const {
    std::array<double, 3> out{};
    for (int r = 0; r < 3; ++r) {
      out[r] = (*this)(r, 0) * p[0] + (*this)(r, 1) * p[1] + (*this)(r, 2) * p[2] + (*this)(r, 3);
    }
    return out;
  }

  double max_abs_diff(const Transform4& o) const {
    double d = 0.0;
    for (std::size_t i = 0; i < 16; ++i) d = std::max(d, std::abs(m[i] - o.m[i]));
    return d;
  }

  friend bool operator==(const Transform4&, const Transform4&) = default;
};

inline Transform4 compose(const Transform4& a, const Transform4& b) {
  Transform4 out;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += a(r, k) * b(k, c);
      out(r, c) = acc;
    }
  }
  return out;
}

inline Transform4 invert(const Transform4& t) {
  const Eigen::Map<const Eigen::Matrix<double, 4, 4, Eigen::RowMajor>> mat(t.m.data());
  Eigen::FullPivLU<Eigen::Matrix4d> lu(mat);
  if (!lu.isInvertible()) throw Error(ErrorCode::kNonInvertible, "transform is singular");
  const Eigen::Matrix4d inv = lu.inverse();
  Transform4 out;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out(r, c) = inv(r, c);
  }
  // The bottom row of an affine inverse is exactly (0,0,0,1).
  out.m[12] = out.m[13] = out.m[14] = 0.0;
  out.m[15] = 1.0;
  return out;
}

/// Point map from convention `from` to `to` as a homogeneous matrix.
inline Transform4 conversion_matrix(const FrameConvention& from, const FrameConvention& to,
                                    const RoofOffset& off = {}) {
  detail::require_preset(from);
  detail::require_preset(to);
  Transform4 t = Transform4::identity();
  if (from.handedness != to.handedness) t(1, 1) = -1.0;
  t(2, 3) = detail::origin_shift(from, to, off);
  return t;
}

// ---------------------------------------------------------------------------
// Cameras

inline constexpr std::array<std::string_view, 6> kCameraNames = {
    "CAM_FRONT", "CAM_FRONT_LEFT", "CAM_FRONT_RIGHT", "CAM_BACK", "CAM_BACK_LEFT", "CAM_BACK_RIGHT"};

struct CameraCalibration {
  std::string name;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Transform4 cam_to_ego = Transform4::identity();
  int width = 1600;
  int height = 900;

  friend bool operator==(const CameraCalibration&, const CameraCalibration&) = default;
};

/// K embedded in a 4x4 identity-padded matrix.
inline Transform4 intrinsic_hom(const CameraCalibration& c) {
  Transform4 k = Transform4::identity();
  k(0, 0) = c.fx;
  k(0, 2) = c.cx;
  k(1, 1) = c.fy;
  k(1, 2) = c.cy;
  return k;
}

inline Transform4 inverse_intrinsic_hom(const CameraCalibration& c) {
  if (c.fx == 0.0 || c.fy == 0.0 || !std::isfinite(c.fx) || !std::isfinite(c.fy)) {
    throw Error(ErrorCode::kDegenerateIntrinsics, "camera '" + c.name + "' has zero focal length");
  }
  Transform4 k = Transform4::identity();
  k(0, 0) = 1.0 / c.fx;
  k(0, 2) = -c.cx / c.fx;
  k(1, 1) = 1.0 / c.fy;
  k(1, 2) = -c.cy / c.fy;
  return k;
}

/// Maps homogeneous pixel rays (u, v, 1) of the camera into the ego frame:
/// T_cam_to_ego * hom(K^-1). Its 16 entries are the encoder input.
inline Transform4 image_to_ego_matrix(const CameraCalibration& c) {
  return compose(c.cam_to_ego, inverse_intrinsic_hom(c));
}

// Rotation taking optical axes (x right, y down, z forward) to a
// forward-left-up body frame.
inline Transform4 optical_to_flu() {
  Transform4 t = Transform4::identity();
  t(0, 0) = 0.0;  t(0, 1) = 0.0;  t(0, 2) = 1.0;
  t(1, 0) = -1.0; t(1, 1) = 0.0;  t(1, 2) = 0.0;
  t(2, 0) = 0.0;  t(2, 1) = -1.0; t(2, 2) = 0.0;
  return t;
}

}  // namespace sim2real
