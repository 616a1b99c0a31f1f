#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sim2real/error.hpp"
#include "sim2real/geometry.hpp"

namespace sim2real {

struct EgoState {
  Pose pose;
  double v = 0.0;

  friend bool operator==(const EgoState&, const EgoState&) = default;
};

enum class AgentKind { kVehicle, kPedestrian };

inline const char* to_string(AgentKind k) { return k == AgentKind::kVehicle ? "vehicle" : "pedestrian"; }

struct AgentState {
  int id = 0;
  AgentKind kind = AgentKind::kVehicle;
  Pose pose;
  double v = 0.0;
  double length = 4.5;
  double width = 1.9;

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

enum class TimeOfDay { kDay, kNight };
enum class Weather { kSunny, kRainy };

struct EnvCondition {
  TimeOfDay time = TimeOfDay::kDay;
  Weather weather = Weather::kSunny;

  friend bool operator==(const EnvCondition&, const EnvCondition&) = default;
};

inline const char* to_string(TimeOfDay t) { return t == TimeOfDay::kDay ? "day" : "night"; }
inline const char* to_string(Weather w) { return w == Weather::kSunny ? "sunny" : "rainy"; }

enum class SignalState { kGreen, kYellow, kRed };

inline const char* to_string(SignalState s) {
  switch (s) {
    case SignalState::kGreen: return "green";
    case SignalState::kYellow: return "yellow";
    case SignalState::kRed: return "red";
  }
  return "green";
}

struct SignalPhase {
  double t = 0.0;
  SignalState state = SignalState::kGreen;

  friend bool operator==(const SignalPhase&, const SignalPhase&) = default;
};

/// An intersection controlling the ego route. `stop_line_s` is the arc
/// length along lanes[0] at which the ego must stop on red.
struct Intersection {
  Vec2 position;
  double stop_line_s = 0.0;
  std::vector<SignalPhase> phases;  // sorted by t; empty means always green

  SignalState state_at(double t) const {
    SignalState s = SignalState::kGreen;
    for (const auto& p : phases) {
      if (p.t <= t) s = p.state;
    }
    return s;
  }

  friend bool operator==(const Intersection&, const Intersection&) = default;
};

using Polyline = std::vector<Vec2>;

/// Lane centerlines plus signals. lanes[0] is the ego route by convention.
struct RoadMap {
  std::vector<Polyline> lanes;
  double lane_width = 3.5;
  std::vector<Intersection> intersections;

  void validate() const {
    if (lanes.empty()) throw Error(ErrorCode::kEmptyMap, "map has no lanes");
    if (!(lane_width > 0.0)) throw Error(ErrorCode::kValidation, "lane_width must be positive");
    for (const auto& l : lanes) {
      if (l.size() < 2) throw Error(ErrorCode::kValidation, "lane polyline needs at least 2 points");
    }
  }

  friend bool operator==(const RoadMap&, const RoadMap&) = default;
};

// ---------------------------------------------------------------------------
// Polyline paths

struct PathProjection {
  double s = 0.0;        // arc length of the closest point
  double d = 0.0;        // signed lateral offset, positive to the left
  double distance = 0.0; // unsigned distance to the polyline
  double heading = 0.0;  // tangent heading at the closest point
};

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.dot(ab);
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

inline double point_polyline_distance(const Vec2& p, const Polyline& line) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  }
  return best;
}

/// Arc-length parameterized polyline with projection and sampling.
class PolylinePath {
 public:
  PolylinePath() = default;
  explicit PolylinePath(Polyline pts) : pts_(std::move(pts)) {
    cum_.assign(pts_.size(), 0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) {
      cum_[i] = cum_[i - 1] + (pts_[i] - pts_[i - 1]).norm();
    }
  }

  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }
  const Polyline& points() const { return pts_; }

  PathProjection project(const Vec2& p) const {
    PathProjection best;
    best.distance = std::numeric_limits<double>::infinity();
    double best_d2 = best.distance;
    std::size_t best_i = 0;
    double best_t = 0.0;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      const Vec2 a = pts_[i];
      const Vec2 ab = pts_[i + 1] - a;
      const double len2 = ab.dot(ab);
      if (len2 <= 0.0) continue;
      const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
      const Vec2 r = p - (a + ab * t);
      const double d2 = r.dot(r);
      if (d2 < best_d2) {
        best_d2 = d2;
        best_i = i;
        best_t = t;
      }
    }
    if (best_d2 == std::numeric_limits<double>::infinity()) return best;
    const Vec2 a = pts_[best_i];
    const Vec2 ab = pts_[best_i + 1] - a;
    const double len = ab.norm();
    best.distance = std::sqrt(best_d2);
    best.s = cum_[best_i] + best_t * len;
    best.d = ab.cross(p - a) / len;
    best.heading = std::atan2(ab.y, ab.x);
    return best;
  }

  /// Position and tangent heading at arc length s; extrapolates linearly
  /// past either end.
  std::pair<Vec2, double> at(double s) const {
    if (pts_.size() < 2) return {pts_.empty() ? Vec2{} : pts_.front(), 0.0};
    std::size_t i = 0;
    if (s >= cum_.back()) {
      i = pts_.size() - 2;
    } else if (s > 0.0) {
      i = static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), s) - cum_.begin()) - 1;
      i = std::min(i, pts_.size() - 2);
    }
    const Vec2 a = pts_[i];
    const Vec2 ab = pts_[i + 1] - a;
    const double len = ab.norm();
    const double heading = std::atan2(ab.y, ab.x);
    if (len <= 0.0) return {a, heading};
    return {a + ab * ((s - cum_[i]) / len), heading};
  }

  /// Maximum absolute curvature (turn angle per unit length between
  /// consecutive segments) over [s0, s1].
  double max_curvature(double s0, double s1) const {
    double kmax = 0.0;
    for (std::size_t i = 1; i + 1 < pts_.size(); ++i) {
      if (cum_[i] < s0 || cum_[i] > s1) continue;
      const Vec2 a = pts_[i] - pts_[i - 1];
      const Vec2 b = pts_[i + 1] - pts_[i];
      const double turn = std::abs(std::atan2(a.cross(b), a.dot(b)));
      const double seg = 0.5 * (a.norm() + b.norm());
      if (seg > 0.0) kmax = std::max(kmax, turn / seg);
    }
    return kmax;
  }

  /// Curvature at a specific arc length (nearest interior vertex).
  double curvature_near(double s) const {
    for (std::size_t i = 1; i + 1 < pts_.size(); ++i) {
      if (cum_[i] >= s) {
        const Vec2 a = pts_[i] - pts_[i - 1];
        const Vec2 b = pts_[i + 1] - pts_[i];
        const double seg = 0.5 * (a.norm() + b.norm());
        return seg > 0.0 ? std::abs(std::atan2(a.cross(b), a.dot(b))) / seg : 0.0;
      }
    }
    return 0.0;
  }

 private:
  Polyline pts_;
  std::vector<double> cum_;
};

// ---------------------------------------------------------------------------
// Ego kinematics

struct VehicleParams {
  double wheelbase = 2.7;
  double length = 4.0;
  double width = 1.8;
};

/// Kinematic bicycle step. Speed is clamped at zero (no reverse).
inline EgoState step_ego(const EgoState& s, double accel, double steer, double dt,
                         double wheelbase = 2.7) {
  if (!std::isfinite(accel) || !std::isfinite(steer) || !std::isfinite(dt)) {
    throw Error(ErrorCode::kInvalidControl, "non-finite control input");
  }
  if (!(dt > 0.0 && dt <= 0.5)) throw Error(ErrorCode::kInvalidControl, "dt must lie in (0, 0.5]");
  if (std::abs(steer) > 0.6 + 1e-12) throw Error(ErrorCode::kInvalidControl, "|steer| exceeds 0.6 rad");
  EgoState out = s;
  out.pose.x = s.pose.x + s.v * std::cos(s.pose.yaw) * dt;
  out.pose.y = s.pose.y + s.v * std::sin(s.pose.yaw) * dt;
  out.pose.yaw = normalize_angle(s.pose.yaw + (s.v / wheelbase) * std::tan(steer) * dt);
  out.v = std::max(0.0, s.v + accel * dt);
  return out;
}

// ---------------------------------------------------------------------------
// Drivable area raster

/// Boolean raster; cell (i, j) covers x in [origin.x + i*res, origin.x + (i+1)*res).
struct DrivableGrid {
  Vec2 origin;
  double resolution = 0.25;
  int nx = 0;
  int ny = 0;
  std::vector<unsigned char> cells;

  bool in_extent(int i, int j) const { return i >= 0 && j >= 0 && i < nx && j < ny; }
  bool drivable_cell(int i, int j) const {
    return in_extent(i, j) && cells[static_cast<std::size_t>(j) * nx + i] != 0;
  }
  Vec2 cell_center(int i, int j) const {
    return {origin.x + (i + 0.5) * resolution, origin.y + (j + 0.5) * resolution};
  }
  int cell_x(double x) const { return static_cast<int>(std::floor((x - origin.x) / resolution)); }
  int cell_y(double y) const { return static_cast<int>(std::floor((y - origin.y) / resolution)); }
  bool drivable_at(const Vec2& p) const { return drivable_cell(cell_x(p.x), cell_y(p.y)); }
};

/// Rasterizes every cell whose center lies within lane_width/2 of a lane
/// centerline. Work is proportional to road area, not to the grid extent.
inline DrivableGrid drivable_grid(const RoadMap& map, double resolution, double margin = 2.0) {
  if (map.lanes.empty()) throw Error(ErrorCode::kEmptyMap, "cannot rasterize an empty map");
  if (!(resolution >= 0.1 && resolution <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "grid resolution must lie in [0.1, 1.0]");
  }
  map.validate();
  const double half = 0.5 * map.lane_width;
  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (const auto& lane : map.lanes) {
    for (const auto& p : lane) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  DrivableGrid g;
  g.resolution = resolution;
  g.origin = {std::floor((xmin - half - margin) / resolution) * resolution,
              std::floor((ymin - half - margin) / resolution) * resolution};
  g.nx = static_cast<int>(std::ceil((xmax + half + margin - g.origin.x) / resolution));
  g.ny = static_cast<int>(std::ceil((ymax + half + margin - g.origin.y) / resolution));
  g.cells.assign(static_cast<std::size_t>(g.nx) * g.ny, 0);
  for (const auto& lane : map.lanes) {
    for (std::size_t k = 0; k + 1 < lane.size(); ++k) {
      const Vec2 a = lane[k], b = lane[k + 1];
      const int i0 = std::max(0, g.cell_x(std::min(a.x, b.x) - half));
      const int i1 = std::min(g.nx - 1, g.cell_x(std::max(a.x, b.x) + half));
      const int j0 = std::max(0, g.cell_y(std::min(a.y, b.y) - half));
      const int j1 = std::min(g.ny - 1, g.cell_y(std::max(a.y, b.y) + half));
      for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
          auto& cell = g.cells[static_cast<std::size_t>(j) * g.nx + i];
          if (cell) continue;
          if (point_segment_distance(g.cell_center(i, j), a, b) <= half) cell = 1;
        }
      }
    }
  }
  return g;
}

/// Continuous membership test used as the reference for the raster.
inline bool point_drivable(const RoadMap& map, const Vec2& p) {
  const double half = 0.5 * map.lane_width;
  for (const auto& lane : map.lanes) {
    if (point_polyline_distance(p, lane) <= half) return true;
  }
  return false;
}

}  // namespace sim2real
