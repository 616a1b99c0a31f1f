#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sim2real/geometry.hpp"
#include "sim2real/obb.hpp"
#include "sim2real/world.hpp"

namespace sim2real {

/// Privileged rule-based expert. IDM car following with a time-to-collision
/// brake override for the longitudinal axis, pure pursuit on the route for
/// the lateral axis.
struct TeacherParams {
  double desired_speed = 10.0;
  double max_accel = 1.5;        // IDM a
  double comfort_decel = 2.0;    // IDM b
  double min_gap = 2.0;          // IDM s0
  double time_headway = 2.0;     // IDM T
  double exponent = 4.0;         // IDM delta
  double ttc_brake = 1.5;
  double hard_brake = 4.0;
  double accel_limit = 4.0;
  double steer_limit = 0.6;
  double lat_accel_max = 2.5;
  double predict_horizon = 3.0;
  double predict_step = 0.25;
  double corridor_margin = 0.4;
  double pedestrian_margin = 1.0;  // extra lateral clearance kept from pedestrians
  VehicleParams vehicle;
};

/// Longer headway and gentler cornering in rain. The cruise speed reduction
/// for degraded conditions is already part of `desired_speed`.
inline TeacherParams teacher_params_for(const EnvCondition& env, double desired_speed) {
  TeacherParams p;
  p.desired_speed = desired_speed;
  if (env.weather == Weather::kRainy) {
    p.time_headway = 2.5;
    p.lat_accel_max = 2.0;
  }
  return p;
}

/// Everything the teacher may look at: the full simulator state.
struct WorldView {
  const RoadMap* map = nullptr;
  const PolylinePath* route = nullptr;
  double t = 0.0;
  std::vector<AgentState> agents;
};

struct Control {
  double accel = 0.0;
  double steer = 0.0;
};

inline ObbFootprint footprint(const AgentState& a) { return {a.pose.xy(), a.pose.yaw, a.length, a.width}; }

inline ObbFootprint footprint(const EgoState& e, const VehicleParams& v) {
  return {e.pose.xy(), e.pose.yaw, v.length, v.width};
}

namespace detail {

struct CorridorHit {
  bool hit = false;
  double s_min = 0.0;
  double s_max = 0.0;
  double heading = 0.0;
};

// Whether a footprint overlaps the ego route corridor of half-width `half`.
inline CorridorHit corridor_overlap(const PolylinePath& route, const ObbFootprint& box, double half) {
  CorridorHit out;
  double d_min = std::numeric_limits<double>::infinity(), d_max = -d_min;
  out.s_min = std::numeric_limits<double>::infinity();
  out.s_max = -out.s_min;
  auto corners = box.corners();
  for (const Vec2& c : corners) {
    const auto pr = route.project(c);
    d_min = std::min(d_min, pr.d);
    d_max = std::max(d_max, pr.d);
    if (pr.s < out.s_min) {
      out.s_min = pr.s;
      out.heading = pr.heading;
    }
    out.s_max = std::max(out.s_max, pr.s);
  }
  out.hit = d_max > -half && d_min < half;
  return out;
}

inline double idm_accel(const TeacherParams& p, double v, double v0, double gap, double v_lead) {
  const double free = 1.0 - std::pow(v / v0, p.exponent);
  if (!std::isfinite(gap)) return p.max_accel * free;
  const double s_star =
      p.min_gap + std::max(0.0, v * p.time_headway + v * (v - v_lead) / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
  const double g = std::max(gap, 0.1);
  return p.max_accel * (free - (s_star / g) * (s_star / g));
}

}  // namespace detail

/// Target speed respecting route curvature ahead: the fastest speed from
/// which every upcoming curve can be reached at its lateral-acceleration limit.
inline double curvature_speed_limit(const PolylinePath& route, double s_ego, double v, const TeacherParams& p) {
  const double lookahead = v * v / (2.0 * p.comfort_decel) + 15.0;
  double limit = std::numeric_limits<double>::infinity();
  for (double ds = 0.0; ds <= lookahead; ds += 1.0) {
    const double kappa = route.curvature_near(s_ego + ds);
    if (kappa < 1e-4) continue;
    const double vc = std::sqrt(p.lat_accel_max / kappa);
    limit = std::min(limit, std::sqrt(vc * vc + 2.0 * p.comfort_decel * std::max(0.0, ds - 2.0)));
  }
  return limit;
}

/// Time to the first predicted footprint overlap with any agent, with the
/// ego advancing along its route and agents at constant velocity. Returns
/// infinity when nothing overlaps within `horizon`.
inline double predicted_ttc(const WorldView& world, const EgoState& ego, const TeacherParams& p,
                            double horizon, double step = 0.1) {
  const auto proj = world.route->project(ego.pose.xy());
  for (double tau = 0.0; tau <= horizon + 1e-9; tau += step) {
    ObbFootprint e;
    if (tau == 0.0) {
      e = footprint(ego, p.vehicle);
    } else {
      const auto [pos, heading] = world.route->at(proj.s + ego.v * tau);
      const Vec2 offset = Vec2{-std::sin(heading), std::cos(heading)} * proj.d;
      e = {pos + offset, heading, p.vehicle.length, p.vehicle.width};
    }
    for (const auto& a : world.agents) {
      ObbFootprint b = footprint(a);
      b.center = b.center + heading_vector(a.pose.yaw) * (a.v * tau);
      if (obb_overlap(e, b)) return tau;
    }
  }
  return std::numeric_limits<double>::infinity();
}

inline Control teacher_plan(const WorldView& world, const EgoState& ego, const TeacherParams& p = {}) {
  const PolylinePath& route = *world.route;
  const Vec2 pos = ego.pose.xy();
  const auto proj = route.project(pos);
  const double v = ego.v;
  Control out;

  // Lateral: pure pursuit toward a lookahead point on the route.
  {
    const double ld = std::clamp(3.0 + 0.6 * v, 4.0, 15.0);
    const auto [target, heading] = route.at(proj.s + ld);
    (void)heading;
    const Vec2 rel = target - pos;
    const double c = std::cos(ego.pose.yaw), s = std::sin(ego.pose.yaw);
    const double lx = c * rel.x + s * rel.y;
    const double ly = -s * rel.x + c * rel.y;
    const double dist = std::hypot(lx, ly);
    const double alpha = std::atan2(ly, lx);
    out.steer = dist > 1e-9 ? std::atan(2.0 * p.vehicle.wheelbase * std::sin(alpha) / dist) : 0.0;
    out.steer = std::clamp(out.steer, -p.steer_limit, p.steer_limit);
  }

  // Longitudinal: IDM against the most constraining obstacle.
  const double v0 = std::max(1.0, std::min(p.desired_speed, curvature_speed_limit(route, proj.s, v, p)));
  const double half = 0.5 * p.vehicle.width + p.corridor_margin;
  const double front = proj.s + 0.5 * p.vehicle.length;
  const double rear = proj.s - 0.5 * p.vehicle.length;
  double accel = detail::idm_accel(p, v, v0, std::numeric_limits<double>::infinity(), 0.0);

  for (const auto& a : world.agents) {
    const ObbFootprint box = footprint(a);
    const double agent_half = a.kind == AgentKind::kPedestrian ? half + p.pedestrian_margin : half;
    auto hit = detail::corridor_overlap(route, box, agent_half);
    if (hit.hit && hit.s_max > rear && hit.s_min - proj.s < 120.0) {
      const double v_along = a.v * std::cos(a.pose.yaw - hit.heading);
      accel = std::min(accel, detail::idm_accel(p, v, v0, hit.s_min - front, v_along));
      continue;
    }
    if (a.v <= 1e-6) continue;
    const Vec2 dir = heading_vector(a.pose.yaw);
    for (double tau = p.predict_step; tau <= p.predict_horizon + 1e-9; tau += p.predict_step) {
      ObbFootprint moved = box;
      moved.center = box.center + dir * (a.v * tau);
      hit = detail::corridor_overlap(route, moved, agent_half);
      if (hit.hit && hit.s_max > rear + v * tau && hit.s_min - proj.s < 120.0) {
        const double v_along = std::max(0.0, a.v * std::cos(a.pose.yaw - hit.heading));
        accel = std::min(accel, detail::idm_accel(p, v, v0, hit.s_min - front, v_along));
        break;
      }
    }
  }

  if (world.map != nullptr) {
    for (const auto& x : world.map->intersections) {
      const SignalState sig = x.state_at(world.t);
      if (sig == SignalState::kGreen) continue;
      const double gap = x.stop_line_s - front;
      if (gap < -0.5) continue;
      if (sig == SignalState::kYellow && gap < v * v / (2.0 * p.comfort_decel)) continue;
      accel = std::min(accel, detail::idm_accel(p, v, v0, gap, 0.0));
    }
  }

  if (predicted_ttc(world, ego, p, p.ttc_brake) <= p.ttc_brake) accel = -p.hard_brake;
  out.accel = std::clamp(accel, -p.accel_limit, p.accel_limit);
  return out;
}

}  // namespace sim2real
