#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sim2real/error.hpp"
#include "sim2real/geometry.hpp"
#include "sim2real/obb.hpp"
#include "sim2real/scenarios.hpp"
#include "sim2real/teacher.hpp"
#include "sim2real/world.hpp"

namespace sim2real {

struct Frame {
  double t = 0.0;
  EgoState ego;
  std::vector<AgentState> agents;
  std::vector<SignalState> signals;

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Simulated rollout sampled every dt. Poses are in the simulator world
/// frame, which follows the RH_FLU_ROOF axis convention.
struct Episode {
  std::vector<Frame> frames;
  ScenarioSpec spec;
  double dt = 0.5;
  FrameConvention convention = kRhFluRoof;
  bool valid = true;             // false when the teacher left the drivable area
  bool collided = false;         // ego-agent footprint overlap at any integration step
  int hazard_frame = -1;         // first frame where a hazard agent occupies the ego lane ahead
  std::vector<int> hazard_agents_in_lane;  // ids of hazard agents that entered the lane
};

struct SimulationOptions {
  double substep = 0.05;
  RoofOffset roof;
};

namespace detail {

// A hazard agent counts as in the ego lane when its footprint overlaps the
// route lane (half-width lane_width/2) at or ahead of the ego rear.
inline bool hazard_in_lane(const PolylinePath& route, const RoadMap& map, const AgentState& a,
                           const EgoState& ego, const VehicleParams& vp) {
  const auto ego_proj = route.project(ego.pose.xy());
  const auto hit = corridor_overlap(route, footprint(a), 0.5 * map.lane_width);
  return hit.hit && hit.s_max > ego_proj.s - 0.5 * vp.length && hit.s_min - ego_proj.s < 80.0;
}

}  // namespace detail

/// Rolls the scenario forward with the teacher driving the ego. The result is
/// a pure function of (spec, horizon_s, dt, options).
inline Episode simulate_episode(const ScenarioSpec& spec, double horizon_s = 10.0, double dt = 0.5,
                                const SimulationOptions& options = {}) {
  if (!(horizon_s >= 5.5)) throw Error(ErrorCode::kInvalidArgument, "horizon must be at least 5.5 s");
  if (!(dt > 0.0 && dt <= 0.5)) throw Error(ErrorCode::kInvalidArgument, "dt must lie in (0, 0.5]");
  spec.map.validate();

  Episode ep;
  ep.spec = spec;
  ep.dt = dt;
  const PolylinePath route(spec.map.lanes.front());
  const TeacherParams params = teacher_params_for(spec.env, spec.desired_speed);
  const int substeps = std::max(1, static_cast<int>(std::ceil(dt / options.substep - 1e-9)));
  const double h = dt / substeps;
  const int n_frames = static_cast<int>(std::lround(horizon_s / dt)) + 1;

  std::vector<AgentRuntime> agents;
  agents.reserve(spec.agents.size());
  for (const auto& a : spec.agents) agents.emplace_back(a);

  EgoState ego = spec.ego_start;
  WorldView view;
  view.map = &ep.spec.map;
  view.route = &route;

  auto snapshot = [&](double t) {
    Frame f;
    f.t = t;
    f.ego = ego;
    for (const auto& a : agents) f.agents.push_back(a.state());
    for (const auto& x : spec.map.intersections) f.signals.push_back(x.state_at(t));
    return f;
  };
  auto note_hazards = [&](const Frame& f, int index) {
    for (std::size_t i = 0; i < agents.size(); ++i) {
      if (!agents[i].script().hazard) continue;
      if (detail::hazard_in_lane(route, spec.map, f.agents[i], f.ego, params.vehicle)) {
        if (ep.hazard_frame < 0) ep.hazard_frame = index;
        const int id = f.agents[i].id;
        if (std::find(ep.hazard_agents_in_lane.begin(), ep.hazard_agents_in_lane.end(), id) ==
            ep.hazard_agents_in_lane.end()) {
          ep.hazard_agents_in_lane.push_back(id);
        }
      }
    }
  };

  ep.frames.push_back(snapshot(0.0));
  note_hazards(ep.frames.back(), 0);
  for (int k = 1; k < n_frames; ++k) {
    for (int sub = 0; sub < substeps; ++sub) {
      const double t = (k - 1) * dt + sub * h;
      const double s_ego = route.project(ego.pose.xy()).s;
      for (auto& a : agents) a.check_trigger(t, ego, s_ego);
      view.t = t;
      view.agents.clear();
      for (const auto& a : agents) view.agents.push_back(a.state());
      const Control c = teacher_plan(view, ego, params);
      ego = step_ego(ego, c.accel, c.steer, h, params.vehicle.wheelbase);
      const double t_next = (k - 1) * dt + (sub + 1) * h;
      for (auto& a : agents) a.advance(t_next, h);

      const ObbFootprint ego_box = footprint(ego, params.vehicle);
      for (const auto& a : agents) {
        if (obb_overlap(ego_box, footprint(a.state()))) ep.collided = true;
      }
      if (!point_drivable(spec.map, ego.pose.xy())) ep.valid = false;
    }
    ep.frames.push_back(snapshot(k * dt));
    note_hazards(ep.frames.back(), k);
  }
  return ep;
}

/// Re-expresses every pose of an episode in another frame convention.
inline Episode convert_episode(const Episode& e, const FrameConvention& to, const RoofOffset& off = {}) {
  Episode out = e;
  out.convention = to;
  for (auto& f : out.frames) {
    f.ego.pose = convert_pose(f.ego.pose, e.convention, to, off);
    for (auto& a : f.agents) a.pose = convert_pose(a.pose, e.convention, to, off);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labels

enum class ManeuverLabel { kStraight, kTurn };
enum class Difficulty { kE2D, kH2D };

inline const char* to_string(ManeuverLabel m) { return m == ManeuverLabel::kStraight ? "straight" : "turn"; }
inline const char* to_string(Difficulty d) { return d == Difficulty::kE2D ? "E2D" : "H2D"; }

inline constexpr double kTurnThresholdRad = 10.0 * kPi / 180.0;
inline constexpr int kHistoryFrames = 5;
inline constexpr int kFutureFrames = 6;

struct EpisodeLabels {
  TimeOfDay time = TimeOfDay::kDay;
  Weather weather = Weather::kSunny;
  ManeuverLabel maneuver = ManeuverLabel::kStraight;
  Difficulty difficulty = Difficulty::kE2D;
  std::optional<ScenarioCategory> long_tail;

  friend bool operator==(const EpisodeLabels&, const EpisodeLabels&) = default;
};

inline Difficulty difficulty_of(const EnvCondition& env, ManeuverLabel m) {
  return (env.time == TimeOfDay::kNight || env.weather == Weather::kRainy || m == ManeuverLabel::kTurn)
             ? Difficulty::kH2D
             : Difficulty::kE2D;
}

inline ManeuverLabel maneuver_from_yaw_change(double dyaw) {
  return std::abs(normalize_angle(dyaw)) > kTurnThresholdRad ? ManeuverLabel::kTurn : ManeuverLabel::kStraight;
}

/// Labels an episode around `anchor` (the current frame); the maneuver is
/// judged over the following kFutureFrames frames.
inline EpisodeLabels classify_episode(const Episode& e, int anchor = kHistoryFrames - 1) {
  if (anchor < 0 || anchor + kFutureFrames >= static_cast<int>(e.frames.size())) {
    throw Error(ErrorCode::kInvalidArgument, "anchor leaves no room for the future horizon");
  }
  EpisodeLabels l;
  l.time = e.spec.env.time;
  l.weather = e.spec.env.weather;
  const double dyaw = e.frames[static_cast<std::size_t>(anchor + kFutureFrames)].ego.pose.yaw -
                      e.frames[static_cast<std::size_t>(anchor)].ego.pose.yaw;
  l.maneuver = maneuver_from_yaw_change(dyaw);
  l.difficulty = difficulty_of(e.spec.env, l.maneuver);
  if (category_info(e.spec.category).long_tail) l.long_tail = e.spec.category;
  return l;
}

}  // namespace sim2real
