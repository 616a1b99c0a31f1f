#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sim2real/error.hpp"
#include "sim2real/geometry.hpp"
#include "sim2real/rng.hpp"
#include "sim2real/scenarios.hpp"
#include "sim2real/simulate.hpp"
#include "sim2real/world.hpp"

namespace sim2real {

enum class Provenance { kSim, kReal };

inline const char* to_string(Provenance p) { return p == Provenance::kSim ? "sim" : "real"; }

/// One history sample; poses are in the current-ego frame of the record.
struct HistoryFrame {
  double t = 0.0;
  EgoState ego;
  std::vector<AgentState> agents;

  friend bool operator==(const HistoryFrame&, const HistoryFrame&) = default;
};

inline constexpr std::string_view kCommandForward = "move forward";
inline constexpr std::string_view kCommandLeft = "make a left turn at the upcoming intersection";
inline constexpr std::string_view kCommandRight = "make a right turn at the upcoming intersection";

/// A training/evaluation sample: five history frames up to the current
/// frame, six camera calibrations and a 3 s future at 0.5 s spacing.
struct EpisodeRecord {
  std::string id;
  Provenance provenance = Provenance::kSim;
  std::string city;
  EnvCondition env;
  ManeuverLabel maneuver = ManeuverLabel::kStraight;
  ScenarioCategory scenario = ScenarioCategory::kE2DCommon;
  FrameConvention frame_convention = kRhFluRoof;
  std::vector<CameraCalibration> cameras;
  std::vector<HistoryFrame> history;
  std::string command;
  std::vector<Vec2> gt_waypoints;
  std::vector<double> gt_speeds;

  Difficulty difficulty() const { return difficulty_of(env, maneuver); }

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

/// Future positions and speeds, 0.5 s apart. Horizon 1 s covers points 1-2,
/// 2 s points 1-4, 3 s points 1-6.
struct Trajectory {
  std::vector<Vec2> waypoints;
  std::vector<double> speeds;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

inline Trajectory ground_truth(const EpisodeRecord& r) { return {r.gt_waypoints, r.gt_speeds}; }

namespace detail {

[[noreturn]] inline void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kValidation, field + ": " + what);
}

}  // namespace detail

/// Throws kValidation naming the first offending field.
inline void validate_record(const EpisodeRecord& r) {
  using detail::invalid;
  if (r.id.empty()) invalid("id", "empty");
  if (!is_preset(r.frame_convention)) invalid("frame_convention", "not a named preset");
  if (r.cameras.size() != kCameraNames.size()) invalid("cameras", "expected 6");
  for (std::size_t i = 0; i < r.cameras.size(); ++i) {
    const auto& c = r.cameras[i];
    if (c.name != kCameraNames[i]) invalid("cameras", "expected " + std::string(kCameraNames[i]) + " at index " + std::to_string(i));
    if (!c.cam_to_ego.valid()) invalid("cameras", "non-finite or non-affine extrinsic for " + c.name);
    if (!(std::isfinite(c.fx) && std::isfinite(c.fy) && std::isfinite(c.cx) && std::isfinite(c.cy)) ||
        c.fx == 0.0 || c.fy == 0.0) {
      invalid("cameras", "bad intrinsics for " + c.name);
    }
  }
  if (r.history.size() != static_cast<std::size_t>(kHistoryFrames)) invalid("history", "expected 5");
  for (const auto& h : r.history) {
    if (!std::isfinite(h.t) || !h.ego.pose.finite() || !std::isfinite(h.ego.v)) invalid("history", "non-finite ego state");
    for (const auto& a : h.agents) {
      if (!a.pose.finite() || !std::isfinite(a.v) || !(a.length > 0.0) || !(a.width > 0.0)) {
        invalid("history", "bad agent state");
      }
    }
  }
  if (r.gt_waypoints.size() != static_cast<std::size_t>(kFutureFrames)) invalid("gt_waypoints", "expected 6");
  for (const auto& w : r.gt_waypoints) {
    if (!std::isfinite(w.x) || !std::isfinite(w.y)) invalid("gt_waypoints", "non-finite");
  }
  if (r.gt_speeds.size() != static_cast<std::size_t>(kFutureFrames)) invalid("gt_speeds", "expected 6");
  for (double v : r.gt_speeds) {
    if (!std::isfinite(v)) invalid("gt_speeds", "non-finite");
  }
}

// ---------------------------------------------------------------------------
// Camera rigs

enum class RigPreset { kRigA, kRigB };

inline const char* to_string(RigPreset r) { return r == RigPreset::kRigA ? "rig_a" : "rig_b"; }

inline RigPreset parse_rig(std::string_view s) {
  if (s == "rig_a") return RigPreset::kRigA;
  if (s == "rig_b") return RigPreset::kRigB;
  throw Error(ErrorCode::kValidation, "unknown camera rig '" + std::string(s) + "'");
}

struct CameraMount {
  double x, y, z, yaw_deg;
};

inline Transform4 mount_transform(const CameraMount& m, double yaw_rad_offset = 0.0) {
  return compose(compose(Transform4::translation(m.x, m.y, m.z),
                         Transform4::rotation_z(m.yaw_deg * kPi / 180.0 + yaw_rad_offset)),
                 optical_to_flu());
}

/// Six calibrations with extrinsics in the RH_FLU_ROOF ego frame.
/// Rig A: a 1600x900 roof rig with long focal length; rig B: 90 degree
/// field-of-view cameras on a lower mount.
inline std::vector<CameraCalibration> camera_rig(RigPreset preset) {
  std::array<CameraMount, 6> mounts{};
  double f = 0.0, cx = 0.0, cy = 0.0;
  if (preset == RigPreset::kRigA) {
    mounts = {{{1.70, 0.00, -0.20, 0.0},
               {1.55, 0.50, -0.20, 55.0},
               {1.55, -0.50, -0.20, -55.0},
               {-0.05, 0.00, -0.15, 180.0},
               {1.05, 0.48, -0.20, 110.0},
               {1.05, -0.48, -0.20, -110.0}}};
    f = 1266.4;
    cx = 816.3;
    cy = 491.5;
  } else {
    mounts = {{{1.50, 0.00, -0.45, 0.0},
               {1.30, 0.60, -0.45, 60.0},
               {1.30, -0.60, -0.45, -60.0},
               {-1.40, 0.00, -0.45, 180.0},
               {-0.60, 0.60, -0.45, 120.0},
               {-0.60, -0.60, -0.45, -120.0}}};
    f = 800.0;
    cx = 800.0;
    cy = 450.0;
  }
  std::vector<CameraCalibration> out;
  for (std::size_t i = 0; i < mounts.size(); ++i) {
    CameraCalibration c;
    c.name = std::string(kCameraNames[i]);
    c.fx = c.fy = f;
    c.cx = cx;
    c.cy = cy;
    c.cam_to_ego = mount_transform(mounts[i]);
    out.push_back(c);
  }
  return out;
}

/// Per-record calibration perturbation: yaw, mount position and focal length.
inline std::vector<CameraCalibration> jitter_rig(std::vector<CameraCalibration> rig, double scale, Rng& rng) {
  if (scale <= 0.0) return rig;
  for (auto& c : rig) {
    const double dyaw = rng.normal() * 0.005 * scale;
    const Transform4 rot = Transform4::rotation_z(dyaw);
    c.cam_to_ego = compose(rot, c.cam_to_ego);
    c.cam_to_ego(0, 3) += rng.normal() * 0.02 * scale;
    c.cam_to_ego(1, 3) += rng.normal() * 0.02 * scale;
    c.cam_to_ego(2, 3) += rng.normal() * 0.01 * scale;
    const double df = 1.0 + rng.normal() * 0.005 * scale;
    c.fx *= df;
    c.fy *= df;
  }
  return rig;
}

// ---------------------------------------------------------------------------
// Record construction

struct RecordOptions {
  std::string id;
  Provenance provenance = Provenance::kSim;
  std::string city;  // empty: take the scenario's city
  FrameConvention convention = kRhFluRoof;
  RigPreset rig = RigPreset::kRigB;
  double calibration_jitter = 1.0;
  double history_position_noise = 0.0;  // meters, std-dev, past frames only
  double history_speed_noise = 0.0;     // m/s, std-dev, past frames only
  std::uint64_t seed = 0;
  RoofOffset roof;
};

namespace detail {

// World pose re-expressed relative to the reference ego pose (RH axes).
inline Pose relative_pose(const Pose& p, const Pose& ref) {
  const double c = std::cos(ref.yaw), s = std::sin(ref.yaw);
  const double dx = p.x - ref.x, dy = p.y - ref.y;
  return make_pose(c * dx + s * dy, -s * dx + c * dy, p.z - ref.z, p.yaw - ref.yaw);
}

inline Vec2 relative_point(const Vec2& p, const Pose& ref) {
  const double c = std::cos(ref.yaw), s = std::sin(ref.yaw);
  const Vec2 d = p - ref.xy();
  return {c * d.x + s * d.y, -s * d.x + c * d.y};
}

inline std::string_view command_for(const Episode& e, int anchor) {
  const double dyaw = normalize_angle(e.frames[static_cast<std::size_t>(anchor + kFutureFrames)].ego.pose.yaw -
                                      e.frames[static_cast<std::size_t>(anchor)].ego.pose.yaw);
  if (std::abs(dyaw) <= kTurnThresholdRad) return kCommandForward;
  return dyaw > 0.0 ? kCommandLeft : kCommandRight;
}

inline void check_anchor(const Episode& e, int anchor) {
  if (anchor < kHistoryFrames - 1 || anchor + kFutureFrames >= static_cast<int>(e.frames.size())) {
    throw Error(ErrorCode::kInvalidArgument, "anchor " + std::to_string(anchor) + " leaves no room for history and future");
  }
  if (e.convention != kRhFluRoof) {
    throw Error(ErrorCode::kConventionMismatch, "records are built from simulator-frame episodes");
  }
}

}  // namespace detail

/// Re-expresses a record in another convention: poses via convert_pose,
/// waypoints via convert_point, camera extrinsics by left-multiplying with
/// the point conversion matrix (the optical frame itself is convention
/// independent). Identity when already in `target`.
inline EpisodeRecord align_record(const EpisodeRecord& r, const FrameConvention& target, const RoofOffset& off = {}) {
  detail::require_preset(r.frame_convention);
  detail::require_preset(target);
  if (r.frame_convention == target) return r;
  const FrameConvention from = r.frame_convention;
  EpisodeRecord out = r;
  out.frame_convention = target;
  const Transform4 conv = conversion_matrix(from, target, off);
  for (auto& c : out.cameras) c.cam_to_ego = compose(conv, c.cam_to_ego);
  for (auto& h : out.history) {
    h.ego.pose = convert_pose(h.ego.pose, from, target, off);
    for (auto& a : h.agents) a.pose = convert_pose(a.pose, from, target, off);
  }
  for (auto& w : out.gt_waypoints) w = convert_point(w, from, target);
  return out;
}

/// Relabels a record without touching any coordinate: the "naive mixing"
/// ablation, where foreign-convention data is used as if it were native.
inline EpisodeRecord relabel_convention(EpisodeRecord r, const FrameConvention& target) {
  detail::require_preset(target);
  r.frame_convention = target;
  return r;
}

/// Samples a record around frame `anchor` of a simulator episode.
inline EpisodeRecord build_record(const Episode& e, int anchor, const RecordOptions& o) {
  detail::check_anchor(e, anchor);
  Rng rng(mix_seed(o.seed, 0x5EC0));
  const Pose ref = e.frames[static_cast<std::size_t>(anchor)].ego.pose;
  const double t0 = e.frames[static_cast<std::size_t>(anchor)].t;

  EpisodeRecord r;
  r.id = o.id;
  r.provenance = o.provenance;
  r.city = o.city.empty() ? e.spec.city : o.city;
  r.env = e.spec.env;
  r.maneuver = classify_episode(e, anchor).maneuver;
  r.scenario = e.spec.category;
  r.frame_convention = kRhFluRoof;
  r.cameras = jitter_rig(camera_rig(o.rig), o.calibration_jitter, rng);
  r.command = std::string(detail::command_for(e, anchor));

  for (int k = anchor - (kHistoryFrames - 1); k <= anchor; ++k) {
    const Frame& f = e.frames[static_cast<std::size_t>(k)];
    HistoryFrame h;
    h.t = f.t - t0;
    h.ego = {detail::relative_pose(f.ego.pose, ref), f.ego.v};
    const bool past = k < anchor;
    if (past && o.history_position_noise > 0.0) {
      h.ego.pose.x += rng.normal() * o.history_position_noise;
      h.ego.pose.y += rng.normal() * o.history_position_noise;
    }
    if (past && o.history_speed_noise > 0.0) h.ego.v = std::max(0.0, h.ego.v + rng.normal() * o.history_speed_noise);
    for (const auto& a : f.agents) {
      AgentState s = a;
      s.pose = detail::relative_pose(a.pose, ref);
      if (o.history_position_noise > 0.0) {
        s.pose.x += rng.normal() * o.history_position_noise;
        s.pose.y += rng.normal() * o.history_position_noise;
      }
      h.agents.push_back(s);
    }
    r.history.push_back(std::move(h));
  }
  for (int k = anchor + 1; k <= anchor + kFutureFrames; ++k) {
    const Frame& f = e.frames[static_cast<std::size_t>(k)];
    r.gt_waypoints.push_back(detail::relative_point(f.ego.pose.xy(), ref));
    r.gt_speeds.push_back(f.ego.v);
  }
  return align_record(r, o.convention, o.roof);
}

// ---------------------------------------------------------------------------
// Evaluation scenes

/// What the metrics need beyond the record: agent states at each future
/// waypoint time and the local road map, both in the record's frame.
struct EvalScene {
  std::string id;
  FrameConvention frame_convention = kRhFluRoof;
  std::vector<std::vector<AgentState>> future_agents;  // kFutureFrames entries
  RoadMap map;

  friend bool operator==(const EvalScene&, const EvalScene&) = default;
};

inline void validate_scene(const EvalScene& s) {
  using detail::invalid;
  if (s.id.empty()) invalid("id", "empty");
  if (!is_preset(s.frame_convention)) invalid("frame_convention", "not a named preset");
  if (s.future_agents.size() != static_cast<std::size_t>(kFutureFrames)) invalid("future_agents", "expected 6");
  if (s.map.lanes.empty()) invalid("map", "no lanes");
  for (const auto& l : s.map.lanes) {
    if (l.size() < 2) invalid("map", "lane with fewer than 2 points");
  }
  if (!(s.map.lane_width > 0.0)) invalid("map", "lane_width must be positive");
}

namespace detail {

// Keeps the parts of each lane within `radius` of the origin, splitting a
// lane where it leaves the disc. Segments that cross the disc boundary are
// kept whole so coverage inside the disc is unchanged.
inline std::vector<Polyline> crop_lanes(const std::vector<Polyline>& lanes, double radius) {
  std::vector<Polyline> out;
  for (const auto& lane : lanes) {
    Polyline cur;
    for (std::size_t i = 0; i + 1 < lane.size(); ++i) {
      const bool keep = point_segment_distance({0.0, 0.0}, lane[i], lane[i + 1]) <= radius;
      if (keep) {
        if (cur.empty()) cur.push_back(lane[i]);
        cur.push_back(lane[i + 1]);
      } else if (!cur.empty()) {
        out.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (cur.size() >= 2) out.push_back(std::move(cur));
  }
  return out;
}

}  // namespace detail

inline EvalScene align_scene(const EvalScene& s, const FrameConvention& target, const RoofOffset& off = {}) {
  detail::require_preset(s.frame_convention);
  detail::require_preset(target);
  if (s.frame_convention == target) return s;
  EvalScene out = s;
  out.frame_convention = target;
  for (auto& step : out.future_agents) {
    for (auto& a : step) a.pose = convert_pose(a.pose, s.frame_convention, target, off);
  }
  for (auto& lane : out.map.lanes) {
    for (auto& p : lane) p = convert_point(p, s.frame_convention, target);
  }
  for (auto& x : out.map.intersections) x.position = convert_point(x.position, s.frame_convention, target);
  return out;
}

inline EvalScene build_scene(const Episode& e, int anchor, const RecordOptions& o, double crop_radius = 60.0) {
  detail::check_anchor(e, anchor);
  const Pose ref = e.frames[static_cast<std::size_t>(anchor)].ego.pose;
  EvalScene s;
  s.id = o.id;
  for (int k = anchor + 1; k <= anchor + kFutureFrames; ++k) {
    std::vector<AgentState> step;
    for (const auto& a : e.frames[static_cast<std::size_t>(k)].agents) {
      AgentState rel = a;
      rel.pose = detail::relative_pose(a.pose, ref);
      step.push_back(rel);
    }
    s.future_agents.push_back(std::move(step));
  }
  std::vector<Polyline> lanes;
  for (const auto& lane : e.spec.map.lanes) {
    Polyline rel;
    for (const auto& p : lane) rel.push_back(detail::relative_point(p, ref));
    lanes.push_back(std::move(rel));
  }
  s.map.lanes = detail::crop_lanes(lanes, crop_radius);
  s.map.lane_width = e.spec.map.lane_width;
  // Signals are dropped: they do not enter any metric.
  return align_scene(s, o.convention, o.roof);
}

}  // namespace sim2real
