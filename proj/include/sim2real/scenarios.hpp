#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sim2real/error.hpp"
#include "sim2real/geometry.hpp"
#include "sim2real/rng.hpp"
#include "sim2real/world.hpp"

namespace sim2real {

enum class ScenarioCategory {
  kE2DCommon,
  kH2DEnvironmental,
  kTemporaryParkingAhead,
  kRoadworkAhead,
  kJaywalkingPedestrians,
  kLaneInvasion,
  kOpposingLaneEncroachment,
  kParkedVehicleActivation,
  kRedLightRunner,
  kSuddenCutIn,
  kNearCollision,
  kSuddenLeadBraking,
  kOccludedCrossing,
  kAbruptPedestrianOnTurn,
  kUnprotectedLeftTurn,
};

struct ParamRange {
  std::string_view name;
  double lo = 0.0;
  double hi = 0.0;
};

struct CategoryInfo {
  ScenarioCategory category;
  std::string_view id;
  bool long_tail = false;
  // Registry fillers not named in the source taxonomy; reports may exclude them.
  bool invented = false;
  std::vector<ParamRange> params;
};

namespace detail {

inline const std::vector<CategoryInfo>& registry() {
  using C = ScenarioCategory;
  static const std::vector<CategoryInfo> kRegistry = {
      {C::kE2DCommon, "E2DCommon", false, false,
       {{"ego_speed", 8, 12}, {"lead_presence", 0, 1}, {"lead_gap", 30, 60}, {"lead_speed", 6, 11},
        {"oncoming_count", 0, 2.999}}},
      {C::kH2DEnvironmental, "H2DEnvironmental", false, false,
       {{"ego_speed", 8, 12}, {"lead_presence", 0, 1}, {"lead_gap", 30, 60}, {"lead_speed", 6, 11},
        {"oncoming_count", 0, 2.999}, {"arrival_time", 1.5, 4.5}, {"red_until", 0, 5}}},
      {C::kTemporaryParkingAhead, "TemporaryParkingAhead", true, false,
       {{"ego_speed", 8, 12}, {"obstacle_distance", 45, 75}, {"lateral_offset", -0.3, 0.3}}},
      {C::kRoadworkAhead, "RoadworkAhead", true, false,
       {{"ego_speed", 8, 12}, {"obstacle_distance", 45, 75}, {"lateral_offset", -0.5, 0.5}}},
      {C::kJaywalkingPedestrians, "JaywalkingPedestrians", true, false,
       {{"ego_speed", 8, 12}, {"spawn_distance", 45, 70}, {"trigger_time", 1.9, 2.4},
        {"agent_speed", 0.8, 1.2}}},
      {C::kLaneInvasion, "LaneInvasion", true, false,
       {{"ego_speed", 8, 12}, {"spawn_distance", 110, 140}, {"trigger_distance", 60, 75},
        {"agent_speed", 5, 8}, {"intrusion", 0.3, 0.8}, {"swerve_time", 3, 4}}},
      {C::kOpposingLaneEncroachment, "OpposingLaneEncroachment", true, false,
       {{"ego_speed", 8, 12}, {"spawn_distance", 90, 130}, {"trigger_distance", 60, 80},
        {"agent_speed", 5, 9}, {"encroachment", 0.9, 1.4}}},
      {C::kParkedVehicleActivation, "ParkedVehicleActivation", true, false,
       {{"ego_speed", 8, 12}, {"spawn_distance", 50, 80}, {"trigger_distance", 32, 45},
        {"agent_speed", 3, 6}}},
      {C::kRedLightRunner, "RedLightRunner", true, false,
       {{"ego_speed", 8, 12}, {"arrival_time", 3.5, 5}, {"agent_speed", 9, 13}, {"timing_offset", -0.5, 0.5}}},
      {C::kSuddenCutIn, "SuddenCutIn", true, false,
       {{"ego_speed", 9, 12}, {"spawn_distance", 18, 26}, {"trigger_distance", 13, 17},
        {"speed_deficit", 2, 4}, {"merge_time", 1.5, 2.5}}},
      {C::kNearCollision, "NearCollision", true, false,
       {{"ego_speed", 8, 12}, {"spawn_distance", 50, 70}, {"trigger_distance", 30, 36},
        {"agent_speed", 2.5, 3.2}}},
      {C::kSuddenLeadBraking, "SuddenLeadBraking", true, true,
       {{"ego_speed", 8, 12}, {"lead_gap", 28, 36}, {"brake_time", 1.5, 3.5}, {"brake_decel", 5, 7}}},
      {C::kOccludedCrossing, "OccludedCrossing", true, true,
       {{"ego_speed", 8, 12}, {"spawn_distance", 45, 65}, {"trigger_distance", 24, 30},
        {"agent_speed", 1.2, 1.6}}},
      {C::kAbruptPedestrianOnTurn, "AbruptPedestrianOnTurn", true, true,
       {{"ego_speed", 8, 11}, {"arrival_time", 2, 4}, {"exit_distance", 8, 14}, {"trigger_lead", 4, 10},
        {"agent_speed", 1.2, 1.8}, {"turn_side", 0, 1}}},
      {C::kUnprotectedLeftTurn, "UnprotectedLeftTurn", true, true,
       {{"ego_speed", 8, 11}, {"arrival_time", 2.5, 4}, {"agent_speed", 9, 12}, {"timing_offset", -0.5, 1.0}}},
  };
  return kRegistry;
}

}  // namespace detail

/// All registered categories: the 13 long-tail scripts plus the E2D and H2D
/// common pseudo-categories.
inline const std::vector<CategoryInfo>& list_categories() { return detail::registry(); }

inline std::vector<ScenarioCategory> long_tail_categories() {
  std::vector<ScenarioCategory> out;
  for (const auto& c : detail::registry()) {
    if (c.long_tail) out.push_back(c.category);
  }
  return out;
}

inline const CategoryInfo& category_info(ScenarioCategory c) {
  for (const auto& info : detail::registry()) {
    if (info.category == c) return info;
  }
  throw Error(ErrorCode::kUnknownCategory, "category not in registry");
}

inline std::string to_string(ScenarioCategory c) { return std::string(category_info(c).id); }

inline ScenarioCategory parse_category(std::string_view id) {
  for (const auto& info : detail::registry()) {
    if (info.id == id) return info.category;
  }
  throw Error(ErrorCode::kUnknownCategory, "unknown scenario category '" + std::string(id) + "'");
}

// ---------------------------------------------------------------------------
// Scripted agents

enum class TriggerKind {
  kImmediate,
  kEgoWithin,      // Euclidean ego-agent distance drops below trigger_value
  kAtTime,         // simulation time reaches trigger_value
  kEgoAlongRoute,  // ego arc length on the route exceeds trigger_value
};

enum class Maneuver {
  kCruise,  // keep the initial speed
  kGo,      // move at target_speed for `distance` meters, then stop
  kBrake,   // decelerate at `accel` until stopped
  kSwerve,  // lateral excursion lateral*sin^2(pi*tau/duration), returning to the line
  kMerge,   // lateral shift to `lateral` (smoothstep over duration), speed to target_speed
};

/// Non-reactive agent: moves along a straight base line given by its
/// initial pose, with a lateral offset profile once triggered.
struct ScriptedAgent {
  AgentState initial;
  bool hazard = false;
  TriggerKind trigger = TriggerKind::kImmediate;
  double trigger_value = 0.0;
  Maneuver maneuver = Maneuver::kCruise;
  double target_speed = 0.0;
  double accel = 0.0;
  double lateral = 0.0;
  double duration = 1.0;
  double distance = std::numeric_limits<double>::infinity();
};

/// Runtime state of a scripted agent.
class AgentRuntime {
 public:
  explicit AgentRuntime(const ScriptedAgent& script) : script_(script), v_(script.initial.v) {}

  bool triggered() const { return triggered_; }
  const ScriptedAgent& script() const { return script_; }

  void check_trigger(double t, const EgoState& ego, double ego_route_s) {
    if (triggered_) return;
    bool fire = false;
    switch (script_.trigger) {
      case TriggerKind::kImmediate: fire = true; break;
      case TriggerKind::kEgoWithin:
        fire = (ego.pose.xy() - position()).norm() <= script_.trigger_value;
        break;
      case TriggerKind::kAtTime: fire = t >= script_.trigger_value; break;
      case TriggerKind::kEgoAlongRoute: fire = ego_route_s >= script_.trigger_value; break;
    }
    if (fire) {
      triggered_ = true;
      t_trigger_ = t;
      along_at_trigger_ = along_;
      if (script_.maneuver == Maneuver::kGo) v_ = script_.target_speed;
    }
  }

  void advance(double t_next, double h) {
    if (triggered_) {
      const double tau = t_next - t_trigger_;
      switch (script_.maneuver) {
        case Maneuver::kCruise: break;
        case Maneuver::kGo: {
          const double remaining = script_.distance - (along_ - along_at_trigger_);
          const double step = std::min(v_ * h, std::max(0.0, remaining));
          along_ += step;
          if (remaining - step <= 1e-9) v_ = 0.0;
          lateral_ = 0.0;
          return;
        }
        case Maneuver::kBrake: v_ = std::max(0.0, v_ - script_.accel * h); break;
        case Maneuver::kSwerve:
          lateral_ = tau < script_.duration
                         ? script_.lateral * std::pow(std::sin(kPi * tau / script_.duration), 2)
                         : 0.0;
          break;
        case Maneuver::kMerge: {
          const double u = std::clamp(tau / script_.duration, 0.0, 1.0);
          lateral_ = script_.lateral * u * u * (3.0 - 2.0 * u);
          if (script_.accel > 0.0) {
            v_ = v_ < script_.target_speed ? std::min(script_.target_speed, v_ + script_.accel * h)
                                           : std::max(script_.target_speed, v_ - script_.accel * h);
          } else {
            v_ = script_.target_speed;
          }
          break;
        }
      }
    }
    along_ += v_ * h;
    lateral_rate_ = triggered_ ? lateral_rate(t_next - t_trigger_) : 0.0;
  }

  Vec2 position() const {
    const double h = script_.initial.pose.yaw;
    const Vec2 dir = heading_vector(h);
    const Vec2 nrm{-std::sin(h), std::cos(h)};
    return script_.initial.pose.xy() + dir * along_ + nrm * lateral_;
  }

  AgentState state() const {
    AgentState s = script_.initial;
    const Vec2 p = position();
    s.pose.x = p.x;
    s.pose.y = p.y;
    const double lat_v = lateral_rate_;
    s.pose.yaw = normalize_angle(script_.initial.pose.yaw +
                                 (v_ > 1e-6 || std::abs(lat_v) > 1e-6 ? std::atan2(lat_v, std::max(v_, 1e-6)) : 0.0));
    s.v = std::hypot(v_, lat_v);
    return s;
  }

 private:
  double lateral_rate(double tau) const {
    const double d = script_.duration;
    switch (script_.maneuver) {
      case Maneuver::kSwerve:
        if (tau >= d) return 0.0;
        return script_.lateral * (kPi / d) * std::sin(2.0 * kPi * tau / d);
      case Maneuver::kMerge: {
        if (tau >= d) return 0.0;
        const double u = tau / d;
        return script_.lateral * 6.0 * u * (1.0 - u) / d;
      }
      default: return 0.0;
    }
  }

  ScriptedAgent script_;
  double v_ = 0.0;
  double along_ = 0.0;
  double lateral_ = 0.0;
  double lateral_rate_ = 0.0;
  bool triggered_ = false;
  double t_trigger_ = 0.0;
  double along_at_trigger_ = 0.0;
};

// ---------------------------------------------------------------------------
// Scenario specs

struct ScenarioSpec {
  ScenarioCategory category = ScenarioCategory::kE2DCommon;
  std::map<std::string, double> params;
  EnvCondition env;
  RoadMap map;
  std::uint64_t seed = 0;
  std::string city;
  EgoState ego_start;
  double desired_speed = 10.0;
  bool turn_intent = false;
  std::vector<ScriptedAgent> agents;

  double param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw Error(ErrorCode::kValidation, "missing scenario parameter '" + name + "'");
    return it->second;
  }
};

/// Checks each parameter against its documented range.
inline void validate_spec(const ScenarioSpec& spec) {
  const auto& info = category_info(spec.category);
  for (const auto& r : info.params) {
    const double v = spec.param(std::string(r.name));
    if (!(v >= r.lo && v <= r.hi)) {
      throw Error(ErrorCode::kValidation, "parameter '" + std::string(r.name) + "' out of range");
    }
  }
  spec.map.validate();
}

// ---------------------------------------------------------------------------
// Map builders

namespace maps {

inline constexpr double kLaneWidth = 3.5;
inline constexpr double kLeftTurnRadius = 12.0;
// Cross road center; chosen so the left-turn arc ends on the northbound lane.
inline constexpr double kCrossRoadX = kLeftTurnRadius - 0.5 * kLaneWidth;
inline constexpr double kRightTurnRadius = kCrossRoadX - 0.5 * kLaneWidth;

inline Polyline line(Vec2 a, Vec2 b, double spacing = 2.0) {
  const double len = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
  Polyline out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) out.push_back(a + (b - a) * (static_cast<double>(i) / n));
  return out;
}

inline void append(Polyline& dst, const Polyline& src) {
  for (const auto& p : src) {
    if (!dst.empty() && (dst.back() - p).norm() < 1e-9) continue;
    dst.push_back(p);
  }
}

/// Straight road along +x. `same_direction` lanes stacked to the left of the
/// ego lane, then one oncoming lane.
inline RoadMap straight_road(int same_direction = 1) {
  RoadMap m;
  m.lane_width = kLaneWidth;
  for (int i = 0; i < same_direction; ++i) {
    m.lanes.push_back(line({-60.0, i * kLaneWidth}, {260.0, i * kLaneWidth}));
  }
  const double y_on = same_direction * kLaneWidth;
  m.lanes.push_back(line({260.0, y_on}, {-60.0, y_on}));
  return m;
}

enum class Turn { kStraight, kLeft, kRight };

/// Four-way intersection; the ego approaches eastbound along y = 0 and the
/// route (lanes[0]) goes straight, left onto the northbound lane, or right
/// onto the southbound lane.
inline RoadMap intersection(Turn turn) {
  RoadMap m;
  m.lane_width = kLaneWidth;
  const double w = kLaneWidth;
  const double c = kCrossRoadX;
  Polyline route = line({-120.0, 0.0}, {0.0, 0.0});
  if (turn == Turn::kStraight) {
    append(route, line({0.0, 0.0}, {160.0, 0.0}));
  } else {
    const double r = turn == Turn::kLeft ? kLeftTurnRadius : kRightTurnRadius;
    const double sign = turn == Turn::kLeft ? 1.0 : -1.0;
    Polyline arc;
    const int n = 36;
    for (int i = 0; i <= n; ++i) {
      const double th = 0.5 * kPi * i / n;
      arc.push_back({r * std::sin(th), sign * (r - r * std::cos(th))});
    }
    append(route, arc);
    append(route, line({r, sign * r}, {r, sign * 120.0}));
  }
  m.lanes.push_back(route);
  if (turn != Turn::kStraight) m.lanes.push_back(line({0.0, 0.0}, {160.0, 0.0}));
  m.lanes.push_back(line({160.0, w}, {-120.0, w}));
  m.lanes.push_back(line({c + 0.5 * w, -120.0}, {c + 0.5 * w, 120.0}));
  m.lanes.push_back(line({c - 0.5 * w, 120.0}, {c - 0.5 * w, -120.0}));
  Intersection x;
  x.position = {c, 0.5 * w};
  x.stop_line_s = 118.0;  // two meters before the turn begins
  m.intersections.push_back(x);
  return m;
}

}  // namespace maps

// ---------------------------------------------------------------------------
// Instantiation

namespace detail {

inline constexpr std::array<std::string_view, 6> kSimCities = {"Town01", "Town03", "Town05",
                                                                "Town10", "Town12", "Town13"};

// Marginal targets of the balanced synthetic mix (day, sunny, straight).
inline constexpr double kHassDay = 27891.0 / 47553.0;
inline constexpr double kHassSunny = 23010.0 / 47553.0;
inline constexpr double kHassStraight = 22076.0 / 47553.0;

inline AgentState vehicle(int id, double x, double y, double yaw, double v, double length = 4.5,
                          double width = 1.9) {
  return {id, AgentKind::kVehicle, make_pose(x, y, 0.0, yaw), v, length, width};
}

inline AgentState pedestrian(int id, double x, double y, double yaw) {
  return {id, AgentKind::kPedestrian, make_pose(x, y, 0.0, yaw), 0.0, 0.6, 0.6};
}

inline void add_oncoming_traffic(ScenarioSpec& spec, Rng& rng, double lane_y, int& next_id) {
  const int count = static_cast<int>(spec.param("oncoming_count"));
  for (int i = 0; i < count; ++i) {
    const double x = rng.uniform(40.0, 150.0) + 60.0 * i;
    ScriptedAgent a;
    a.initial = vehicle(next_id++, x, lane_y, kPi, rng.uniform(8.0, 12.0));
    spec.agents.push_back(a);
  }
}

}  // namespace detail

/// Cruise-speed reduction applied by the expert in degraded conditions.
inline double env_speed_factor(const EnvCondition& env) {
  double f = 1.0;
  if (env.time == TimeOfDay::kNight) f *= 0.85;
  if (env.weather == Weather::kRainy) f *= 0.8;
  return f;
}

/// Deterministic scenario draw for (category, seed).
inline ScenarioSpec instantiate_scenario(ScenarioCategory category, std::uint64_t seed) {
  using C = ScenarioCategory;
  const CategoryInfo& info = category_info(category);
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(category) + 101));
  ScenarioSpec spec;
  spec.category = category;
  spec.seed = seed;
  for (const auto& r : info.params) spec.params[std::string(r.name)] = rng.uniform(r.lo, r.hi);
  spec.city = std::string(detail::kSimCities[rng.below(detail::kSimCities.size())]);

  bool turn = false;
  if (category == C::kE2DCommon) {
    spec.env = {TimeOfDay::kDay, Weather::kSunny};
  } else if (category == C::kH2DEnvironmental) {
    // Uniform over the seven hard combinations of (night, rainy, turn).
    const auto combo = 1 + rng.below(7);
    spec.env.time = (combo & 1) ? TimeOfDay::kNight : TimeOfDay::kDay;
    spec.env.weather = (combo & 2) ? Weather::kRainy : Weather::kSunny;
    turn = (combo & 4) != 0;
  } else {
    spec.env.time = rng.bernoulli(detail::kHassDay) ? TimeOfDay::kDay : TimeOfDay::kNight;
    spec.env.weather = rng.bernoulli(detail::kHassSunny) ? Weather::kSunny : Weather::kRainy;
  }

  const double v0 = spec.param("ego_speed") * env_speed_factor(spec.env);
  const double w = maps::kLaneWidth;
  spec.desired_speed = v0;
  spec.ego_start = {make_pose(0.0, 0.0, 0.0, 0.0), v0};
  int next_id = 1;

  auto place_on_approach = [&](double arrival_time) {
    spec.ego_start.pose.x = -v0 * arrival_time;
  };

  switch (category) {
    case C::kE2DCommon:
    case C::kH2DEnvironmental: {
      if (turn) {
        const bool left = rng.bernoulli(0.5);
        spec.map = maps::intersection(left ? maps::Turn::kLeft : maps::Turn::kRight);
        spec.turn_intent = true;
        place_on_approach(spec.param("arrival_time"));
        const double red = spec.param("red_until");
        if (red > 2.5) {
          spec.map.intersections[0].phases = {{0.0, SignalState::kRed}, {red, SignalState::kGreen}};
        }
        if (!left) detail::add_oncoming_traffic(spec, rng, w, next_id);
      } else {
        spec.map = maps::straight_road();
        if (spec.param("lead_presence") > 0.5) {
          ScriptedAgent lead;
          lead.initial = detail::vehicle(next_id++, spec.param("lead_gap"), 0.0, 0.0, spec.param("lead_speed"));
          spec.agents.push_back(lead);
        }
        detail::add_oncoming_traffic(spec, rng, w, next_id);
      }
      break;
    }
    case C::kTemporaryParkingAhead: {
      spec.map = maps::straight_road();
      ScriptedAgent parked;
      parked.initial = detail::vehicle(next_id++, spec.param("obstacle_distance"),
                                       spec.param("lateral_offset"), 0.0, 0.0);
      parked.hazard = true;
      spec.agents.push_back(parked);
      break;
    }
    case C::kRoadworkAhead: {
      spec.map = maps::straight_road();
      const double x = spec.param("obstacle_distance");
      const double y = spec.param("lateral_offset");
      for (int k = 0; k < 2; ++k) {
        ScriptedAgent barrier;
        barrier.initial = detail::vehicle(next_id++, x + 6.0 * k, y, 0.0, 0.0, 1.0, 3.0);
        barrier.hazard = true;
        spec.agents.push_back(barrier);
      }
      break;
    }
    case C::kJaywalkingPedestrians: {
      spec.map = maps::straight_road();
      ScriptedAgent ped;
      ped.initial = detail::pedestrian(next_id++, spec.param("spawn_distance"), -(0.5 * w + 2.0), 0.5 * kPi);
      ped.hazard = true;
      ped.trigger = TriggerKind::kEgoWithin;
      // Steps out at a fixed time-to-arrival of the ego.
      ped.trigger_value = spec.param("trigger_time") * spec.desired_speed;
      ped.maneuver = Maneuver::kGo;
      ped.target_speed = spec.param("agent_speed");
      ped.distance = 2.0 * w + 3.0;
      spec.agents.push_back(ped);
      break;
    }
    case C::kLaneInvasion: {
      spec.map = maps::straight_road();
      ScriptedAgent car;
      car.initial = detail::vehicle(next_id++, spec.param("spawn_distance"), w, kPi, spec.param("agent_speed"));
      car.hazard = true;
      car.trigger = TriggerKind::kEgoWithin;
      car.trigger_value = spec.param("trigger_distance");
      car.maneuver = Maneuver::kSwerve;
      // Heading pi: positive lateral offset points toward -y, across the ego centerline.
      car.lateral = w + spec.param("intrusion");
      car.duration = spec.param("swerve_time");
      spec.agents.push_back(car);
      break;
    }
    case C::kOpposingLaneEncroachment: {
      spec.map = maps::straight_road();
      ScriptedAgent car;
      car.initial = detail::vehicle(next_id++, spec.param("spawn_distance"), w, kPi, spec.param("agent_speed"),
                                    5.5, 2.0);
      car.hazard = true;
      car.trigger = TriggerKind::kEgoWithin;
      car.trigger_value = spec.param("trigger_distance");
      car.maneuver = Maneuver::kMerge;
      car.lateral = spec.param("encroachment");
      car.duration = 2.0;
      car.target_speed = car.initial.v;
      spec.agents.push_back(car);
      break;
    }
    case C::kParkedVehicleActivation: {
      spec.map = maps::straight_road();
      ScriptedAgent car;
      car.initial = detail::vehicle(next_id++, spec.param("spawn_distance"), -(0.5 * w + 1.2), 0.0, 0.0);
      car.hazard = true;
      car.trigger = TriggerKind::kEgoWithin;
      car.trigger_value = spec.param("trigger_distance");
      car.maneuver = Maneuver::kMerge;
      car.lateral = 0.5 * w + 1.2;
      car.duration = 3.0;
      car.accel = 2.0;
      car.target_speed = spec.param("agent_speed");
      spec.agents.push_back(car);
      break;
    }
    case C::kRedLightRunner: {
      spec.map = maps::intersection(maps::Turn::kStraight);
      const double ta = spec.param("arrival_time");
      place_on_approach(ta);
      const double vr = spec.param("agent_speed");
      const double x_lane = maps::kCrossRoadX + 0.5 * w;
      ScriptedAgent runner;
      runner.initial = detail::vehicle(next_id++, x_lane, -vr * (ta + spec.param("timing_offset")), 0.5 * kPi, vr);
      runner.hazard = true;
      spec.agents.push_back(runner);
      break;
    }
    case C::kSuddenCutIn: {
      spec.map = maps::straight_road(2);
      ScriptedAgent car;
      car.initial = detail::vehicle(next_id++, spec.param("spawn_distance"), w, 0.0,
                                    v0 - spec.param("speed_deficit"));
      car.hazard = true;
      car.trigger = TriggerKind::kEgoWithin;
      car.trigger_value = spec.param("trigger_distance");
      car.maneuver = Maneuver::kMerge;
      car.lateral = -w;
      car.duration = spec.param("merge_time");
      car.target_speed = car.initial.v;
      spec.agents.push_back(car);
      break;
    }
    case C::kNearCollision: {
      spec.map = maps::straight_road();
      ScriptedAgent ped;
      ped.initial = detail::pedestrian(next_id++, spec.param("spawn_distance"), 1.5 * w + 1.5, -0.5 * kPi);
      ped.hazard = true;
      ped.trigger = TriggerKind::kEgoWithin;
      ped.trigger_value = spec.param("trigger_distance");
      ped.maneuver = Maneuver::kGo;
      ped.target_speed = spec.param("agent_speed");
      ped.distance = 2.0 * w + 3.5;
      spec.agents.push_back(ped);
      break;
    }
    case C::kSuddenLeadBraking: {
      spec.map = maps::straight_road();
      ScriptedAgent lead;
      lead.initial = detail::vehicle(next_id++, spec.param("lead_gap"), 0.0, 0.0, v0);
      lead.hazard = true;
      lead.trigger = TriggerKind::kAtTime;
      lead.trigger_value = spec.param("brake_time");
      lead.maneuver = Maneuver::kBrake;
      lead.accel = spec.param("brake_decel");
      spec.agents.push_back(lead);
      break;
    }
    case C::kOccludedCrossing: {
      spec.map = maps::straight_road();
      const double x = spec.param("spawn_distance");
      ScriptedAgent van;
      van.initial = detail::vehicle(next_id++, x, -(0.5 * w + 1.2), 0.0, 0.0, 5.5, 2.0);
      spec.agents.push_back(van);
      ScriptedAgent ped;
      ped.initial = detail::pedestrian(next_id++, x + 3.3, -(0.5 * w + 1.0), 0.5 * kPi);
      ped.hazard = true;
      ped.trigger = TriggerKind::kEgoWithin;
      ped.trigger_value = spec.param("trigger_distance");
      ped.maneuver = Maneuver::kGo;
      ped.target_speed = spec.param("agent_speed");
      ped.distance = 2.0 * w + 2.0;
      spec.agents.push_back(ped);
      break;
    }
    case C::kAbruptPedestrianOnTurn: {
      const bool left = spec.param("turn_side") < 0.5;
      spec.map = maps::intersection(left ? maps::Turn::kLeft : maps::Turn::kRight);
      spec.turn_intent = true;
      place_on_approach(spec.param("arrival_time"));
      const double r = left ? maps::kLeftTurnRadius : maps::kRightTurnRadius;
      const double sign = left ? 1.0 : -1.0;
      // Exit leg runs along x = r; the pedestrian starts on the curb to the
      // right of the exit direction and crosses the exit lane.
      const double y = sign * (r + spec.param("exit_distance"));
      ScriptedAgent ped;
      const double curb = 0.5 * w + 1.5;
      ped.initial = left ? detail::pedestrian(next_id++, r + curb, y, kPi)
                         : detail::pedestrian(next_id++, r - curb, y, 0.0);
      ped.hazard = true;
      ped.trigger = TriggerKind::kEgoAlongRoute;
      ped.trigger_value = 120.0 - spec.param("trigger_lead");
      ped.maneuver = Maneuver::kGo;
      ped.target_speed = spec.param("agent_speed");
      ped.distance = w + 2.0 * curb;
      spec.agents.push_back(ped);
      break;
    }
    case C::kUnprotectedLeftTurn: {
      spec.map = maps::intersection(maps::Turn::kLeft);
      spec.turn_intent = true;
      const double ta = spec.param("arrival_time");
      place_on_approach(ta);
      const double vo = spec.param("agent_speed");
      const double r = maps::kLeftTurnRadius;
      // Where the left-turn arc crosses the oncoming lane.
      const double conflict_x = std::sqrt(r * r - (r - w) * (r - w));
      ScriptedAgent car;
      car.initial = detail::vehicle(next_id++, conflict_x + vo * (ta + spec.param("timing_offset")), w, kPi, vo);
      car.hazard = true;
      spec.agents.push_back(car);
      break;
    }
  }
  validate_spec(spec);
  return spec;
}

}  // namespace sim2real
