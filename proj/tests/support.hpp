#pragma once

// Synthetic records for unit tests; no simulator involved.

#include <random>
#include <string>
#include <vector>

#include "sim2real/records.hpp"

namespace sim2real::testing {

inline EpisodeRecord make_record(const std::string& id, TimeOfDay time = TimeOfDay::kDay,
                                 Weather weather = Weather::kSunny, ManeuverLabel m = ManeuverLabel::kStraight,
                                 Provenance p = Provenance::kReal) {
  EpisodeRecord r;
  r.id = id;
  r.provenance = p;
  r.city = p == Provenance::kReal ? "Boston" : "Town13";
  r.env = {time, weather};
  r.maneuver = m;
  r.frame_convention = kRhFluRoof;
  r.cameras = camera_rig(RigPreset::kRigA);
  for (int k = 0; k < kHistoryFrames; ++k) {
    HistoryFrame h;
    h.t = -0.5 * (kHistoryFrames - 1 - k);
    h.ego.pose = make_pose(5.0 * h.t, 0.0, 0.0, 0.0);
    h.ego.v = 10.0;
    AgentState a;
    a.id = 1;
    a.pose = make_pose(20.0 + 4.0 * h.t, 3.5, 0.0, 0.0);
    a.v = 8.0;
    h.agents.push_back(a);
    r.history.push_back(h);
  }
  r.command = std::string(kCommandForward);
  for (int i = 1; i <= kFutureFrames; ++i) {
    r.gt_waypoints.push_back({5.0 * i, 0.0});
    r.gt_speeds.push_back(10.0);
  }
  return r;
}

/// Record with every coordinate perturbed, so round-trips exercise full precision.
inline EpisodeRecord random_record(const std::string& id, std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(-30.0, 30.0), a(-3.0, 3.0), v(0.0, 20.0);
  std::bernoulli_distribution coin(0.5);
  EpisodeRecord r = make_record(id, coin(g) ? TimeOfDay::kNight : TimeOfDay::kDay,
                                coin(g) ? Weather::kRainy : Weather::kSunny,
                                coin(g) ? ManeuverLabel::kTurn : ManeuverLabel::kStraight,
                                coin(g) ? Provenance::kSim : Provenance::kReal);
  if (coin(g)) r.frame_convention = kLhFruWheel;
  for (auto& h : r.history) {
    h.ego.pose = make_pose(u(g), u(g), u(g) / 30.0, a(g));
    h.ego.v = v(g);
    for (auto& ag : h.agents) {
      ag.pose = make_pose(u(g), u(g), u(g) / 30.0, a(g));
      ag.v = v(g);
      ag.kind = coin(g) ? AgentKind::kPedestrian : AgentKind::kVehicle;
    }
  }
  for (auto& c : r.cameras) c.cam_to_ego = compose(Transform4::translation(u(g) / 10.0, u(g) / 10.0, 1.5), c.cam_to_ego);
  for (auto& w : r.gt_waypoints) w = {u(g), u(g)};
  for (auto& s : r.gt_speeds) s = v(g);
  r.command = std::string(coin(g) ? kCommandLeft : kCommandRight);
  return r;
}

}  // namespace sim2real::testing
