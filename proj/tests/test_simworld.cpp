#include <limits>
#include <gtest/gtest.h>

#include <random>
#include <set>

#include "sim2real/scenarios.hpp"
#include "sim2real/simulate.hpp"
#include "sim2real/teacher.hpp"

using namespace sim2real;

namespace {

using C = ScenarioCategory;

// Episode with a given yaw profile: frame k has yaw yaw_at(k).
Episode synthetic_episode(EnvCondition env, double total_dyaw) {
  Episode e;
  e.spec.env = env;
  e.spec.category = C::kE2DCommon;
  for (int k = 0; k < 11; ++k) {
    Frame f;
    f.t = 0.5 * k;
    const double frac = k <= 4 ? 0.0 : (k - 4) / 6.0;
    f.ego.pose = make_pose(5.0 * k, 0.0, 0.0, frac * total_dyaw);
    f.ego.v = 10.0;
    e.frames.push_back(f);
  }
  return e;
}

}  // namespace

TEST(StepEgo, Examples) {
  const EgoState s{make_pose(0, 0, 0, 0), 10.0};
  const EgoState a = step_ego(s, 0.0, 0.0, 0.5);
  EXPECT_DOUBLE_EQ(a.pose.x, 5.0);
  EXPECT_DOUBLE_EQ(a.pose.y, 0.0);
  EXPECT_DOUBLE_EQ(a.pose.yaw, 0.0);
  EXPECT_DOUBLE_EQ(a.v, 10.0);

  const EgoState stopped{make_pose(1, 2, 0, 0.3), 0.0};
  EXPECT_EQ(step_ego(stopped, -1.0, 0.0, 0.5).v, 0.0);

  const EgoState b = step_ego(s, 0.0, 0.1, 0.1, 2.7);
  EXPECT_NEAR(b.pose.yaw, 10.0 / 2.7 * std::tan(0.1) * 0.1, 1e-15);
  EXPECT_NEAR(b.pose.yaw, 0.03716, 1e-5);
}

TEST(StepEgo, Errors) {
  const EgoState s{make_pose(0, 0, 0, 0), 5.0};
  for (auto [a, st, dt] : {std::tuple{std::nan(""), 0.0, 0.1}, std::tuple{0.0, std::numeric_limits<double>::infinity(), 0.1},
                           std::tuple{0.0, 0.0, 0.0}, std::tuple{0.0, 0.0, 0.6}, std::tuple{0.0, 0.7, 0.1}}) {
    try {
      step_ego(s, a, st, dt);
      ADD_FAILURE() << "expected an error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidControl);
    }
  }
}

TEST(Registry, ThirteenLongTailCategories) {
  EXPECT_EQ(long_tail_categories().size(), 13u);
  EXPECT_EQ(list_categories().size(), 15u);
  std::set<std::string> names;
  int invented = 0;
  for (const auto& c : list_categories()) {
    names.insert(std::string(c.id));
    invented += c.invented;
  }
  EXPECT_EQ(invented, 4);
  for (const char* n : {"JaywalkingPedestrians", "RedLightRunner", "TemporaryParkingAhead", "RoadworkAhead",
                        "LaneInvasion", "OpposingLaneEncroachment", "ParkedVehicleActivation", "SuddenCutIn",
                        "NearCollision", "SuddenLeadBraking", "OccludedCrossing", "AbruptPedestrianOnTurn",
                        "UnprotectedLeftTurn", "E2DCommon", "H2DEnvironmental"}) {
    EXPECT_TRUE(names.count(n)) << n;
  }
  EXPECT_EQ(parse_category("LaneInvasion"), C::kLaneInvasion);
  try {
    parse_category("Meteor");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownCategory);
  }
}

TEST(InstantiateScenario, DeterministicAndWithinRanges) {
  const ScenarioSpec a = instantiate_scenario(C::kJaywalkingPedestrians, 7);
  const ScenarioSpec b = instantiate_scenario(C::kJaywalkingPedestrians, 7);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.city, b.city);
  EXPECT_EQ(a.ego_start, b.ego_start);
  EXPECT_EQ(a.agents.size(), b.agents.size());
  for (const auto& info : list_categories()) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const ScenarioSpec s = instantiate_scenario(info.category, seed);
      ASSERT_NO_THROW(validate_spec(s));
      for (const auto& r : info.params) {
        ASSERT_GE(s.param(std::string(r.name)), r.lo);
        ASSERT_LE(s.param(std::string(r.name)), r.hi);
      }
    }
  }
}

TEST(InstantiateScenario, LaneInvasionCrossesEgoLane) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ScenarioSpec spec = instantiate_scenario(C::kLaneInvasion, seed);
    const Episode e = simulate_episode(spec, 12.0);
    const double half = 0.5 * spec.map.lane_width;
    // The ego lane is the first centerline (y = 0); the agent starts in the
    // oncoming lane and must reach past the ego lane edge.
    ASSERT_EQ(spec.agents.size(), 1u);
    EXPECT_GT(spec.agents[0].initial.pose.y, half);
    double min_y = INFINITY;
    for (const auto& f : e.frames) min_y = std::min(min_y, f.agents[0].pose.y);
    EXPECT_LT(min_y, half) << "seed " << seed;
  }
}

TEST(InstantiateScenario, TemporaryParkingHasStoppedVehicleAhead) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ScenarioSpec spec = instantiate_scenario(C::kTemporaryParkingAhead, seed);
    bool found = false;
    for (const auto& a : spec.agents) {
      if (a.initial.v == 0.0 && a.initial.kind == AgentKind::kVehicle &&
          std::abs(a.initial.pose.y) < 0.5 * spec.map.lane_width && a.initial.pose.x > spec.ego_start.pose.x) {
        found = true;
      }
    }
    EXPECT_TRUE(found) << "seed " << seed;
  }
}

TEST(SimulateEpisode, E2DStraightEndsOnCenterline) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ScenarioSpec spec = instantiate_scenario(C::kE2DCommon, seed);
    const Episode e = simulate_episode(spec, 12.0);
    EXPECT_TRUE(e.valid);
    EXPECT_FALSE(e.collided);
    EXPECT_LT(std::abs(e.frames.back().ego.pose.y), 0.2) << "seed " << seed;
  }
}

TEST(SimulateEpisode, TeacherBrakesForJaywalker) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Episode e = simulate_episode(instantiate_scenario(C::kJaywalkingPedestrians, seed), 12.0);
    double min_v = INFINITY;
    for (const auto& f : e.frames) min_v = std::min(min_v, f.ego.v);
    EXPECT_LT(min_v, 1.0) << "seed " << seed;
    EXPECT_GE(e.hazard_frame, 0);
    EXPECT_FALSE(e.collided);
  }
}

TEST(SimulateEpisode, DeterministicAndWellFormed) {
  for (const auto& info : list_categories()) {
    const ScenarioSpec spec = instantiate_scenario(info.category, 3);
    const Episode a = simulate_episode(spec, 8.0);
    const Episode b = simulate_episode(spec, 8.0);
    ASSERT_EQ(a.frames, b.frames) << info.id;
    ASSERT_GE(a.frames.size(), 11u);
    for (std::size_t k = 1; k < a.frames.size(); ++k) {
      ASSERT_NEAR(a.frames[k].t - a.frames[k - 1].t, 0.5, 1e-12);
      const double dp = (a.frames[k].ego.pose.xy() - a.frames[k - 1].ego.pose.xy()).norm();
      // Speed changes by at most accel_limit * dt within a frame.
      const double vmax = std::max(a.frames[k].ego.v, a.frames[k - 1].ego.v) + 4.0 * 0.5;
      ASSERT_LE(dp, vmax * 0.5 + 1e-9) << info.id << " frame " << k;
    }
  }
  EXPECT_THROW(simulate_episode(instantiate_scenario(C::kE2DCommon, 0), 5.0), Error);
}

TEST(TeacherPlan, Examples) {
  const RoadMap map = maps::straight_road();
  const PolylinePath route(map.lanes.front());
  WorldView view;
  view.map = &map;
  view.route = &route;
  TeacherParams p;
  p.desired_speed = 12.0;

  const EgoState ego{make_pose(10.0, 0.0, 0.0, 0.0), 8.0};
  const Control free = teacher_plan(view, ego, p);
  EXPECT_GT(free.accel, 0.0);
  EXPECT_EQ(free.steer, 0.0);

  AgentState lead;
  lead.pose = make_pose(10.0 + 10.0, 0.0, 0.0, 0.0);
  lead.v = 0.0;
  view.agents = {lead};
  const Control brake = teacher_plan(view, ego, p);
  EXPECT_LT(brake.accel, 0.0);
  EXPECT_LE(std::abs(brake.accel), 4.0);
  EXPECT_LE(std::abs(brake.steer), 0.6);
}

TEST(TeacherPlan, ControlsAlwaysClamped) {
  const RoadMap map = maps::intersection(maps::Turn::kLeft);
  const PolylinePath route(map.lanes.front());
  WorldView view;
  view.map = &map;
  view.route = &route;
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(-30, 30), yaw(-kPi, kPi), v(0, 20);
  for (int i = 0; i < 500; ++i) {
    AgentState a;
    a.pose = make_pose(u(g), u(g), 0, yaw(g));
    a.v = v(g);
    view.agents = {a};
    const Control c = teacher_plan(view, EgoState{make_pose(u(g), u(g), 0, yaw(g)), v(g)});
    ASSERT_LE(std::abs(c.accel), 4.0 + 1e-12);
    ASSERT_LE(std::abs(c.steer), 0.6 + 1e-12);
  }
}

TEST(ClassifyEpisode, Examples) {
  EpisodeLabels l = classify_episode(synthetic_episode({TimeOfDay::kDay, Weather::kSunny}, 0.0));
  EXPECT_EQ(l.time, TimeOfDay::kDay);
  EXPECT_EQ(l.weather, Weather::kSunny);
  EXPECT_EQ(l.maneuver, ManeuverLabel::kStraight);
  EXPECT_EQ(l.difficulty, Difficulty::kE2D);
  EXPECT_FALSE(l.long_tail.has_value());

  l = classify_episode(synthetic_episode({TimeOfDay::kDay, Weather::kSunny}, 45.0 * kPi / 180.0));
  EXPECT_EQ(l.maneuver, ManeuverLabel::kTurn);
  EXPECT_EQ(l.difficulty, Difficulty::kH2D);

  l = classify_episode(synthetic_episode({TimeOfDay::kNight, Weather::kRainy}, 0.0));
  EXPECT_EQ(l.maneuver, ManeuverLabel::kStraight);
  EXPECT_EQ(l.difficulty, Difficulty::kH2D);

  // Threshold sits at 10 degrees.
  EXPECT_EQ(classify_episode(synthetic_episode({}, 9.9 * kPi / 180.0)).maneuver, ManeuverLabel::kStraight);
  EXPECT_EQ(classify_episode(synthetic_episode({}, 10.1 * kPi / 180.0)).maneuver, ManeuverLabel::kTurn);
}

TEST(ClassifyEpisode, InvariantUnderConventionConversion) {
  for (const auto& info : list_categories()) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const Episode e = simulate_episode(instantiate_scenario(info.category, seed), 8.0);
      const Episode lh = convert_episode(e, kLhFruWheel);
      for (int anchor = 4; anchor + 6 < static_cast<int>(e.frames.size()); anchor += 3) {
        ASSERT_EQ(classify_episode(e, anchor), classify_episode(lh, anchor)) << info.id;
      }
    }
  }
}

TEST(DrivableGrid, Examples) {
  RoadMap map;
  map.lane_width = 4.0;
  map.lanes = {{{0.0, 0.0}, {50.0, 0.0}}};
  const DrivableGrid g = drivable_grid(map, 0.5);
  EXPECT_TRUE(g.drivable_at({20.1, 1.5}));
  EXPECT_TRUE(g.drivable_at({20.1, -1.5}));
  EXPECT_FALSE(g.drivable_at({20.1, 2.5}));
  EXPECT_FALSE(g.drivable_at({20.1, -2.5}));
  EXPECT_TRUE(g.drivable_at({33.3, 0.0}));
  EXPECT_DOUBLE_EQ(g.resolution, 0.5);

  RoadMap empty;
  try {
    drivable_grid(empty, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyMap);
  }
  EXPECT_THROW(drivable_grid(map, 0.05), Error);
}

TEST(DrivableGrid, CoarseAndFineAgreeAwayFromBoundary) {
  const RoadMap map = maps::intersection(maps::Turn::kRight);
  const DrivableGrid fine = drivable_grid(map, 0.1);
  const DrivableGrid coarse = drivable_grid(map, 1.0);
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> x(-60, 60), y(-40, 40);
  const double half = 0.5 * map.lane_width;
  int checked = 0;
  for (int i = 0; i < 20000; ++i) {
    const Vec2 p{x(g), y(g)};
    double d = INFINITY;
    for (const auto& lane : map.lanes) d = std::min(d, point_polyline_distance(p, lane));
    // At least one coarse cell diagonal from the boundary.
    if (std::abs(d - half) < coarse.resolution * std::sqrt(2.0)) continue;
    ++checked;
    const bool truth = d <= half;
    ASSERT_EQ(point_drivable(map, p), truth);
    ASSERT_EQ(fine.drivable_at(p), truth) << p.x << "," << p.y;
    ASSERT_EQ(coarse.drivable_at(p), truth) << p.x << "," << p.y;
  }
  EXPECT_GT(checked, 10000);
}
