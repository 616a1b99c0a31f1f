#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sim2real/error.hpp"
#include "sim2real/obb.hpp"
#include "sim2real/records.hpp"
#include "sim2real/world.hpp"

namespace sim2real {

inline constexpr int kHorizons = 3;

/// Values at 1 s, 2 s, 3 s and their mean.
struct HorizonValues {
  double h1 = 0.0;
  double h2 = 0.0;
  double h3 = 0.0;
  double avg = 0.0;

  double at(int h) const { return h == 1 ? h1 : h == 2 ? h2 : h3; }
};

namespace detail {

// Horizon h averages per-step values 1..2h.
inline HorizonValues horizon_means(const std::array<double, kFutureFrames>& per_step) {
  HorizonValues out;
  double acc = 0.0;
  for (int t = 0; t < kFutureFrames; ++t) {
    acc += per_step[static_cast<std::size_t>(t)];
    if (t == 1) out.h1 = acc / 2.0;
    if (t == 3) out.h2 = acc / 4.0;
    if (t == 5) out.h3 = acc / 6.0;
  }
  out.avg = (out.h1 + out.h2 + out.h3) / 3.0;
  return out;
}

inline void require_six(const Trajectory& t, const char* what) {
  if (t.waypoints.size() != static_cast<std::size_t>(kFutureFrames)) {
    throw Error(ErrorCode::kValidation, std::string(what) + ": expected 6 waypoints");
  }
}

}  // namespace detail

/// Mean Euclidean distance over the waypoints up to each horizon.
inline HorizonValues l2_metric(const Trajectory& pred, const Trajectory& gt) {
  detail::require_six(pred, "prediction");
  detail::require_six(gt, "ground truth");
  std::array<double, kFutureFrames> d{};
  for (std::size_t t = 0; t < d.size(); ++t) d[t] = (pred.waypoints[t] - gt.waypoints[t]).norm();
  return detail::horizon_means(d);
}

// ---------------------------------------------------------------------------
// Footprints

struct EgoDims {
  double length = 4.0;
  double width = 1.8;
};

/// Ego boxes at each waypoint. Heading points to the next waypoint; the last
/// waypoint, and any waypoint coinciding with its successor, keeps the
/// previous heading (0 before the first defined one).
inline std::vector<ObbFootprint> ego_footprints(const Trajectory& t, const EgoDims& dims = {}) {
  detail::require_six(t, "prediction");
  std::vector<ObbFootprint> out;
  double heading = 0.0;
  for (std::size_t k = 0; k < t.waypoints.size(); ++k) {
    if (k + 1 < t.waypoints.size()) {
      const Vec2 d = t.waypoints[k + 1] - t.waypoints[k];
      if (d.norm() > 1e-9) heading = std::atan2(d.y, d.x);
    }
    out.push_back({t.waypoints[k], heading, dims.length, dims.width});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Event rates

/// Per-timestep counters with sticky trajectory-level events: once a
/// trajectory has an event at step t it counts at every later step.
struct EventCounts {
  std::array<std::size_t, kFutureFrames> n_event{};
  std::array<std::size_t, kFutureFrames> n_total{};
  std::size_t out_of_grid = 0;  // boundary only: footprint cells beyond the raster

  void add(int first_event) {
    for (int t = 0; t < kFutureFrames; ++t) {
      ++n_total[static_cast<std::size_t>(t)];
      if (first_event >= 0 && t >= first_event) ++n_event[static_cast<std::size_t>(t)];
    }
  }
  void merge(const EventCounts& o) {
    for (std::size_t t = 0; t < n_event.size(); ++t) {
      n_event[t] += o.n_event[t];
      n_total[t] += o.n_total[t];
    }
    out_of_grid += o.out_of_grid;
  }
  std::array<double, kFutureFrames> percent() const {
    std::array<double, kFutureFrames> p{};
    for (std::size_t t = 0; t < p.size(); ++t) {
      p[t] = n_total[t] == 0 ? 0.0 : 100.0 * static_cast<double>(n_event[t]) / static_cast<double>(n_total[t]);
    }
    return p;
  }
  HorizonValues horizons() const { return detail::horizon_means(percent()); }
};

struct Prediction {
  std::string id;
  Trajectory trajectory;
};

namespace detail {

inline void check_ids(const std::vector<Prediction>& preds, const std::vector<EvalScene>& scenes) {
  if (preds.size() != scenes.size()) {
    throw Error(ErrorCode::kIdMismatch, std::to_string(preds.size()) + " predictions for " +
                                            std::to_string(scenes.size()) + " scenes");
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].id != scenes[i].id) {
      throw Error(ErrorCode::kIdMismatch, "prediction '" + preds[i].id + "' paired with scene '" + scenes[i].id + "'");
    }
  }
}

}  // namespace detail

/// First waypoint index (0-based) at which the ego box overlaps an agent at
/// the same time, or -1.
inline int first_collision(const Trajectory& pred, const EvalScene& scene, const EgoDims& dims = {}) {
  const auto boxes = ego_footprints(pred, dims);
  for (std::size_t t = 0; t < boxes.size(); ++t) {
    for (const auto& a : scene.future_agents[t]) {
      if (obb_overlap(boxes[t], {a.pose.xy(), a.pose.yaw, a.length, a.width})) return static_cast<int>(t);
    }
  }
  return -1;
}

inline EventCounts collision_counts(const std::vector<Prediction>& preds, const std::vector<EvalScene>& scenes,
                                    const EgoDims& dims = {}) {
  detail::check_ids(preds, scenes);
  EventCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) c.add(first_collision(preds[i].trajectory, scenes[i], dims));
  return c;
}

inline HorizonValues collision_rate(const std::vector<Prediction>& preds, const std::vector<EvalScene>& scenes,
                                    const EgoDims& dims = {}) {
  return collision_counts(preds, scenes, dims).horizons();
}

struct FootprintCheck {
  bool violation = false;
  bool out_of_grid = false;
};

/// Rasterizes the box as the set of grid cells it overlaps (edge contact
/// excluded); a violation is any such cell that is non-drivable or outside
/// the raster.
inline FootprintCheck footprint_violation(const ObbFootprint& box, const DrivableGrid& g) {
  double xmin = box.center.x, xmax = xmin, ymin = box.center.y, ymax = ymin;
  for (const auto& c : box.corners()) {
    xmin = std::min(xmin, c.x);
    xmax = std::max(xmax, c.x);
    ymin = std::min(ymin, c.y);
    ymax = std::max(ymax, c.y);
  }
  FootprintCheck out;
  const int i0 = g.cell_x(xmin), i1 = g.cell_x(xmax);
  const int j0 = g.cell_y(ymin), j1 = g.cell_y(ymax);
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) {
      if (!obb_overlap(box, {g.cell_center(i, j), 0.0, g.resolution, g.resolution})) continue;
      if (!g.in_extent(i, j)) {
        out.violation = out.out_of_grid = true;
      } else if (!g.drivable_cell(i, j)) {
        out.violation = true;
      }
    }
  }
  return out;
}

inline EventCounts boundary_counts(const std::vector<Prediction>& preds, const std::vector<EvalScene>& scenes,
                                   const std::vector<DrivableGrid>& grids, const EgoDims& dims = {}) {
  detail::check_ids(preds, scenes);
  if (grids.size() != scenes.size()) throw Error(ErrorCode::kIdMismatch, "one grid per scene required");
  EventCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto boxes = ego_footprints(preds[i].trajectory, dims);
    int first = -1;
    for (std::size_t t = 0; t < boxes.size() && first < 0; ++t) {
      const auto chk = footprint_violation(boxes[t], grids[i]);
      if (chk.out_of_grid) ++c.out_of_grid;
      if (chk.violation) first = static_cast<int>(t);
    }
    c.add(first);
  }
  return c;
}

inline HorizonValues boundary_rate(const std::vector<Prediction>& preds, const std::vector<EvalScene>& scenes,
                                   const std::vector<DrivableGrid>& grids, const EgoDims& dims = {}) {
  return boundary_counts(preds, scenes, grids, dims).horizons();
}

inline std::vector<DrivableGrid> scene_grids(const std::vector<EvalScene>& scenes, double resolution = 0.25) {
  std::vector<DrivableGrid> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(drivable_grid(s.map, resolution));
  return out;
}

// ---------------------------------------------------------------------------
// Sliced reports

struct SliceMetrics {
  std::size_t n = 0;
  HorizonValues l2;
  EventCounts collision;
  EventCounts boundary;
};

using MetricsReport = std::map<std::string, SliceMetrics>;

inline const std::vector<std::string>& slice_names() {
  static const std::vector<std::string> names = {"all", "day", "night", "sunny", "rainy", "straight", "turn", "E2D", "H2D"};
  return names;
}

inline bool in_slice(const EpisodeRecord& r, const std::string& slice) {
  if (slice == "all") return true;
  if (slice == "day") return r.env.time == TimeOfDay::kDay;
  if (slice == "night") return r.env.time == TimeOfDay::kNight;
  if (slice == "sunny") return r.env.weather == Weather::kSunny;
  if (slice == "rainy") return r.env.weather == Weather::kRainy;
  if (slice == "straight") return r.maneuver == ManeuverLabel::kStraight;
  if (slice == "turn") return r.maneuver == ManeuverLabel::kTurn;
  if (slice == "E2D") return r.difficulty() == Difficulty::kE2D;
  if (slice == "H2D") return r.difficulty() == Difficulty::kH2D;
  throw Error(ErrorCode::kInvalidArgument, "unknown slice '" + slice + "'");
}

struct EvalSettings {
  EgoDims ego;
  double grid_resolution = 0.25;
};

/// Metrics over the named slices. `records`, `preds` and `scenes` are
/// parallel; `grids` may be empty, in which case they are built here.
inline MetricsReport evaluate(const std::vector<EpisodeRecord>& records, const std::vector<Prediction>& preds,
                              const std::vector<EvalScene>& scenes, const EvalSettings& settings = {},
                              std::vector<DrivableGrid> grids = {}) {
  detail::check_ids(preds, scenes);
  if (records.size() != preds.size()) throw Error(ErrorCode::kIdMismatch, "records and predictions differ in count");
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].id != preds[i].id) throw Error(ErrorCode::kIdMismatch, "record '" + records[i].id + "' paired with prediction '" + preds[i].id + "'");
  }
  if (grids.empty()) grids = scene_grids(scenes, settings.grid_resolution);
  std::vector<HorizonValues> l2(records.size());
  std::vector<int> coll(records.size()), bound(records.size());
  std::vector<std::size_t> oob(records.size(), 0);
  for (std::size_t i = 0; i < records.size(); ++i) {
    l2[i] = l2_metric(preds[i].trajectory, ground_truth(records[i]));
    coll[i] = first_collision(preds[i].trajectory, scenes[i], settings.ego);
    EventCounts one = boundary_counts({preds[i]}, {scenes[i]}, {grids[i]}, settings.ego);
    bound[i] = -1;
    for (int t = 0; t < kFutureFrames; ++t) {
      if (one.n_event[static_cast<std::size_t>(t)] > 0) {
        bound[i] = t;
        break;
      }
    }
    oob[i] = one.out_of_grid;
  }
  MetricsReport rep;
  for (const auto& slice : slice_names()) {
    SliceMetrics m;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!in_slice(records[i], slice)) continue;
      ++m.n;
      m.l2.h1 += l2[i].h1;
      m.l2.h2 += l2[i].h2;
      m.l2.h3 += l2[i].h3;
      m.collision.add(coll[i]);
      m.boundary.add(bound[i]);
      m.boundary.out_of_grid += oob[i];
    }
    if (m.n > 0) {
      m.l2.h1 /= static_cast<double>(m.n);
      m.l2.h2 /= static_cast<double>(m.n);
      m.l2.h3 /= static_cast<double>(m.n);
    }
    m.l2.avg = (m.l2.h1 + m.l2.h2 + m.l2.h3) / 3.0;
    rep[slice] = m;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Output

inline nlohmann::ordered_json to_json(const HorizonValues& h) {
  return {{"1s", h.h1}, {"2s", h.h2}, {"3s", h.h3}, {"avg", h.avg}};
}

inline nlohmann::ordered_json to_json(const EventCounts& c) {
  return {{"N_event", c.n_event}, {"N_total", c.n_total}, {"out_of_grid", c.out_of_grid}};
}

inline nlohmann::ordered_json to_json(const MetricsReport& rep) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& slice : slice_names()) {
    auto it = rep.find(slice);
    if (it == rep.end()) continue;
    const SliceMetrics& m = it->second;
    j[slice] = {{"n", m.n},
                {"l2", to_json(m.l2)},
                {"collision_pct", to_json(m.collision.horizons())},
                {"boundary_pct", to_json(m.boundary.horizons())},
                {"collision_counters", to_json(m.collision)},
                {"boundary_counters", to_json(m.boundary)}};
  }
  return j;
}

inline std::string fmt_fixed(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// Plain-text table, one row per method: L2 (m), collision (%) and boundary
/// violation (%) at 1s/2s/3s/avg.
inline std::string metrics_table(const std::vector<std::pair<std::string, SliceMetrics>>& rows, const std::string& title) {
  std::string out = title + "\n";
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-16s | %-27s | %-27s | %-27s\n", "method", "L2 (m) 1s/2s/3s/avg",
                "Collision (%) 1s/2s/3s/avg", "Boundary (%) 1s/2s/3s/avg");
  out += buf;
  out += std::string(108, '-') + "\n";
  for (const auto& [name, m] : rows) {
    const HorizonValues c = m.collision.horizons();
    const HorizonValues b = m.boundary.horizons();
    std::snprintf(buf, sizeof buf, "%-16s | %6.2f %6.2f %6.2f %6.2f | %6.2f %6.2f %6.2f %6.2f | %6.2f %6.2f %6.2f %6.2f\n",
                  name.c_str(), m.l2.h1, m.l2.h2, m.l2.h3, m.l2.avg, c.h1, c.h2, c.h3, c.avg, b.h1, b.h2, b.h3, b.avg);
    out += buf;
  }
  return out;
}

/// Tables for every slice, methods as rows.
inline std::string report_text(const std::vector<std::pair<std::string, MetricsReport>>& methods) {
  std::string out;
  for (const auto& slice : slice_names()) {
    std::vector<std::pair<std::string, SliceMetrics>> rows;
    std::size_t n = 0;
    for (const auto& [name, rep] : methods) {
      auto it = rep.find(slice);
      if (it == rep.end()) continue;
      rows.emplace_back(name, it->second);
      n = it->second.n;
    }
    if (rows.empty()) continue;
    out += metrics_table(rows, "[" + slice + "] n=" + std::to_string(n));
    out += "\n";
  }
  return out;
}

/// Top-down overlay: road, agents at the current frame, ground truth (red),
/// baseline (yellow) and evaluated planner (green). Exactly three polylines.
inline std::string overlay_svg(const EpisodeRecord& r, const EvalScene& scene, const Trajectory& baseline,
                               const Trajectory& model) {
  // Ego frame to SVG: forward is up, left is left.
  const double scale = 8.0, w = 480.0, h = 640.0, ox = w / 2.0, oy = h * 0.8;
  const double lateral_sign = r.frame_convention.lateral_axis == LateralAxis::kLeftPositive ? 1.0 : -1.0;
  auto px = [&](const Vec2& p) {
    return std::pair<double, double>{ox - lateral_sign * p.y * scale, oy - p.x * scale};
  };
  auto pt = [&](const Vec2& p) {
    const auto [x, y] = px(p);
    return fmt_fixed(x) + "," + fmt_fixed(y);
  };
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt_fixed(w, 0) + "\" height=\"" +
                  fmt_fixed(h, 0) + "\" viewBox=\"0 0 " + fmt_fixed(w, 0) + " " + fmt_fixed(h, 0) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"#1e1e1e\"/>\n";
  for (const auto& lane : scene.map.lanes) {
    std::string d;
    for (std::size_t i = 0; i < lane.size(); ++i) {
      const auto [x, y] = px(lane[i]);
      d += (i == 0 ? "M" : " L") + fmt_fixed(x) + " " + fmt_fixed(y);
    }
    s += "<path d=\"" + d + "\" stroke=\"#555555\" stroke-width=\"" + fmt_fixed(scene.map.lane_width * scale) +
         "\" fill=\"none\" stroke-linecap=\"round\" stroke-linejoin=\"round\"/>\n";
  }
  if (!r.history.empty()) {
    for (const auto& a : r.history.back().agents) {
      const ObbFootprint box{a.pose.xy(), a.pose.yaw, a.length, a.width};
      std::string pts;
      for (const auto& c : box.corners()) pts += (pts.empty() ? "" : " ") + pt(c);
      s += "<polygon points=\"" + pts + "\" fill=\"#4a90d9\" stroke=\"#ffffff\" stroke-width=\"1\"/>\n";
    }
  }
  auto line = [&](const std::vector<Vec2>& wps, const char* color) {
    std::string pts = pt({0.0, 0.0});
    for (const auto& p : wps) pts += " " + pt(p);
    return "<polyline points=\"" + pts + "\" stroke=\"" + color + "\" stroke-width=\"3\" fill=\"none\"/>\n";
  };
  s += line(r.gt_waypoints, "red");
  s += line(baseline.waypoints, "yellow");
  s += line(model.waypoints, "green");
  s += "</svg>\n";
  return s;
}

}  // namespace sim2real
