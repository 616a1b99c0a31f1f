#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sim2real/curation.hpp"
#include "sim2real/error.hpp"
#include "sim2real/records.hpp"

namespace sim2real {

using Json = nlohmann::ordered_json;

namespace io_detail {

inline const Json& field(const Json& j, const char* name) {
  if (!j.is_object()) throw Error(ErrorCode::kValidation, std::string(name) + ": parent is not an object");
  auto it = j.find(name);
  if (it == j.end()) throw Error(ErrorCode::kValidation, std::string(name) + ": missing");
  return *it;
}

template <typename T>
T get(const Json& j, const char* name) {
  const Json& v = field(j, name);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kValidation, std::string(name) + ": wrong type");
  }
}

inline double num(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_number()) throw Error(ErrorCode::kValidation, std::string(name) + ": expected a number");
  return v.get<double>();
}

inline const Json& array(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_array()) throw Error(ErrorCode::kValidation, std::string(name) + ": expected an array");
  return v;
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Leaf types

inline Json to_json(const Pose& p) { return {{"x", p.x}, {"y", p.y}, {"z", p.z}, {"yaw", p.yaw}}; }

inline Pose pose_from_json(const Json& j) {
  using namespace io_detail;
  return {num(j, "x"), num(j, "y"), num(j, "z"), num(j, "yaw")};
}

inline Json to_json(const AgentState& a) {
  return {{"id", a.id}, {"kind", to_string(a.kind)}, {"pose", to_json(a.pose)},
          {"v", a.v},   {"length", a.length},        {"width", a.width}};
}

inline AgentState agent_from_json(const Json& j) {
  using namespace io_detail;
  AgentState a;
  a.id = get<int>(j, "id");
  const auto kind = get<std::string>(j, "kind");
  if (kind == "vehicle") {
    a.kind = AgentKind::kVehicle;
  } else if (kind == "pedestrian") {
    a.kind = AgentKind::kPedestrian;
  } else {
    throw Error(ErrorCode::kValidation, "kind: unknown agent kind '" + kind + "'");
  }
  a.pose = pose_from_json(field(j, "pose"));
  a.v = num(j, "v");
  a.length = num(j, "length");
  a.width = num(j, "width");
  return a;
}

inline Json to_json(const EnvCondition& e) { return {{"time", to_string(e.time)}, {"weather", to_string(e.weather)}}; }

inline EnvCondition env_from_json(const Json& j) {
  using namespace io_detail;
  EnvCondition e;
  const auto t = get<std::string>(j, "time");
  const auto w = get<std::string>(j, "weather");
  if (t == "day") {
    e.time = TimeOfDay::kDay;
  } else if (t == "night") {
    e.time = TimeOfDay::kNight;
  } else {
    throw Error(ErrorCode::kValidation, "env.time: unknown value '" + t + "'");
  }
  if (w == "sunny") {
    e.weather = Weather::kSunny;
  } else if (w == "rainy") {
    e.weather = Weather::kRainy;
  } else {
    throw Error(ErrorCode::kValidation, "env.weather: unknown value '" + w + "'");
  }
  return e;
}

inline Json to_json(const Transform4& t) {
  Json a = Json::array();
  for (double v : t.m) a.push_back(v);
  return a;
}

inline Transform4 transform_from_json(const Json& j, const char* name) {
  if (!j.is_array() || j.size() != 16) throw Error(ErrorCode::kValidation, std::string(name) + ": expected 16 numbers");
  Transform4 t;
  for (std::size_t i = 0; i < 16; ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::kValidation, std::string(name) + ": expected 16 numbers");
    t.m[i] = j[i].get<double>();
  }
  return t;
}

inline Json to_json(const CameraCalibration& c) {
  return {{"name", c.name},   {"fx", c.fx},         {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
          {"width", c.width}, {"height", c.height}, {"cam_to_ego", to_json(c.cam_to_ego)}};
}

inline CameraCalibration camera_from_json(const Json& j) {
  using namespace io_detail;
  CameraCalibration c;
  c.name = get<std::string>(j, "name");
  c.fx = num(j, "fx");
  c.fy = num(j, "fy");
  c.cx = num(j, "cx");
  c.cy = num(j, "cy");
  c.width = get<int>(j, "width");
  c.height = get<int>(j, "height");
  c.cam_to_ego = transform_from_json(field(j, "cam_to_ego"), "cam_to_ego");
  return c;
}

inline Json to_json(const Vec2& p) { return Json::array({p.x, p.y}); }

inline Vec2 point_from_json(const Json& j, const char* name) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorCode::kValidation, std::string(name) + ": expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

// ---------------------------------------------------------------------------
// Maps

inline Json to_json(const RoadMap& m) {
  Json lanes = Json::array();
  for (const auto& l : m.lanes) {
    Json pts = Json::array();
    for (const auto& p : l) pts.push_back(to_json(p));
    lanes.push_back(pts);
  }
  Json signals = Json::array();
  for (const auto& x : m.intersections) {
    Json phases = Json::array();
    for (const auto& p : x.phases) phases.push_back({{"t", p.t}, {"state", to_string(p.state)}});
    signals.push_back({{"position", to_json(x.position)}, {"stop_line_s", x.stop_line_s}, {"phases", phases}});
  }
  return {{"lane_width", m.lane_width}, {"lanes", lanes}, {"signals", signals}};
}

inline RoadMap map_from_json(const Json& j) {
  using namespace io_detail;
  RoadMap m;
  m.lane_width = num(j, "lane_width");
  for (const auto& l : array(j, "lanes")) {
    if (!l.is_array()) throw Error(ErrorCode::kValidation, "lanes: expected point lists");
    Polyline pts;
    for (const auto& p : l) pts.push_back(point_from_json(p, "lanes"));
    m.lanes.push_back(std::move(pts));
  }
  if (j.contains("signals")) {
    for (const auto& s : array(j, "signals")) {
      Intersection x;
      x.position = point_from_json(field(s, "position"), "position");
      x.stop_line_s = num(s, "stop_line_s");
      for (const auto& p : array(s, "phases")) {
        const auto st = get<std::string>(p, "state");
        SignalState state = SignalState::kGreen;
        if (st == "yellow") {
          state = SignalState::kYellow;
        } else if (st == "red") {
          state = SignalState::kRed;
        } else if (st != "green") {
          throw Error(ErrorCode::kValidation, "state: unknown signal state '" + st + "'");
        }
        x.phases.push_back({num(p, "t"), state});
      }
      m.intersections.push_back(std::move(x));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Records

inline Json to_json(const EpisodeRecord& r) {
  Json cams = Json::array();
  for (const auto& c : r.cameras) cams.push_back(to_json(c));
  Json hist = Json::array();
  for (const auto& h : r.history) {
    Json agents = Json::array();
    for (const auto& a : h.agents) agents.push_back(to_json(a));
    hist.push_back({{"t", h.t}, {"ego", {{"pose", to_json(h.ego.pose)}, {"v", h.ego.v}}}, {"agents", agents}});
  }
  Json wps = Json::array();
  for (const auto& w : r.gt_waypoints) wps.push_back(to_json(w));
  Json speeds = Json::array();
  for (double v : r.gt_speeds) speeds.push_back(v);
  return {{"id", r.id},
          {"provenance", to_string(r.provenance)},
          {"city", r.city},
          {"env", to_json(r.env)},
          {"maneuver", to_string(r.maneuver)},
          {"scenario", to_string(r.scenario)},
          {"frame_convention", to_string(r.frame_convention)},
          {"cameras", cams},
          {"history", hist},
          {"command", r.command},
          {"gt_waypoints", wps},
          {"gt_speeds", speeds}};
}

/// Parses and validates one record; throws kValidation naming the field.
inline EpisodeRecord record_from_json(const Json& j) {
  using namespace io_detail;
  EpisodeRecord r;
  r.id = get<std::string>(j, "id");
  const auto prov = get<std::string>(j, "provenance");
  if (prov == "sim") {
    r.provenance = Provenance::kSim;
  } else if (prov == "real") {
    r.provenance = Provenance::kReal;
  } else {
    throw Error(ErrorCode::kValidation, "provenance: unknown value '" + prov + "'");
  }
  r.city = get<std::string>(j, "city");
  r.env = env_from_json(field(j, "env"));
  const auto man = get<std::string>(j, "maneuver");
  if (man == "straight") {
    r.maneuver = ManeuverLabel::kStraight;
  } else if (man == "turn") {
    r.maneuver = ManeuverLabel::kTurn;
  } else {
    throw Error(ErrorCode::kValidation, "maneuver: unknown value '" + man + "'");
  }
  try {
    r.scenario = parse_category(get<std::string>(j, "scenario"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kValidation) throw;
    throw Error(ErrorCode::kValidation, std::string("scenario: ") + e.what());
  }
  try {
    r.frame_convention = parse_convention(get<std::string>(j, "frame_convention"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kValidation) throw;
    throw Error(ErrorCode::kValidation, std::string("frame_convention: ") + e.what());
  }
  for (const auto& c : array(j, "cameras")) r.cameras.push_back(camera_from_json(c));
  for (const auto& h : array(j, "history")) {
    HistoryFrame f;
    f.t = num(h, "t");
    const Json& ego = field(h, "ego");
    f.ego.pose = pose_from_json(field(ego, "pose"));
    f.ego.v = num(ego, "v");
    for (const auto& a : array(h, "agents")) f.agents.push_back(agent_from_json(a));
    r.history.push_back(std::move(f));
  }
  r.command = get<std::string>(j, "command");
  for (const auto& w : array(j, "gt_waypoints")) r.gt_waypoints.push_back(point_from_json(w, "gt_waypoints"));
  for (const auto& v : array(j, "gt_speeds")) {
    if (!v.is_number()) throw Error(ErrorCode::kValidation, "gt_speeds: expected numbers");
    r.gt_speeds.push_back(v.get<double>());
  }
  validate_record(r);
  return r;
}

// ---------------------------------------------------------------------------
// Scenes

inline Json to_json(const EvalScene& s) {
  Json fut = Json::array();
  for (const auto& step : s.future_agents) {
    Json agents = Json::array();
    for (const auto& a : step) agents.push_back(to_json(a));
    fut.push_back(agents);
  }
  return {{"id", s.id}, {"frame_convention", to_string(s.frame_convention)}, {"future_agents", fut}, {"map", to_json(s.map)}};
}

inline EvalScene scene_from_json(const Json& j) {
  using namespace io_detail;
  EvalScene s;
  s.id = get<std::string>(j, "id");
  try {
    s.frame_convention = parse_convention(get<std::string>(j, "frame_convention"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kValidation) throw;
    throw Error(ErrorCode::kValidation, std::string("frame_convention: ") + e.what());
  }
  for (const auto& step : array(j, "future_agents")) {
    if (!step.is_array()) throw Error(ErrorCode::kValidation, "future_agents: expected agent lists");
    std::vector<AgentState> agents;
    for (const auto& a : step) agents.push_back(agent_from_json(a));
    s.future_agents.push_back(std::move(agents));
  }
  s.map = map_from_json(field(j, "map"));
  validate_scene(s);
  return s;
}

// ---------------------------------------------------------------------------
// Manifest

inline Json to_json(const DatasetManifest& m) {
  Json strata = Json::object();
  for (const auto& [k, v] : m.stratum_counts) strata[k] = v;
  Json dims = Json::object();
  for (const auto& [d, values] : m.dimension_counts) {
    Json jv = Json::object();
    for (const auto& [k, v] : values) jv[k] = v;
    dims[d] = jv;
  }
  Json prov = Json::object();
  for (const auto& [k, v] : m.provenance) prov[k] = v;
  return {{"size", m.size},        {"stratum_counts", strata}, {"dimension_counts", dims},
          {"provenance", prov},    {"seeds", m.seeds},         {"toolkit_version", m.toolkit_version}};
}

// ---------------------------------------------------------------------------
// JSONL streams

/// One compact JSON object per line. Doubles are written in shortest
/// round-trip form (up to 17 significant digits).
template <typename T>
void write_jsonl(std::ostream& out, const std::vector<T>& items) {
  for (const auto& item : items) out << to_json(item).dump() << '\n';
}

template <typename T, typename Parse>
std::vector<T> read_jsonl(std::istream& in, Parse parse) {
  std::vector<T> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw LineError(ErrorCode::kParse, n, e.what());
    }
    try {
      out.push_back(parse(j));
    } catch (const Error& e) {
      throw LineError(e.code() == ErrorCode::kParse ? ErrorCode::kParse : ErrorCode::kValidation, n, e.what());
    }
  }
  return out;
}

inline void write_records(std::ostream& out, const std::vector<EpisodeRecord>& records) {
  for (const auto& r : records) validate_record(r);
  write_jsonl(out, records);
}

inline std::vector<EpisodeRecord> read_records(std::istream& in) {
  return read_jsonl<EpisodeRecord>(in, record_from_json);
}

inline void write_scenes(std::ostream& out, const std::vector<EvalScene>& scenes) {
  for (const auto& s : scenes) validate_scene(s);
  write_jsonl(out, scenes);
}

inline std::vector<EvalScene> read_scenes(std::istream& in) { return read_jsonl<EvalScene>(in, scene_from_json); }

namespace io_detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingInput, "cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write '" + path + "'");
  return out;
}

}  // namespace io_detail

inline std::vector<EpisodeRecord> load_records(const std::string& path) {
  auto in = io_detail::open_input(path);
  return read_records(in);
}

inline void save_records(const std::string& path, const std::vector<EpisodeRecord>& records) {
  auto out = io_detail::open_output(path);
  write_records(out, records);
}

inline std::vector<EvalScene> load_scenes(const std::string& path) {
  auto in = io_detail::open_input(path);
  return read_scenes(in);
}

inline void save_scenes(const std::string& path, const std::vector<EvalScene>& scenes) {
  auto out = io_detail::open_output(path);
  write_scenes(out, scenes);
}

inline Json load_json(const std::string& path) {
  auto in = io_detail::open_input(path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

inline void save_json(const std::string& path, const Json& j) {
  auto out = io_detail::open_output(path);
  out << j.dump(2) << '\n';
}

inline void save_text(const std::string& path, const std::string& text) {
  auto out = io_detail::open_output(path);
  out << text;
}

}  // namespace sim2real
