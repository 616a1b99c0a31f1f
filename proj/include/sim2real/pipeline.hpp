#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sim2real/curation.hpp"
#include "sim2real/dataset_io.hpp"
#include "sim2real/error.hpp"
#include "sim2real/eval.hpp"
#include "sim2real/planners.hpp"
#include "sim2real/prompt.hpp"
#include "sim2real/records.hpp"
#include "sim2real/scenarios.hpp"
#include "sim2real/simulate.hpp"

namespace sim2real {

// ---------------------------------------------------------------------------
// Configuration

/// How one data source is produced: which scenarios, in which convention,
/// with which camera rig and how much measurement noise.
struct DomainConfig {
  Provenance provenance = Provenance::kSim;
  FrameConvention convention = kRhFluRoof;
  RigPreset rig = RigPreset::kRigB;
  std::string quota = "HASS";
  std::vector<std::string> cities;  // empty: the scenario's own city
  std::size_t common_episodes = 0;
  std::size_t long_tail_episodes = 0;
  double e2d_share = 0.5;  // fraction of common episodes drawn from the easy family
  std::vector<int> anchors = {4, 8, 12, 16};
  double history_position_noise = 0.0;
  double history_speed_noise = 0.0;
  double calibration_jitter = 1.0;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  double horizon_s = 12.0;
  DomainConfig real;
  DomainConfig sim;
  std::string generate_domain = "sim";
  std::size_t generate_count = 0;  // 0: keep the whole pool
  std::size_t curate_size = 0;     // 0: as many as the pool holds
  std::string curate_quota;        // empty: the domain's quota
  std::size_t real_train = 300;
  std::size_t real_test = 600;
  std::size_t sim_train = 700;
  double lambda = 1e-3;
  double real_weight = 20.0;  // per-record weight of real data in mixed training
  FeatureSpec features;
  EvalSettings eval;
  double holdout_fraction = 0.3;
  std::size_t overlays = 4;
  bool align = true;
  std::string output_dir = "out";
};

inline DomainConfig default_real_domain() {
  DomainConfig d;
  d.provenance = Provenance::kReal;
  d.convention = kRhFluRoof;
  d.rig = RigPreset::kRigA;
  d.quota = "nuScenes-like";
  d.cities = {"Boston", "Singapore"};
  d.common_episodes = 500;
  d.e2d_share = 0.6;
  d.history_position_noise = 0.05;
  d.history_speed_noise = 0.1;
  return d;
}

inline DomainConfig default_sim_domain() {
  DomainConfig d;
  d.provenance = Provenance::kSim;
  d.convention = kLhFruWheel;
  d.rig = RigPreset::kRigB;
  d.quota = "HASS";
  d.common_episodes = 400;
  d.long_tail_episodes = 260;
  d.e2d_share = 0.3;
  return d;
}

inline ExperimentConfig default_config() {
  ExperimentConfig c;
  c.real = default_real_domain();
  c.sim = default_sim_domain();
  return c;
}

namespace detail {

inline void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::kValidation, where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw Error(ErrorCode::kValidation, where + "." + k + ": unknown key");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kValidation, where + "." + key + ": wrong type");
  }
}

inline DomainConfig domain_from_json(const Json& j, DomainConfig d, const std::string& where) {
  check_keys(j,
             {"provenance", "convention", "rig", "quota", "cities", "common_episodes", "long_tail_episodes", "e2d_share",
              "anchors", "history_position_noise", "history_speed_noise", "calibration_jitter"},
             where);
  std::string s;
  if (j.contains("provenance")) {
    read(j, "provenance", s, where);
    if (s != "sim" && s != "real") throw Error(ErrorCode::kValidation, where + ".provenance: expected sim or real");
    d.provenance = s == "sim" ? Provenance::kSim : Provenance::kReal;
  }
  if (j.contains("convention")) {
    read(j, "convention", s, where);
    try {
      d.convention = parse_convention(s);
    } catch (const Error& e) {
      throw Error(ErrorCode::kValidation, where + ".convention: " + e.what());
    }
  }
  if (j.contains("rig")) {
    read(j, "rig", s, where);
    d.rig = parse_rig(s);
  }
  read(j, "quota", d.quota, where);
  quota_preset(d.quota);
  read(j, "cities", d.cities, where);
  read(j, "common_episodes", d.common_episodes, where);
  read(j, "long_tail_episodes", d.long_tail_episodes, where);
  read(j, "e2d_share", d.e2d_share, where);
  read(j, "anchors", d.anchors, where);
  read(j, "history_position_noise", d.history_position_noise, where);
  read(j, "history_speed_noise", d.history_speed_noise, where);
  read(j, "calibration_jitter", d.calibration_jitter, where);
  if (!(d.e2d_share >= 0.0 && d.e2d_share <= 1.0)) throw Error(ErrorCode::kValidation, where + ".e2d_share: outside [0,1]");
  if (d.anchors.empty()) throw Error(ErrorCode::kValidation, where + ".anchors: empty");
  if (d.history_position_noise < 0.0 || d.history_speed_noise < 0.0 || d.calibration_jitter < 0.0) {
    throw Error(ErrorCode::kValidation, where + ": noise levels must be >= 0");
  }
  return d;
}

}  // namespace detail

/// Parses a configuration; absent keys keep their defaults, unknown keys are
/// rejected.
inline ExperimentConfig config_from_json(const Json& j) {
  using detail::check_keys;
  using detail::read;
  ExperimentConfig c = default_config();
  check_keys(j, {"seed", "horizon_s", "real", "sim", "generate", "curate", "experiment", "planner", "eval", "output_dir"},
             "config");
  read(j, "seed", c.seed, "config");
  read(j, "horizon_s", c.horizon_s, "config");
  read(j, "output_dir", c.output_dir, "config");
  if (j.contains("real")) c.real = detail::domain_from_json(j["real"], c.real, "real");
  if (j.contains("sim")) c.sim = detail::domain_from_json(j["sim"], c.sim, "sim");
  if (j.contains("generate")) {
    check_keys(j["generate"], {"domain", "count"}, "generate");
    read(j["generate"], "domain", c.generate_domain, "generate");
    read(j["generate"], "count", c.generate_count, "generate");
    if (c.generate_domain != "sim" && c.generate_domain != "real") {
      throw Error(ErrorCode::kValidation, "generate.domain: expected sim or real");
    }
  }
  if (j.contains("curate")) {
    check_keys(j["curate"], {"size", "quota"}, "curate");
    read(j["curate"], "size", c.curate_size, "curate");
    read(j["curate"], "quota", c.curate_quota, "curate");
    if (!c.curate_quota.empty()) quota_preset(c.curate_quota);
  }
  if (j.contains("experiment")) {
    check_keys(j["experiment"], {"real_train", "real_test", "sim_train"}, "experiment");
    read(j["experiment"], "real_train", c.real_train, "experiment");
    read(j["experiment"], "real_test", c.real_test, "experiment");
    read(j["experiment"], "sim_train", c.sim_train, "experiment");
  }
  if (j.contains("planner")) {
    check_keys(j["planner"], {"lambda", "real_weight", "features"}, "planner");
    read(j["planner"], "lambda", c.lambda, "planner");
    read(j["planner"], "real_weight", c.real_weight, "planner");
    if (!(c.real_weight > 0.0)) throw Error(ErrorCode::kValidation, "planner.real_weight: must be > 0");
    if (j["planner"].contains("features")) c.features = feature_spec_from_json(j["planner"]["features"]);
    if (!(c.lambda > 0.0)) throw Error(ErrorCode::kValidation, "planner.lambda: must be > 0");
  }
  if (j.contains("eval")) {
    check_keys(j["eval"], {"grid_resolution", "ego_length", "ego_width", "holdout_fraction", "overlays"}, "eval");
    read(j["eval"], "grid_resolution", c.eval.grid_resolution, "eval");
    read(j["eval"], "ego_length", c.eval.ego.length, "eval");
    read(j["eval"], "ego_width", c.eval.ego.width, "eval");
    read(j["eval"], "holdout_fraction", c.holdout_fraction, "eval");
    read(j["eval"], "overlays", c.overlays, "eval");
    if (!(c.eval.ego.length > 0.0 && c.eval.ego.width > 0.0)) throw Error(ErrorCode::kValidation, "eval: ego dims must be > 0");
    if (!(c.holdout_fraction > 0.0 && c.holdout_fraction < 1.0)) {
      throw Error(ErrorCode::kValidation, "eval.holdout_fraction: must lie in (0,1)");
    }
  }
  if (!(c.horizon_s >= 5.5)) throw Error(ErrorCode::kValidation, "horizon_s: must be >= 5.5");
  return c;
}

inline Json config_to_json(const ExperimentConfig& c) {
  auto domain = [](const DomainConfig& d) {
    return Json{{"provenance", to_string(d.provenance)},
                {"convention", to_string(d.convention)},
                {"rig", to_string(d.rig)},
                {"quota", d.quota},
                {"cities", d.cities},
                {"common_episodes", d.common_episodes},
                {"long_tail_episodes", d.long_tail_episodes},
                {"e2d_share", d.e2d_share},
                {"anchors", d.anchors},
                {"history_position_noise", d.history_position_noise},
                {"history_speed_noise", d.history_speed_noise},
                {"calibration_jitter", d.calibration_jitter}};
  };
  return Json{{"seed", c.seed},
              {"horizon_s", c.horizon_s},
              {"real", domain(c.real)},
              {"sim", domain(c.sim)},
              {"generate", {{"domain", c.generate_domain}, {"count", c.generate_count}}},
              {"curate", {{"size", c.curate_size}, {"quota", c.curate_quota}}},
              {"experiment", {{"real_train", c.real_train}, {"real_test", c.real_test}, {"sim_train", c.sim_train}}},
              {"planner", {{"lambda", c.lambda}, {"real_weight", c.real_weight}, {"features", to_json(c.features)}}},
              {"eval",
               {{"grid_resolution", c.eval.grid_resolution},
                {"ego_length", c.eval.ego.length},
                {"ego_width", c.eval.ego.width},
                {"holdout_fraction", c.holdout_fraction},
                {"overlays", c.overlays}}},
              {"output_dir", c.output_dir}};
}

// ---------------------------------------------------------------------------
// Pools

/// Records and their evaluation scenes, index-aligned.
struct DataPool {
  std::vector<EpisodeRecord> records;
  std::vector<EvalScene> scenes;
  std::vector<std::uint64_t> seeds;  // episode seeds, in generation order
};

namespace detail {

inline std::vector<int> anchors_for(const Episode& e, const DomainConfig& d) {
  const int last = static_cast<int>(e.frames.size()) - 1 - kFutureFrames;
  const int first = kHistoryFrames - 1;
  std::vector<int> out;
  auto add = [&](int a) {
    a = std::clamp(a, first, last);
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  };
  if (category_info(e.spec.category).long_tail && e.hazard_frame >= 0) {
    for (int off : {-3, 0, 3}) add(e.hazard_frame + off);
  } else {
    for (int a : d.anchors) add(a);
  }
  return out;
}

inline const char* domain_tag(const DomainConfig& d) { return d.provenance == Provenance::kSim ? "sim" : "real"; }

}  // namespace detail

/// Simulates the domain's episodes and cuts records at its anchors.
/// `stream` separates independent pools of the same domain (e.g. train and
/// test) under one seed.
inline DataPool generate_pool(const DomainConfig& d, std::uint64_t seed, double horizon_s, std::uint64_t stream = 0) {
  DataPool pool;
  const std::uint64_t base = mix_seed(mix_seed(seed, d.provenance == Provenance::kSim ? 11 : 13), stream);
  Rng rng(base);
  const auto long_tail = long_tail_categories();
  const std::string tag = std::string(detail::domain_tag(d)) + (stream ? "s" + std::to_string(stream) : "");
  std::size_t episode = 0;
  auto run = [&](ScenarioCategory cat, std::uint64_t ep_seed) {
    const ScenarioSpec spec = instantiate_scenario(cat, ep_seed);
    const Episode e = simulate_episode(spec, horizon_s, 0.5);
    const std::string city = d.cities.empty() ? spec.city : d.cities[rng.below(d.cities.size())];
    pool.seeds.push_back(ep_seed);
    if (!e.valid || e.collided) {
      ++episode;
      return;
    }
    for (int a : detail::anchors_for(e, d)) {
      RecordOptions o;
      o.id = tag + "-" + std::to_string(episode) + "-" + std::to_string(a);
      o.provenance = d.provenance;
      o.city = city;
      o.convention = d.convention;
      o.rig = d.rig;
      o.calibration_jitter = d.calibration_jitter;
      o.history_position_noise = d.history_position_noise;
      o.history_speed_noise = d.history_speed_noise;
      o.seed = mix_seed(ep_seed, static_cast<std::uint64_t>(a) + 1000 * (stream + 1));
      pool.records.push_back(build_record(e, a, o));
      pool.scenes.push_back(build_scene(e, a, o));
    }
    ++episode;
  };
  for (std::size_t i = 0; i < d.common_episodes; ++i) {
    const auto cat = rng.bernoulli(d.e2d_share) ? ScenarioCategory::kE2DCommon : ScenarioCategory::kH2DEnvironmental;
    run(cat, mix_seed(base, 2 * i));
  }
  for (std::size_t i = 0; i < d.long_tail_episodes; ++i) {
    run(long_tail[i % long_tail.size()], mix_seed(base, 2 * i + 1));
  }
  return pool;
}

/// Scenes for `records`, looked up by id in `pool`.
inline std::vector<EvalScene> scenes_for(const std::vector<EpisodeRecord>& records, const std::vector<EvalScene>& scenes) {
  std::map<std::string, const EvalScene*> by_id;
  for (const auto& s : scenes) by_id[s.id] = &s;
  std::vector<EvalScene> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw Error(ErrorCode::kIdMismatch, "no scene for record '" + r.id + "'");
    out.push_back(*it->second);
  }
  return out;
}

inline void require_complete(const SampleResult& s, const std::string& what) {
  if (s.complete()) return;
  std::string msg = what + ": quota shortfall";
  for (const auto& f : s.shortfalls) msg += "; " + format_shortfall(f);
  throw Error(ErrorCode::kInsufficientData, msg);
}

// ---------------------------------------------------------------------------
// Sim2Real experiment

struct ConditionResult {
  std::string name;
  std::size_t train_size = 0;
  MetricsReport metrics;
};

struct Sim2RealResult {
  std::vector<ConditionResult> conditions;  // real-only first
  std::size_t test_size = 0;
  std::string text;
  Json json;
};

inline std::string format_delta(double value, double reference) {
  std::string s = fmt_fixed(value);
  if (reference <= 0.0) return s;
  const double pct = 100.0 * (value - reference) / reference;
  return s + " (" + (pct <= 0.0 ? "↓" : "↑") + fmt_fixed(std::abs(pct), 1) + "%)";
}

namespace detail {

// Real records weigh `real_weight`, sim records 1.
inline std::vector<double> domain_weights(const std::vector<EpisodeRecord>& train, double real_weight) {
  std::vector<double> w(train.size(), 1.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].provenance == Provenance::kReal) w[i] = real_weight;
  }
  return w;
}

inline std::vector<Prediction> predict_all(const LinearPlanner& p, const std::vector<EpisodeRecord>& records) {
  std::vector<Prediction> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.id, predict(p, r)});
  return out;
}

// Left-justifies to `width` display columns; UTF-8 continuation bytes take none.
inline std::string pad(const std::string& s, std::size_t width) {
  std::size_t cols = 0;
  for (unsigned char c : s) cols += (c & 0xC0) != 0x80;
  return s + std::string(width > cols ? width - cols : 0, ' ');
}

inline std::string sim2real_table(const Sim2RealResult& res) {
  const ConditionResult& base = res.conditions.front();
  std::string out = "Sim2Real comparison on " + std::to_string(res.test_size) + " held-out real records\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-26s %6s | ", "condition", "train");
  out += buf + pad("E2D L2 avg (m)", 19) + pad("H2D L2 avg (m)", 18) + " | " + pad("E2D coll avg (%)", 19) +
         "H2D coll avg (%)\n";
  out += std::string(114, '-') + "\n";
  for (const auto& c : res.conditions) {
    const bool is_base = &c == &base;
    auto cell = [&](const char* slice, bool l2) {
      const auto& m = c.metrics.at(slice);
      const auto& b = base.metrics.at(slice);
      const double v = l2 ? m.l2.avg : m.collision.horizons().avg;
      const double ref = l2 ? b.l2.avg : b.collision.horizons().avg;
      return is_base ? fmt_fixed(v) : format_delta(v, ref);
    };
    std::snprintf(buf, sizeof buf, "%-26s %6zu | ", c.name.c_str(), c.train_size);
    std::string line = buf + pad(cell("E2D", true), 19) + pad(cell("H2D", true), 18) + " | " +
                       pad(cell("E2D", false), 19) + cell("H2D", false);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace detail

/// Trains the linear planner on (a) pseudo-real data, (b) pseudo-real plus
/// sim data aligned to RH_FLU_ROOF and, when alignment is enabled, (c) the
/// same mix with sim data relabeled but not converted. All conditions are
/// scored on the same held-out pseudo-real set.
inline Sim2RealResult run_sim2real_experiment(const ExperimentConfig& cfg) {
  const DataPool real_train_pool = generate_pool(cfg.real, cfg.seed, cfg.horizon_s, 0);
  const DataPool real_test_pool = generate_pool(cfg.real, cfg.seed, cfg.horizon_s, 1);
  const DataPool sim_pool = generate_pool(cfg.sim, cfg.seed, cfg.horizon_s, 0);

  const StratumQuota real_quota = quota_preset(cfg.real.quota);
  auto real_train = stratified_sample(real_train_pool.records, real_quota, std::min(cfg.real_train, real_train_pool.records.size()),
                                      mix_seed(cfg.seed, 21));
  auto real_test = stratified_sample(real_test_pool.records, real_quota, std::min(cfg.real_test, real_test_pool.records.size()),
                                     mix_seed(cfg.seed, 22));
  auto sim_train = stratified_sample(sim_pool.records, quota_preset(cfg.sim.quota),
                                     std::min(cfg.sim_train, sim_pool.records.size()), mix_seed(cfg.seed, 23));
  require_complete(real_train, "real train");
  require_complete(real_test, "real test");
  require_complete(sim_train, "sim train");
  if (real_test.records.size() < 20) throw Error(ErrorCode::kInsufficientData, "fewer than 20 held-out real records");

  std::vector<EpisodeRecord> test = real_test.records;
  for (auto& r : test) r = align_record(r, kRhFluRoof);
  const std::vector<EvalScene> test_scenes = [&] {
    auto s = scenes_for(real_test.records, real_test_pool.scenes);
    for (auto& x : s) x = align_scene(x, kRhFluRoof);
    return s;
  }();
  const auto grids = scene_grids(test_scenes, cfg.eval.grid_resolution);

  std::vector<EpisodeRecord> real_rh = real_train.records;
  for (auto& r : real_rh) r = align_record(r, kRhFluRoof);

  Sim2RealResult res;
  res.test_size = test.size();
  auto run_condition = [&](const std::string& name, const std::vector<EpisodeRecord>& train) {
    const LinearPlanner p = fit_linear_planner(train, cfg.lambda, cfg.features, detail::domain_weights(train, cfg.real_weight));
    ConditionResult c;
    c.name = name;
    c.train_size = train.size();
    c.metrics = evaluate(test, detail::predict_all(p, test), test_scenes, cfg.eval, grids);
    res.conditions.push_back(std::move(c));
  };
  auto mixed = [&](bool aligned) {
    std::vector<EpisodeRecord> train = real_rh;
    for (const auto& r : sim_train.records) {
      train.push_back(aligned ? align_record(r, kRhFluRoof) : relabel_convention(r, kRhFluRoof));
    }
    return train;
  };
  run_condition("(a) real only", real_rh);
  if (cfg.align) {
    run_condition("(b) real + sim, aligned", mixed(true));
    run_condition("(c) real + sim, no align", mixed(false));
  } else {
    run_condition("(b) real + sim, no align", mixed(false));
  }

  res.text = detail::sim2real_table(res);
  Json conds = Json::array();
  for (const auto& c : res.conditions) {
    conds.push_back({{"name", c.name}, {"train_size", c.train_size}, {"metrics", to_json(c.metrics)}});
  }
  res.json = {{"test_size", res.test_size}, {"conditions", conds}};
  return res;
}

// ---------------------------------------------------------------------------
// Pipeline commands

enum class PlannerKind { kGroundTruth, kConstantVelocity, kConstantTurnRate, kLinear };

inline const char* to_string(PlannerKind k) {
  switch (k) {
    case PlannerKind::kGroundTruth: return "gt";
    case PlannerKind::kConstantVelocity: return "cv";
    case PlannerKind::kConstantTurnRate: return "ctrv";
    case PlannerKind::kLinear: return "linear";
  }
  return "gt";
}

inline PlannerKind parse_planner(const std::string& s) {
  if (s == "gt") return PlannerKind::kGroundTruth;
  if (s == "cv") return PlannerKind::kConstantVelocity;
  if (s == "ctrv") return PlannerKind::kConstantTurnRate;
  if (s == "linear") return PlannerKind::kLinear;
  throw Error(ErrorCode::kInvalidArgument, "unknown planner '" + s + "'");
}

struct PipelineOptions {
  PlannerKind planner = PlannerKind::kLinear;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitMissingInput = 2,
  kExitSchema = 3,
  kExitShortfall = 4,
};

inline int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kMissingInput: return kExitMissingInput;
    case ErrorCode::kValidation:
    case ErrorCode::kParse:
    case ErrorCode::kUnknownConvention:
    case ErrorCode::kUnknownCategory: return kExitSchema;
    default: return kExitFailure;
  }
}

namespace detail {

inline std::string path_in(const ExperimentConfig& c, const std::string& name) {
  return (std::filesystem::path(c.output_dir) / name).string();
}

// FNV-1a; independent of record order and platform.
inline std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline bool in_holdout(const std::string& id, std::uint64_t seed, double fraction) {
  return static_cast<double>(mix_seed(stable_hash(id), seed) % 1000000ULL) < fraction * 1e6;
}

inline Json prediction_json(const Prediction& p) {
  Json w = Json::array();
  for (const auto& v : p.trajectory.waypoints) w.push_back(to_json(v));
  return {{"id", p.id}, {"waypoints", w}, {"speeds", p.trajectory.speeds}};
}

inline Prediction prediction_from_json(const Json& j) {
  Prediction p;
  p.id = io_detail::get<std::string>(j, "id");
  for (const auto& w : io_detail::array(j, "waypoints")) p.trajectory.waypoints.push_back(point_from_json(w, "waypoints"));
  for (const auto& v : io_detail::array(j, "speeds")) {
    if (!v.is_number()) throw Error(ErrorCode::kValidation, "speeds: expected numbers");
    p.trajectory.speeds.push_back(v.get<double>());
  }
  if (p.trajectory.waypoints.size() != static_cast<std::size_t>(kFutureFrames)) {
    throw Error(ErrorCode::kValidation, "waypoints: expected 6");
  }
  return p;
}

inline SliceMetrics slice_from_json(const Json& j) {
  SliceMetrics m;
  m.n = io_detail::get<std::size_t>(j, "n");
  const Json& l2 = io_detail::field(j, "l2");
  m.l2 = {io_detail::num(l2, "1s"), io_detail::num(l2, "2s"), io_detail::num(l2, "3s"), io_detail::num(l2, "avg")};
  auto counters = [](const Json& c) {
    EventCounts e;
    e.n_event = io_detail::get<std::array<std::size_t, kFutureFrames>>(c, "N_event");
    e.n_total = io_detail::get<std::array<std::size_t, kFutureFrames>>(c, "N_total");
    e.out_of_grid = io_detail::get<std::size_t>(c, "out_of_grid");
    return e;
  };
  m.collision = counters(io_detail::field(j, "collision_counters"));
  m.boundary = counters(io_detail::field(j, "boundary_counters"));
  return m;
}

inline void write_lines(const std::string& path, const std::vector<Json>& lines) {
  auto out = io_detail::open_output(path);
  for (const auto& j : lines) out << j.dump() << '\n';
}

}  // namespace detail

struct CommandResult {
  int exit_code = kExitOk;
  std::string message;
};

/// generate: simulate the configured domain and write dataset.jsonl,
/// scenes.jsonl and manifest.json.
inline CommandResult cmd_generate(const ExperimentConfig& cfg) {
  const DomainConfig& d = cfg.generate_domain == "real" ? cfg.real : cfg.sim;
  DataPool pool = generate_pool(d, cfg.seed, cfg.horizon_s);
  if (cfg.generate_count > 0) {
    if (cfg.generate_count > pool.records.size()) {
      throw Error(ErrorCode::kInsufficientData, "requested " + std::to_string(cfg.generate_count) + " records, pool has " +
                                                    std::to_string(pool.records.size()));
    }
    std::vector<std::size_t> idx(pool.records.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(mix_seed(cfg.seed, 31));
    rng.shuffle(idx);
    idx.resize(cfg.generate_count);
    std::sort(idx.begin(), idx.end());
    DataPool kept;
    kept.seeds = pool.seeds;
    for (std::size_t i : idx) {
      kept.records.push_back(pool.records[i]);
      kept.scenes.push_back(pool.scenes[i]);
    }
    pool = std::move(kept);
  }
  std::filesystem::create_directories(cfg.output_dir);
  save_records(detail::path_in(cfg, "dataset.jsonl"), pool.records);
  save_scenes(detail::path_in(cfg, "scenes.jsonl"), pool.scenes);
  save_json(detail::path_in(cfg, "manifest.json"), to_json(make_manifest(pool.records, pool.seeds)));
  return {kExitOk, "generated " + std::to_string(pool.records.size()) + " records"};
}

/// curate: stratified sample of dataset.jsonl into curated.jsonl with
/// balance.txt; a quota shortfall still writes the partial result and
/// shortfall.txt, and exits 4.
inline CommandResult cmd_curate(const ExperimentConfig& cfg, const std::string& quota_name) {
  const auto records = load_records(detail::path_in(cfg, "dataset.jsonl"));
  const auto scenes = load_scenes(detail::path_in(cfg, "scenes.jsonl"));
  const DomainConfig& d = cfg.generate_domain == "real" ? cfg.real : cfg.sim;
  const std::string qname = !quota_name.empty() ? quota_name : !cfg.curate_quota.empty() ? cfg.curate_quota : d.quota;
  const StratumQuota quota = quota_preset(qname);
  const std::size_t n = cfg.curate_size == 0 ? records.size() : cfg.curate_size;
  if (n > records.size()) {
    const Shortfall total{"all", n, records.size()};
    save_text(detail::path_in(cfg, "shortfall.txt"), format_shortfall(total) + "\n");
    return {kExitShortfall, format_shortfall(total)};
  }
  const SampleResult s = stratified_sample(records, quota, n, mix_seed(cfg.seed, 41));
  save_records(detail::path_in(cfg, "curated.jsonl"), s.records);
  save_scenes(detail::path_in(cfg, "curated_scenes.jsonl"), scenes_for(s.records, scenes));
  save_json(detail::path_in(cfg, "curated_manifest.json"), to_json(make_manifest(s.records, {cfg.seed})));
  save_text(detail::path_in(cfg, "balance.txt"), "quota " + qname + "\n" + balance_table_text(balance_report(s.records)));
  const std::string shortfall_path = detail::path_in(cfg, "shortfall.txt");
  if (!s.complete()) {
    std::string text;
    for (const auto& f : s.shortfalls) text += format_shortfall(f) + "\n";
    save_text(shortfall_path, text);
    return {kExitShortfall, text};
  }
  std::filesystem::remove(shortfall_path);
  return {kExitOk, "curated " + std::to_string(s.records.size()) + " records with quota " + qname};
}

/// render-prompts: curated.jsonl -> prompts.jsonl of {id, question, answer}.
inline CommandResult cmd_render_prompts(const ExperimentConfig& cfg) {
  const auto records = load_records(detail::path_in(cfg, "curated.jsonl"));
  std::vector<Json> lines;
  for (const auto& r : records) {
    const PromptText p = render_prompt(r);
    lines.push_back({{"id", r.id}, {"question", p.question}, {"answer", p.expected_answer}});
  }
  detail::write_lines(detail::path_in(cfg, "prompts.jsonl"), lines);
  return {kExitOk, "rendered " + std::to_string(lines.size()) + " prompts"};
}

/// evaluate: scores one planner on the held-out split of curated.jsonl
/// (the linear planner trains on the rest). Records are aligned to
/// RH_FLU_ROOF first, or only relabeled under --no-align.
inline CommandResult cmd_evaluate(const ExperimentConfig& cfg, PlannerKind planner) {
  auto records = load_records(detail::path_in(cfg, "curated.jsonl"));
  auto scenes = scenes_for(records, load_scenes(detail::path_in(cfg, "curated_scenes.jsonl")));
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (cfg.align) {
      records[i] = align_record(records[i], kRhFluRoof);
      scenes[i] = align_scene(scenes[i], kRhFluRoof);
    } else {
      records[i] = relabel_convention(records[i], kRhFluRoof);
      scenes[i].frame_convention = kRhFluRoof;
    }
  }
  std::vector<EpisodeRecord> train, test;
  std::vector<EvalScene> test_scenes;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (detail::in_holdout(records[i].id, cfg.seed, cfg.holdout_fraction)) {
      test.push_back(records[i]);
      test_scenes.push_back(scenes[i]);
    } else {
      train.push_back(records[i]);
    }
  }
  if (test.empty()) throw Error(ErrorCode::kInsufficientData, "held-out split is empty");
  std::vector<Prediction> preds;
  if (planner == PlannerKind::kLinear) {
    const LinearPlanner p = fit_linear_planner(train, cfg.lambda, cfg.features, detail::domain_weights(train, cfg.real_weight));
    save_json(detail::path_in(cfg, "planner.json"), planner_to_json(p));
    preds = detail::predict_all(p, test);
  } else {
    for (const auto& r : test) {
      Trajectory t = planner == PlannerKind::kGroundTruth ? ground_truth(r)
                     : planner == PlannerKind::kConstantVelocity
                         ? kinematic_baseline(r, KinematicMode::kConstantVelocity)
                         : kinematic_baseline(r, KinematicMode::kConstantTurnRate);
      preds.push_back({r.id, t});
    }
  }
  const MetricsReport rep = evaluate(test, preds, test_scenes, cfg.eval);
  const std::string name = to_string(planner);
  std::vector<Json> lines;
  for (const auto& p : preds) lines.push_back(detail::prediction_json(p));
  detail::write_lines(detail::path_in(cfg, "predictions_" + name + ".jsonl"), lines);
  save_json(detail::path_in(cfg, "metrics_" + name + ".json"), Json{{"planner", name}, {"slices", to_json(rep)}});
  return {kExitOk, "evaluated " + name + " on " + std::to_string(test.size()) + " held-out records"};
}

/// report: report.txt from every metrics_<planner>.json present, plus SVG
/// overlays (ground truth, cv baseline, --planner model) when predictions
/// for both exist.
inline CommandResult cmd_report(const ExperimentConfig& cfg, PlannerKind model) {
  std::vector<std::pair<std::string, MetricsReport>> methods;
  for (auto k : {PlannerKind::kGroundTruth, PlannerKind::kConstantVelocity, PlannerKind::kConstantTurnRate,
                 PlannerKind::kLinear}) {
    const std::string path = detail::path_in(cfg, std::string("metrics_") + to_string(k) + ".json");
    if (!std::filesystem::exists(path)) continue;
    const Json j = load_json(path);
    MetricsReport rep;
    for (const auto& [slice, v] : io_detail::field(j, "slices").items()) rep[slice] = detail::slice_from_json(v);
    methods.emplace_back(to_string(k), rep);
  }
  if (methods.empty()) throw Error(ErrorCode::kMissingInput, "no metrics_<planner>.json in " + cfg.output_dir);
  save_text(detail::path_in(cfg, "report.txt"), report_text(methods));

  const std::string base_path = detail::path_in(cfg, "predictions_cv.jsonl");
  const std::string model_path = detail::path_in(cfg, std::string("predictions_") + to_string(model) + ".jsonl");
  std::size_t written = 0;
  if (std::filesystem::exists(base_path) && std::filesystem::exists(model_path) && cfg.overlays > 0) {
    auto records = load_records(detail::path_in(cfg, "curated.jsonl"));
    auto scenes = scenes_for(records, load_scenes(detail::path_in(cfg, "curated_scenes.jsonl")));
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < records.size(); ++i) index[records[i].id] = i;
    auto in_base = io_detail::open_input(base_path);
    auto in_model = io_detail::open_input(model_path);
    const auto base = read_jsonl<Prediction>(in_base, detail::prediction_from_json);
    const auto mod = read_jsonl<Prediction>(in_model, detail::prediction_from_json);
    const std::filesystem::path dir = std::filesystem::path(cfg.output_dir) / "overlays";
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < std::min({base.size(), mod.size(), cfg.overlays}); ++i) {
      if (base[i].id != mod[i].id) throw Error(ErrorCode::kIdMismatch, "prediction files list different records");
      auto it = index.find(base[i].id);
      if (it == index.end()) throw Error(ErrorCode::kIdMismatch, "no record for prediction '" + base[i].id + "'");
      EpisodeRecord r = records[it->second];
      EvalScene s = scenes[it->second];
      if (cfg.align) {
        r = align_record(r, kRhFluRoof);
        s = align_scene(s, kRhFluRoof);
      } else {
        r = relabel_convention(r, kRhFluRoof);
        s.frame_convention = kRhFluRoof;
      }
      save_text((dir / (r.id + ".svg")).string(), overlay_svg(r, s, base[i].trajectory, mod[i].trajectory));
      ++written;
    }
  }
  return {kExitOk, "report with " + std::to_string(methods.size()) + " methods, " + std::to_string(written) + " overlays"};
}

inline CommandResult cmd_sim2real(const ExperimentConfig& cfg) {
  const Sim2RealResult res = run_sim2real_experiment(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  save_text(detail::path_in(cfg, "sim2real.txt"), res.text);
  save_json(detail::path_in(cfg, "sim2real.json"), res.json);
  return {kExitOk, res.text};
}

/// Runs one subcommand, mapping failures to the exit-code taxonomy.
inline CommandResult run_pipeline(const ExperimentConfig& cfg, const std::string& command, const std::string& quota = "",
                                  PlannerKind planner = PlannerKind::kLinear) {
  try {
    if (command == "generate") return cmd_generate(cfg);
    if (command == "curate") return cmd_curate(cfg, quota);
    if (command == "render-prompts") return cmd_render_prompts(cfg);
    if (command == "evaluate") return cmd_evaluate(cfg, planner);
    if (command == "report") return cmd_report(cfg, planner);
    if (command == "sim2real") return cmd_sim2real(cfg);
    return {kExitFailure, "unknown command '" + command + "'"};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInsufficientData && std::string(e.what()).find("shortfall") != std::string::npos) {
      return {kExitShortfall, e.what()};
    }
    return {exit_code_for(e), e.what()};
  } catch (const std::filesystem::filesystem_error& e) {
    return {kExitFailure, e.what()};
  }
}

}  // namespace sim2real
