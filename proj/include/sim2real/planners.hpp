#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sim2real/error.hpp"
#include "sim2real/i2e.hpp"
#include "sim2real/records.hpp"

namespace sim2real {

// ---------------------------------------------------------------------------
// Kinematic baselines

enum class KinematicMode { kConstantVelocity, kConstantTurnRate };

/// Extrapolates the last history state. CTRV takes its yaw rate from the
/// last two history frames.
inline Trajectory kinematic_baseline(const EpisodeRecord& r, KinematicMode mode) {
  if (r.history.size() < 2) throw Error(ErrorCode::kValidation, "history: expected 5");
  const HistoryFrame& last = r.history.back();
  const HistoryFrame& prev = r.history[r.history.size() - 2];
  const double v = last.ego.v;
  const double th = last.ego.pose.yaw;
  const Vec2 p0 = last.ego.pose.xy();
  double omega = 0.0;
  if (mode == KinematicMode::kConstantTurnRate) {
    const double dt = last.t - prev.t;
    if (dt > 0.0) omega = normalize_angle(th - prev.ego.pose.yaw) / dt;
  }
  Trajectory out;
  for (int k = 1; k <= kFutureFrames; ++k) {
    const double t = 0.5 * k;
    if (std::abs(omega) < 1e-9) {
      out.waypoints.push_back(p0 + heading_vector(th) * (v * t));
    } else {
      const double r0 = v / omega;
      out.waypoints.push_back({p0.x + r0 * (std::sin(th + omega * t) - std::sin(th)),
                               p0.y + r0 * (std::cos(th) - std::cos(th + omega * t))});
    }
    out.speeds.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Features

/// Which feature groups enter the linear planner, in this order:
/// history (4 past positions, 4 past yaws, 5 speeds), command one-hot,
/// provenance flag, environment flags, mean camera embedding, CV and CTRV
/// waypoints, gated copies of history and baselines, bias.
/// A gate ("left", "right", "night", "rainy", "real") repeats the motion
/// features multiplied by its 0/1 indicator, so records under that condition
/// get their own correction on top of the shared weights.
struct FeatureSpec {
  bool history = true;
  bool command = true;
  bool provenance = true;
  bool environment = true;
  bool embedding = true;
  bool baselines = true;
  std::vector<std::string> gates = {"left", "right", "real"};
  int i2e_hidden = 64;
  int i2e_embedding = 32;
  std::uint64_t i2e_seed = 0;

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

inline std::vector<std::string> feature_names(const FeatureSpec& s) {
  std::vector<std::string> n;
  if (s.history) {
    for (int k = 0; k < kHistoryFrames - 1; ++k) {
      n.push_back("hist_x" + std::to_string(k));
      n.push_back("hist_y" + std::to_string(k));
    }
    for (int k = 0; k < kHistoryFrames - 1; ++k) n.push_back("hist_yaw" + std::to_string(k));
    for (int k = 0; k < kHistoryFrames; ++k) n.push_back("hist_v" + std::to_string(k));
  }
  if (s.command) {
    n.push_back("cmd_forward");
    n.push_back("cmd_left");
    n.push_back("cmd_right");
  }
  if (s.provenance) n.push_back("is_real");
  if (s.environment) {
    n.push_back("is_night");
    n.push_back("is_rainy");
  }
  if (s.embedding) {
    for (int k = 0; k < s.i2e_embedding; ++k) n.push_back("i2e" + std::to_string(k));
  }
  if (s.baselines) {
    for (const char* m : {"cv", "ctrv"}) {
      for (int k = 1; k <= kFutureFrames; ++k) {
        n.push_back(std::string(m) + "_x" + std::to_string(k));
        n.push_back(std::string(m) + "_y" + std::to_string(k));
      }
    }
  }
  if (!s.gates.empty()) {
    FeatureSpec motion;
    motion.command = motion.provenance = motion.environment = motion.embedding = false;
    motion.gates.clear();
    auto base = feature_names(motion);
    base.pop_back();
    for (const auto& g : s.gates) {
      for (const auto& b : base) n.push_back(g + "*" + b);
    }
  }
  n.push_back("bias");
  return n;
}

enum class Command { kForward, kLeft, kRight };

/// Free-text commands reduce to forward / left / right by keyword.
inline Command parse_command(std::string_view text) {
  if (text.find("left") != std::string_view::npos) return Command::kLeft;
  if (text.find("right") != std::string_view::npos) return Command::kRight;
  return Command::kForward;
}

inline const std::vector<std::string>& gate_names() {
  static const std::vector<std::string> kNames = {"left", "right", "night", "rainy", "real"};
  return kNames;
}

inline bool gate_value(const std::string& gate, const EpisodeRecord& r, Command c) {
  if (gate == "left") return c == Command::kLeft;
  if (gate == "right") return c == Command::kRight;
  if (gate == "night") return r.env.time == TimeOfDay::kNight;
  if (gate == "rainy") return r.env.weather == Weather::kRainy;
  if (gate == "real") return r.provenance == Provenance::kReal;
  throw Error(ErrorCode::kValidation, "unknown feature gate '" + gate + "'");
}

inline Eigen::VectorXd features(const EpisodeRecord& r, const FeatureSpec& s, const MlpParams& i2e) {
  std::vector<double> hist;
  for (int k = 0; k < kHistoryFrames - 1; ++k) {
    hist.push_back(r.history[static_cast<std::size_t>(k)].ego.pose.x);
    hist.push_back(r.history[static_cast<std::size_t>(k)].ego.pose.y);
  }
  for (int k = 0; k < kHistoryFrames - 1; ++k) hist.push_back(r.history[static_cast<std::size_t>(k)].ego.pose.yaw);
  for (int k = 0; k < kHistoryFrames; ++k) hist.push_back(r.history[static_cast<std::size_t>(k)].ego.v);
  std::vector<double> base;
  for (auto mode : {KinematicMode::kConstantVelocity, KinematicMode::kConstantTurnRate}) {
    const Trajectory t = kinematic_baseline(r, mode);
    for (const auto& w : t.waypoints) {
      base.push_back(w.x);
      base.push_back(w.y);
    }
  }
  const Command c = parse_command(r.command);

  std::vector<double> f;
  if (s.history) f.insert(f.end(), hist.begin(), hist.end());
  if (s.command) {
    f.push_back(c == Command::kForward);
    f.push_back(c == Command::kLeft);
    f.push_back(c == Command::kRight);
  }
  if (s.provenance) f.push_back(r.provenance == Provenance::kReal);
  if (s.environment) {
    f.push_back(r.env.time == TimeOfDay::kNight);
    f.push_back(r.env.weather == Weather::kRainy);
  }
  if (s.embedding) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(i2e.d_e());
    const auto emb = embed_cameras(i2e, r.cameras);
    for (const auto& e : emb) mean += e;
    mean /= static_cast<double>(emb.size());
    for (int k = 0; k < mean.size(); ++k) f.push_back(mean(k));
  }
  if (s.baselines) f.insert(f.end(), base.begin(), base.end());
  for (const auto& g : s.gates) {
    const double on = gate_value(g, r, c) ? 1.0 : 0.0;
    for (double v : hist) f.push_back(on * v);
    for (double v : base) f.push_back(on * v);
  }
  f.push_back(1.0);
  return Eigen::Map<Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
}

// ---------------------------------------------------------------------------
// Linear planner

inline constexpr int kPlannerOutputs = 2 * kFutureFrames + kFutureFrames;

/// Ridge regressor from features to stacked waypoints (x1, y1, ..., x6, y6)
/// and speeds. Features are divided by their training RMS before fitting.
struct LinearPlanner {
  FeatureSpec spec;
  double lambda = 1e-3;
  Eigen::MatrixXd W;      // kPlannerOutputs x d_f, acts on scaled features
  Eigen::VectorXd scale;  // d_f
  MlpParams i2e;

  int feature_dim() const { return static_cast<int>(scale.size()); }
};

/// Solves (X'DX/S + lambda I) W' = X'DY/S on RMS-scaled features, where D
/// holds per-record weights (all 1 when `weights` is empty) and S is their
/// sum. lambda = 0 requires a full-rank Gram matrix.
inline LinearPlanner fit_linear_planner(const std::vector<EpisodeRecord>& train, double lambda,
                                        const FeatureSpec& spec = {}, const std::vector<double>& weights = {}) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  if (!weights.empty() && weights.size() != train.size()) {
    throw Error(ErrorCode::kInvalidArgument, "weights: expected one per training record");
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw Error(ErrorCode::kInvalidArgument, "weights must be positive");
  }
  LinearPlanner p;
  p.spec = spec;
  p.lambda = lambda;
  p.i2e = init_params(spec.i2e_seed, spec.i2e_hidden, spec.i2e_embedding);
  const int d = static_cast<int>(feature_names(spec).size());
  const auto n = static_cast<Eigen::Index>(train.size());
  if (n < d) {
    throw Error(ErrorCode::kInsufficientData,
                "need at least " + std::to_string(d) + " training records, got " + std::to_string(train.size()));
  }
  Eigen::MatrixXd X(n, d);
  Eigen::MatrixXd Y(n, kPlannerOutputs);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = train[static_cast<std::size_t>(i)];
    if (r.frame_convention != kRhFluRoof) {
      throw Error(ErrorCode::kConventionMismatch, "record " + r.id + " is not RH_FLU_ROOF; align it first");
    }
    X.row(i) = features(r, spec, p.i2e).transpose();
    for (int k = 0; k < kFutureFrames; ++k) {
      Y(i, 2 * k) = r.gt_waypoints[static_cast<std::size_t>(k)].x;
      Y(i, 2 * k + 1) = r.gt_waypoints[static_cast<std::size_t>(k)].y;
      Y(i, 2 * kFutureFrames + k) = r.gt_speeds[static_cast<std::size_t>(k)];
    }
  }
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  for (std::size_t i = 0; i < weights.size(); ++i) w(static_cast<Eigen::Index>(i)) = weights[i];
  const double inv_n = 1.0 / w.sum();
  p.scale.resize(d);
  for (int c = 0; c < d; ++c) {
    const double rms = std::sqrt(w.dot(X.col(c).cwiseAbs2()) * inv_n);
    p.scale(c) = rms > 1e-12 ? rms : 1.0;
    X.col(c) /= p.scale(c);
  }
  const Eigen::MatrixXd WX = w.asDiagonal() * X;
  Eigen::MatrixXd G = (WX.transpose() * X) * inv_n;
  G.diagonal().array() += lambda;
  const Eigen::MatrixXd rhs = (WX.transpose() * Y) * inv_n;
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(G);
    if (qr.rank() < d) throw Error(ErrorCode::kRankDeficient, "Gram matrix is rank deficient; use lambda > 0");
    p.W = qr.solve(rhs).transpose();
    return p;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::kRankDeficient, "normal equations could not be factored");
  p.W = ldlt.solve(rhs).transpose();
  return p;
}

inline Trajectory predict(const LinearPlanner& p, const EpisodeRecord& r) {
  if (r.frame_convention != kRhFluRoof) {
    throw Error(ErrorCode::kConventionMismatch,
                "record " + r.id + " is in " + to_string(r.frame_convention) + "; align it to RH_FLU_ROOF first");
  }
  Eigen::VectorXd x = features(r, p.spec, p.i2e);
  if (x.size() != p.scale.size() || p.W.cols() != x.size() || p.W.rows() != kPlannerOutputs) {
    throw Error(ErrorCode::kValidation, "planner feature dimension does not match its spec");
  }
  x = x.cwiseQuotient(p.scale);
  const Eigen::VectorXd y = p.W * x;
  Trajectory t;
  for (int k = 0; k < kFutureFrames; ++k) {
    t.waypoints.push_back({y(2 * k), y(2 * k + 1)});
    t.speeds.push_back(y(2 * kFutureFrames + k));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const FeatureSpec& s) {
  return {{"history", s.history},       {"command", s.command},     {"provenance", s.provenance},
          {"environment", s.environment}, {"embedding", s.embedding}, {"baselines", s.baselines},
          {"gates", s.gates},
          {"i2e_hidden", s.i2e_hidden}, {"i2e_embedding", s.i2e_embedding}, {"i2e_seed", s.i2e_seed}};
}

inline FeatureSpec feature_spec_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kValidation, "feature_spec: expected an object");
  FeatureSpec s;
  s.history = j.value("history", s.history);
  s.command = j.value("command", s.command);
  s.provenance = j.value("provenance", s.provenance);
  s.environment = j.value("environment", s.environment);
  s.embedding = j.value("embedding", s.embedding);
  s.baselines = j.value("baselines", s.baselines);
  if (j.contains("gates")) {
    if (!j["gates"].is_array()) throw Error(ErrorCode::kValidation, "feature_spec.gates: expected an array");
    s.gates.clear();
    for (const auto& g : j["gates"]) {
      if (!g.is_string()) throw Error(ErrorCode::kValidation, "feature_spec.gates: expected strings");
      const auto name = g.get<std::string>();
      if (std::find(gate_names().begin(), gate_names().end(), name) == gate_names().end()) {
        throw Error(ErrorCode::kValidation, "feature_spec.gates: unknown gate '" + name + "'");
      }
      s.gates.push_back(name);
    }
  }
  s.i2e_hidden = j.value("i2e_hidden", s.i2e_hidden);
  s.i2e_embedding = j.value("i2e_embedding", s.i2e_embedding);
  s.i2e_seed = j.value("i2e_seed", s.i2e_seed);
  if (s.i2e_hidden <= 0 || s.i2e_embedding <= 0) throw Error(ErrorCode::kValidation, "feature_spec: i2e dims must be positive");
  return s;
}

inline nlohmann::ordered_json planner_to_json(const LinearPlanner& p) {
  nlohmann::ordered_json j;
  j["format"] = "linear-planner";
  j["version"] = 1;
  j["feature_spec"] = to_json(p.spec);
  j["feature_names"] = feature_names(p.spec);
  j["lambda"] = p.lambda;
  j["scale"] = detail::matrix_json(p.scale.transpose());
  j["W"] = detail::matrix_json(p.W);
  j["i2e"] = params_to_json(p.i2e);
  return j;
}

inline LinearPlanner planner_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object() || j.value("format", "") != "linear-planner") throw Error(ErrorCode::kValidation, "format: expected linear-planner");
  for (const char* k : {"feature_spec", "feature_names", "lambda", "scale", "W", "i2e"}) {
    if (!j.contains(k)) throw Error(ErrorCode::kValidation, std::string(k) + ": missing");
  }
  LinearPlanner p;
  p.spec = feature_spec_from_json(j["feature_spec"]);
  const auto names = feature_names(p.spec);
  if (j["feature_names"] != nlohmann::ordered_json(names)) {
    throw Error(ErrorCode::kValidation, "feature_names: do not match feature_spec");
  }
  const int d = static_cast<int>(names.size());
  p.lambda = j["lambda"].get<double>();
  p.scale = detail::matrix_from_json(j["scale"], 1, d, "scale").transpose();
  p.W = detail::matrix_from_json(j["W"], kPlannerOutputs, d, "W");
  p.i2e = params_from_json(j["i2e"]);
  if (p.i2e.d_e() != p.spec.i2e_embedding || p.i2e.d_h() != p.spec.i2e_hidden) {
    throw Error(ErrorCode::kValidation, "i2e: shape does not match feature_spec");
  }
  return p;
}

}  // namespace sim2real
