#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sim2real/error.hpp"
#include "sim2real/geometry.hpp"
#include "sim2real/records.hpp"
#include "sim2real/rng.hpp"

namespace sim2real {

inline constexpr int kI2eInput = 16;

/// Two-layer tanh MLP over the flattened (row-major) image-to-ego matrix.
struct MlpParams {
  Eigen::MatrixXd W1;  // d_h x 16
  Eigen::VectorXd b1;  // d_h
  Eigen::MatrixXd W2;  // d_e x d_h
  Eigen::VectorXd b2;  // d_e

  int d_h() const { return static_cast<int>(W1.rows()); }
  int d_e() const { return static_cast<int>(W2.rows()); }

  bool operator==(const MlpParams& o) const {
    return W1.rows() == o.W1.rows() && W1.cols() == o.W1.cols() && W2.rows() == o.W2.rows() &&
           W2.cols() == o.W2.cols() && W1 == o.W1 && b1 == o.b1 && W2 == o.W2 && b2 == o.b2;
  }
};

inline void validate_params(const MlpParams& p) {
  if (p.W1.rows() <= 0 || p.W2.rows() <= 0) throw Error(ErrorCode::kValidation, "i2e: dimensions must be positive");
  if (p.W1.cols() != kI2eInput || p.b1.size() != p.W1.rows() || p.W2.cols() != p.W1.rows() ||
      p.b2.size() != p.W2.rows()) {
    throw Error(ErrorCode::kValidation, "i2e: inconsistent parameter shapes");
  }
  if (!p.W1.allFinite() || !p.b1.allFinite() || !p.W2.allFinite() || !p.b2.allFinite()) {
    throw Error(ErrorCode::kValidation, "i2e: non-finite parameter");
  }
}

/// Uniform in +-sqrt(6/(fan_in+fan_out)) per layer, zero biases.
inline MlpParams init_params(std::uint64_t seed, int d_h = 64, int d_e = 32) {
  if (d_h <= 0 || d_e <= 0) throw Error(ErrorCode::kInvalidArgument, "i2e: dimensions must be positive");
  Rng rng(mix_seed(seed, 0x12E));
  MlpParams p;
  const double a1 = std::sqrt(6.0 / (kI2eInput + d_h));
  const double a2 = std::sqrt(6.0 / (d_h + d_e));
  p.W1.resize(d_h, kI2eInput);
  for (int r = 0; r < d_h; ++r) {
    for (int c = 0; c < kI2eInput; ++c) p.W1(r, c) = rng.uniform(-a1, a1);
  }
  p.W2.resize(d_e, d_h);
  for (int r = 0; r < d_e; ++r) {
    for (int c = 0; c < d_h; ++c) p.W2(r, c) = rng.uniform(-a2, a2);
  }
  p.b1 = Eigen::VectorXd::Zero(d_h);
  p.b2 = Eigen::VectorXd::Zero(d_e);
  return p;
}

inline Eigen::VectorXd forward(const MlpParams& p, const Eigen::VectorXd& m16) {
  if (m16.size() != kI2eInput) throw Error(ErrorCode::kInvalidArgument, "i2e: input must have 16 entries");
  if (!m16.allFinite()) throw Error(ErrorCode::kInvalidArgument, "i2e: non-finite input");
  const Eigen::VectorXd h = (p.W1 * m16 + p.b1).array().tanh().matrix();
  return p.W2 * h + p.b2;
}

inline Eigen::VectorXd flatten(const Transform4& t) {
  Eigen::VectorXd v(kI2eInput);
  for (int i = 0; i < kI2eInput; ++i) v(i) = t.m[static_cast<std::size_t>(i)];
  return v;
}

/// One embedding per camera, in camera order.
inline std::vector<Eigen::VectorXd> embed_cameras(const MlpParams& p, const std::vector<CameraCalibration>& cams) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(cams.size());
  for (const auto& c : cams) out.push_back(forward(p, flatten(image_to_ego_matrix(c))));
  return out;
}

struct MlpGradients {
  Eigen::MatrixXd W1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd W2;
  Eigen::VectorXd b2;
};

/// loss = scale * 0.5 * |e|^2
inline double embedding_loss(const MlpParams& p, const Eigen::VectorXd& m16, double scale = 1.0) {
  return scale * 0.5 * forward(p, m16).squaredNorm();
}

/// Backpropagated gradient of embedding_loss.
inline MlpGradients gradients(const MlpParams& p, const Eigen::VectorXd& m16, double scale = 1.0) {
  if (m16.size() != kI2eInput) throw Error(ErrorCode::kInvalidArgument, "i2e: input must have 16 entries");
  const Eigen::VectorXd h = (p.W1 * m16 + p.b1).array().tanh().matrix();
  const Eigen::VectorXd e = p.W2 * h + p.b2;
  const Eigen::VectorXd de = scale * e;
  MlpGradients g;
  g.W2 = de * h.transpose();
  g.b2 = de;
  const Eigen::VectorXd dz = ((p.W2.transpose() * de).array() * (1.0 - h.array().square())).matrix();
  g.W1 = dz * m16.transpose();
  g.b1 = dz;
  return g;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t parameters = 0;
};

/// Compares backprop against central differences with step h over every
/// parameter. Relative error |a - n| / max(|a|, |n|, 1e-6).
inline GradCheckResult grad_check(const MlpParams& p, const Eigen::VectorXd& m16, double h = 1e-5) {
  const MlpGradients g = gradients(p, m16);
  GradCheckResult out;
  MlpParams q = p;
  auto probe = [&](double& slot, double analytic) {
    const double orig = slot;
    slot = orig + h;
    const double lp = embedding_loss(q, m16);
    slot = orig - h;
    const double lm = embedding_loss(q, m16);
    slot = orig;
    const double numeric = (lp - lm) / (2.0 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / denom);
    ++out.parameters;
  };
  for (int r = 0; r < q.W1.rows(); ++r) {
    for (int c = 0; c < q.W1.cols(); ++c) probe(q.W1(r, c), g.W1(r, c));
  }
  for (int i = 0; i < q.b1.size(); ++i) probe(q.b1(i), g.b1(i));
  for (int r = 0; r < q.W2.rows(); ++r) {
    for (int c = 0; c < q.W2.cols(); ++c) probe(q.W2(r, c), g.W2(r, c));
  }
  for (int i = 0; i < q.b2.size(); ++i) probe(q.b2(i), g.b2(i));
  return out;
}

// ---------------------------------------------------------------------------
// Weight files

inline constexpr int kI2eFormatVersion = 1;

namespace detail {

inline nlohmann::ordered_json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::ordered_json::array();
  for (int r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::ordered_json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::ordered_json& j, int rows, int cols, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw Error(ErrorCode::kValidation, std::string(name) + ": expected " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw Error(ErrorCode::kValidation, std::string(name) + ": expected " + std::to_string(cols) + " columns");
    }
    for (int c = 0; c < cols; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) throw Error(ErrorCode::kValidation, std::string(name) + ": non-numeric entry");
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

}  // namespace detail

inline nlohmann::ordered_json params_to_json(const MlpParams& p) {
  nlohmann::ordered_json j;
  j["format"] = "i2e-mlp";
  j["version"] = kI2eFormatVersion;
  j["shape"] = {{"d_in", kI2eInput}, {"d_h", p.d_h()}, {"d_e", p.d_e()}};
  j["activation"] = "tanh";
  j["W1"] = detail::matrix_json(p.W1);
  j["b1"] = detail::matrix_json(p.b1.transpose());
  j["W2"] = detail::matrix_json(p.W2);
  j["b2"] = detail::matrix_json(p.b2.transpose());
  return j;
}

inline MlpParams params_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object() || j.value("format", "") != "i2e-mlp") throw Error(ErrorCode::kValidation, "format: expected i2e-mlp");
  if (j.value("version", 0) != kI2eFormatVersion) throw Error(ErrorCode::kValidation, "version: unsupported");
  if (j.value("activation", "") != "tanh") throw Error(ErrorCode::kValidation, "activation: expected tanh");
  if (!j.contains("shape")) throw Error(ErrorCode::kValidation, "shape: missing");
  const int d_h = j["shape"].value("d_h", 0);
  const int d_e = j["shape"].value("d_e", 0);
  if (j["shape"].value("d_in", 0) != kI2eInput || d_h <= 0 || d_e <= 0) throw Error(ErrorCode::kValidation, "shape: invalid");
  auto need = [&](const char* k) -> const nlohmann::ordered_json& {
    if (!j.contains(k)) throw Error(ErrorCode::kValidation, std::string(k) + ": missing");
    return j[k];
  };
  MlpParams p;
  p.W1 = detail::matrix_from_json(need("W1"), d_h, kI2eInput, "W1");
  p.b1 = detail::matrix_from_json(need("b1"), 1, d_h, "b1").transpose();
  p.W2 = detail::matrix_from_json(need("W2"), d_e, d_h, "W2");
  p.b2 = detail::matrix_from_json(need("b2"), 1, d_e, "b2").transpose();
  validate_params(p);
  return p;
}

}  // namespace sim2real
