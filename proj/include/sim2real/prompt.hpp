#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sim2real/error.hpp"
#include "sim2real/records.hpp"

namespace sim2real {

struct PromptText {
  std::string question;
  std::string spe_descriptor;
  std::string expected_answer;
};

inline constexpr std::string_view kAnswerPrefix = "Here is the planning trajectory ";
inline constexpr std::string_view kSpeedsPrefix = "Speeds: ";

/// Scenario-aware descriptor line.
inline std::string spe_descriptor(const std::string& city, Provenance p) {
  if (city.empty()) throw Error(ErrorCode::kValidation, "city: empty");
  return "You are driving in " + city + " under " + (p == Provenance::kSim ? "Simulation" : "Real-World") +
         " scenario.";
}

/// Two-decimal fixed point, ties to even. Products within 1e-9 of a .5
/// boundary count as ties, so -1.005 (stored as -1.00499999...) rounds to
/// -1.00. Returns hundredths.
inline std::int64_t round_hundredths(double v) {
  const double x = v * 100.0;
  const double lo = std::floor(x);
  const double frac = x - lo;
  double q;
  if (std::abs(frac - 0.5) < 1e-9) {
    q = std::fmod(lo, 2.0) == 0.0 ? lo : lo + 1.0;
  } else {
    q = std::round(x);
  }
  return static_cast<std::int64_t>(q);
}

/// "+x.xx" / "-x.xx"; zero is "+0.00".
inline std::string format_signed(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "cannot format a non-finite value");
  const std::int64_t q = round_hundredths(v);
  const std::int64_t a = q < 0 ? -q : q;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%c%lld.%02lld", q < 0 ? '-' : '+', static_cast<long long>(a / 100),
                static_cast<long long>(a % 100));
  return buf;
}

/// Same rounding as format_signed; a sign only when negative.
inline std::string format_unsigned(double v) {
  const std::string s = format_signed(v);
  return s[0] == '+' ? s.substr(1) : s;
}

/// "Here is the planning trajectory (+x, +y), ... ." with optional
/// " Speeds: v1, ..., v6." sentence.
inline std::string render_answer(const std::vector<Vec2>& waypoints, const std::optional<std::vector<double>>& speeds = {}) {
  if (waypoints.size() != static_cast<std::size_t>(kFutureFrames)) {
    throw Error(ErrorCode::kValidation, "waypoints: expected 6, got " + std::to_string(waypoints.size()));
  }
  std::string out(kAnswerPrefix);
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    if (i > 0) out += ", ";
    out += "(" + format_signed(waypoints[i].x) + ", " + format_signed(waypoints[i].y) + ")";
  }
  out += ".";
  if (speeds) {
    if (speeds->size() != static_cast<std::size_t>(kFutureFrames)) {
      throw Error(ErrorCode::kValidation, "speeds: expected 6, got " + std::to_string(speeds->size()));
    }
    out += " ";
    out += kSpeedsPrefix;
    for (std::size_t i = 0; i < speeds->size(); ++i) {
      if (i > 0) out += ", ";
      out += format_unsigned((*speeds)[i]);
    }
    out += ".";
  }
  return out;
}

inline PromptText render_prompt(const EpisodeRecord& r) {
  PromptText p;
  p.spe_descriptor = spe_descriptor(r.city, r.provenance);
  std::string q;
  for (int i = 1; i <= 6; ++i) {
    if (i > 1) q += " ";
    q += std::to_string(i) + ": <video>";
  }
  q += ". These 6 videos are the front view, front left view, front right view, back view, back left view, "
       "back right view of the ego vehicle. ";
  q += p.spe_descriptor;
  q += " You need to " + r.command + ", please provide the planning trajectory for the ego car.";
  p.question = std::move(q);
  if (r.gt_waypoints.size() == static_cast<std::size_t>(kFutureFrames)) {
    p.expected_answer = render_answer(r.gt_waypoints, r.gt_speeds.size() == static_cast<std::size_t>(kFutureFrames)
                                                          ? std::optional<std::vector<double>>(r.gt_speeds)
                                                          : std::nullopt);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Parsing

struct ParsedAnswer {
  std::vector<Vec2> waypoints;
  std::optional<std::vector<double>> speeds;
};

namespace detail {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline void skip_space(std::string_view s, std::size_t& i) {
  while (i < s.size() && is_space(s[i])) ++i;
}

[[noreturn]] inline void parse_fail(std::size_t offset, const std::string& what) {
  throw Error(ErrorCode::kParse, "offset " + std::to_string(offset) + ": " + what);
}

// [+-]?digits(.digits)?
inline double read_number(std::string_view s, std::size_t& i) {
  const std::size_t start = i;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  const std::size_t digits = i;
  while (i < s.size() && is_digit(s[i])) ++i;
  if (i == digits) parse_fail(start, "expected a number");
  if (i < s.size() && s[i] == '.') {
    ++i;
    const std::size_t frac = i;
    while (i < s.size() && is_digit(s[i])) ++i;
    if (i == frac) parse_fail(start, "expected digits after the decimal point");
  }
  std::string_view body = s.substr(start, i - start);
  const bool neg = body[0] == '-';
  if (body[0] == '+' || body[0] == '-') body.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(body.data(), body.data() + body.size(), v);
  if (res.ec != std::errc()) parse_fail(start, "number out of range");
  return neg ? -v : v;
}

inline void expect(std::string_view s, std::size_t& i, char c) {
  skip_space(s, i);
  if (i >= s.size() || s[i] != c) parse_fail(i, std::string("expected '") + c + "'");
  ++i;
}

}  // namespace detail

/// Reads six "(x, y)" pairs from free text. A pair starts at a '(' followed
/// (after optional spaces) by a sign or digit; anything before the first
/// pair is ignored. An optional "Speeds:" list of six numbers may follow.
inline ParsedAnswer parse_answer(std::string_view s) {
  using namespace detail;
  ParsedAnswer out;
  std::size_t i = 0;
  std::size_t end_of_pairs = 0;
  while (i < s.size()) {
    if (s[i] != '(') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    skip_space(s, j);
    if (j >= s.size() || !(is_digit(s[j]) || s[j] == '+' || s[j] == '-')) {
      ++i;
      continue;
    }
    const double x = read_number(s, j);
    expect(s, j, ',');
    skip_space(s, j);
    const double y = read_number(s, j);
    expect(s, j, ')');
    out.waypoints.push_back({x, y});
    i = j;
    end_of_pairs = j;
  }
  if (out.waypoints.size() != static_cast<std::size_t>(kFutureFrames)) {
    throw Error(ErrorCode::kParse, "expected 6 coordinate pairs, found " + std::to_string(out.waypoints.size()));
  }
  const auto sp = s.find("Speeds:", end_of_pairs);
  if (sp != std::string_view::npos) {
    std::size_t j = sp + 7;
    std::vector<double> speeds;
    for (int k = 0; k < kFutureFrames; ++k) {
      if (k > 0) expect(s, j, ',');
      skip_space(s, j);
      speeds.push_back(read_number(s, j));
    }
    out.speeds = std::move(speeds);
  }
  return out;
}

}  // namespace sim2real
