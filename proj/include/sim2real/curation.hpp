#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "sim2real/error.hpp"
#include "sim2real/records.hpp"
#include "sim2real/rng.hpp"

namespace sim2real {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Strata

inline constexpr std::array<std::string_view, 5> kStratumDimensions = {"time", "weather", "maneuver", "difficulty",
                                                                       "provenance"};

/// Value of one stratification dimension for a record.
inline std::string stratum_value(const EpisodeRecord& r, std::string_view dim) {
  if (dim == "time") return to_string(r.env.time);
  if (dim == "weather") return to_string(r.env.weather);
  if (dim == "maneuver") return to_string(r.maneuver);
  if (dim == "difficulty") return to_string(r.difficulty());
  if (dim == "provenance") return to_string(r.provenance);
  throw Error(ErrorCode::kValidation, "unknown stratum dimension '" + std::string(dim) + "'");
}

inline std::vector<std::string> dimension_values(std::string_view dim) {
  if (dim == "time") return {"day", "night"};
  if (dim == "weather") return {"sunny", "rainy"};
  if (dim == "maneuver") return {"straight", "turn"};
  if (dim == "difficulty") return {"E2D", "H2D"};
  if (dim == "provenance") return {"sim", "real"};
  throw Error(ErrorCode::kValidation, "unknown stratum dimension '" + std::string(dim) + "'");
}

/// dimension -> value -> target fraction. Dimensions are independent
/// marginals; the sampler reconciles them into joint cell targets.
struct StratumQuota {
  std::map<std::string, std::map<std::string, double>> fractions;

  friend bool operator==(const StratumQuota&, const StratumQuota&) = default;
};

inline void validate_quota(const StratumQuota& q) {
  for (const auto& [dim, values] : q.fractions) {
    const auto allowed = dimension_values(dim);
    double sum = 0.0;
    for (const auto& [value, f] : values) {
      if (std::find(allowed.begin(), allowed.end(), value) == allowed.end()) {
        throw Error(ErrorCode::kValidation, "quota: unknown value '" + value + "' for " + dim);
      }
      if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorCode::kValidation, "quota: fraction outside [0,1] for " + dim);
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::kValidation, "quota: fractions for " + dim + " do not sum to 1");
  }
}

/// Balanced synthetic mix: day/night 27891/19662, sunny/rainy 23010/24543,
/// straight/turn 22076/25477 out of 47553.
inline StratumQuota hass_quota() {
  constexpr double n = 47553.0;
  StratumQuota q;
  q.fractions["time"] = {{"day", 27891.0 / n}, {"night", 19662.0 / n}};
  q.fractions["weather"] = {{"sunny", 23010.0 / n}, {"rainy", 24543.0 / n}};
  q.fractions["maneuver"] = {{"straight", 22076.0 / n}, {"turn", 25477.0 / n}};
  return q;
}

/// Real-world driving mix: roughly 7:1 day to night, out of 28130.
inline StratumQuota nuscenes_like_quota() {
  constexpr double n = 28130.0;
  StratumQuota q;
  q.fractions["time"] = {{"day", 24745.0 / n}, {"night", 3385.0 / n}};
  q.fractions["weather"] = {{"sunny", 22548.0 / n}, {"rainy", 5582.0 / n}};
  q.fractions["maneuver"] = {{"straight", 24996.0 / n}, {"turn", 3134.0 / n}};
  return q;
}

inline StratumQuota quota_preset(std::string_view name) {
  if (name == "HASS") return hass_quota();
  if (name == "nuScenes-like") return nuscenes_like_quota();
  throw Error(ErrorCode::kValidation, "unknown quota preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Largest remainder

/// Integer allocation of `n` proportional to `weights` (which need not be
/// normalized). Floors first, then hands the remaining units to the largest
/// fractional parts; ties go to the lower index.
inline std::vector<std::size_t> largest_remainder(const std::vector<double>& weights, std::size_t n) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> out(weights.size(), 0);
  if (weights.empty() || n == 0) return out;
  if (!(total > 0.0)) throw Error(ErrorCode::kInvalidArgument, "largest_remainder: weights sum to zero");
  std::vector<double> rem(weights.size());
  std::size_t given = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] / total * static_cast<double>(n);
    out[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - std::floor(exact);
    given += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; given < n; ++k, ++given) ++out[order[k % order.size()]];
  return out;
}

// ---------------------------------------------------------------------------
// Stratified sampling

struct Shortfall {
  std::string stratum;
  std::size_t allocated = 0;
  std::size_t available = 0;

  friend bool operator==(const Shortfall&, const Shortfall&) = default;
};

struct StratumAllocation {
  std::string stratum;
  double target = 0.0;  // joint target fraction
  std::size_t allocated = 0;
  std::size_t available = 0;
  std::size_t selected = 0;
};

struct SampleResult {
  std::vector<EpisodeRecord> records;
  std::vector<StratumAllocation> strata;
  std::vector<Shortfall> shortfalls;

  bool complete() const { return shortfalls.empty(); }
};

inline std::string format_shortfall(const Shortfall& s) {
  return "stratum " + s.stratum + ": allocated " + std::to_string(s.allocated) + ", available " +
         std::to_string(s.available);
}

inline std::string stratum_key(const EpisodeRecord& r, const std::vector<std::string>& dims) {
  std::string key;
  for (const auto& d : dims) {
    if (!key.empty()) key += ',';
    key += d + "=" + stratum_value(r, d);
  }
  return key;
}

namespace detail {

// Iterative proportional fitting of joint cell weights to the quota
// marginals, seeded with the pool's joint counts so cells absent from the
// pool stay empty.
inline std::vector<double> fit_joint_targets(const std::vector<std::vector<std::string>>& cell_values,
                                             std::vector<double> seed_weights, const StratumQuota& q,
                                             const std::vector<std::string>& dims) {
  const std::size_t n_cells = seed_weights.size();
  for (int iter = 0; iter < 1000; ++iter) {
    double worst = 0.0;
    for (std::size_t d = 0; d < dims.size(); ++d) {
      const auto& targets = q.fractions.at(dims[d]);
      std::map<std::string, double> current;
      double total = 0.0;
      for (std::size_t c = 0; c < n_cells; ++c) {
        current[cell_values[c][d]] += seed_weights[c];
        total += seed_weights[c];
      }
      for (std::size_t c = 0; c < n_cells; ++c) {
        const auto it = targets.find(cell_values[c][d]);
        const double want = it == targets.end() ? 0.0 : it->second;
        const double have = current[cell_values[c][d]] / total;
        worst = std::max(worst, std::abs(have - want));
        seed_weights[c] = have > 0.0 ? seed_weights[c] * want / have : 0.0;
      }
    }
    if (worst < 1e-13) break;
  }
  const double total = std::accumulate(seed_weights.begin(), seed_weights.end(), 0.0);
  if (total > 0.0) {
    for (auto& w : seed_weights) w /= total;
  }
  return seed_weights;
}

}  // namespace detail

/// Draws `n` records so that the joint strata over the quota's dimensions
/// follow the quota. Cell targets come from iterative proportional fitting
/// (exactly the quota when it has one dimension); integer counts from
/// largest-remainder rounding; records within a cell uniformly without
/// replacement. A cell whose pool is smaller than its allocation is filled
/// as far as possible and reported in `shortfalls`.
inline SampleResult stratified_sample(const std::vector<EpisodeRecord>& pool, const StratumQuota& quota, std::size_t n,
                                      std::uint64_t seed) {
  validate_quota(quota);
  if (n > pool.size()) {
    throw Error(ErrorCode::kInvalidArgument, "requested " + std::to_string(n) + " records from a pool of " +
                                                 std::to_string(pool.size()));
  }
  std::vector<std::string> dims;
  for (const auto& [dim, values] : quota.fractions) dims.push_back(dim);

  // Cells in key order; each holds pool indices in pool order.
  std::map<std::string, std::vector<std::size_t>> members;
  std::map<std::string, std::vector<std::string>> values_of;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const std::string key = stratum_key(pool[i], dims);
    members[key].push_back(i);
    if (!values_of.count(key)) {
      std::vector<std::string> v;
      for (const auto& d : dims) v.push_back(stratum_value(pool[i], d));
      values_of[key] = v;
    }
  }
  // Quota values with no pool records still need a cell so their shortfall is visible.
  if (dims.size() == 1) {
    for (const auto& [value, f] : quota.fractions.at(dims[0])) {
      const std::string key = dims[0] + "=" + value;
      if (!members.count(key)) {
        members[key] = {};
        values_of[key] = {value};
      }
    }
  }

  std::vector<std::string> keys;
  std::vector<std::vector<std::string>> cell_values;
  std::vector<double> seed_weights;
  for (const auto& [key, idx] : members) {
    keys.push_back(key);
    cell_values.push_back(values_of[key]);
    seed_weights.push_back(static_cast<double>(idx.size()));
  }

  std::vector<double> targets;
  if (dims.empty()) {
    targets = seed_weights;
  } else if (dims.size() == 1) {
    for (const auto& v : cell_values) {
      const auto& f = quota.fractions.at(dims[0]);
      const auto it = f.find(v[0]);
      targets.push_back(it == f.end() ? 0.0 : it->second);
    }
  } else {
    targets = detail::fit_joint_targets(cell_values, seed_weights, quota, dims);
  }
  const double target_sum = std::accumulate(targets.begin(), targets.end(), 0.0);
  if (target_sum > 0.0) {
    for (auto& t : targets) t /= target_sum;
  }

  SampleResult result;
  const auto alloc = target_sum > 0.0 ? largest_remainder(targets, n) : std::vector<std::size_t>(keys.size(), 0);
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < keys.size(); ++c) {
    std::vector<std::size_t> idx = members[keys[c]];
    Rng rng(mix_seed(seed, c));
    rng.shuffle(idx);
    const std::size_t take = std::min(alloc[c], idx.size());
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    result.strata.push_back({keys[c], targets[c], alloc[c], idx.size(), take});
    if (alloc[c] > idx.size()) result.shortfalls.push_back({keys[c], alloc[c], idx.size()});
  }
  // A marginal value that no pool record carries cannot be reached by any
  // joint cell; report it against its marginal allocation.
  if (dims.size() > 1) {
    for (std::size_t d = 0; d < dims.size(); ++d) {
      for (const auto& [value, f] : quota.fractions.at(dims[d])) {
        bool present = false;
        for (const auto& v : cell_values) present = present || v[d] == value;
        const auto want = static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
        if (!present && want > 0) result.shortfalls.push_back({dims[d] + "=" + value, want, 0});
      }
    }
  }
  std::sort(chosen.begin(), chosen.end());
  result.records.reserve(chosen.size());
  for (std::size_t i : chosen) result.records.push_back(pool[i]);
  return result;
}

// ---------------------------------------------------------------------------
// Balance report

/// "count (pp.pp%)" with the percentage rounded half-to-even at two decimals,
/// computed exactly in integers.
inline std::string format_count_percent(std::size_t count, std::size_t total) {
  if (total == 0) throw Error(ErrorCode::kInvalidArgument, "percentage of an empty total");
  const unsigned long long num = static_cast<unsigned long long>(count) * 10000ULL;
  unsigned long long q = num / total;
  const unsigned long long r = num % total;
  if (2 * r > total || (2 * r == total && (q % 2 == 1))) ++q;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%zu (%llu.%02llu%%)", count, q / 100, q % 100);
  return buf;
}

struct BalanceRow {
  std::string dimension;
  std::string value;
  std::size_t count = 0;
  std::string cell;  // "count (pp.pp%)"
};

/// Counts and percentages for day/night, sunny/rainy and straight/turn.
/// Empty input yields an empty table.
inline std::vector<BalanceRow> balance_report(const std::vector<EpisodeRecord>& records) {
  std::vector<BalanceRow> rows;
  if (records.empty()) return rows;
  for (std::string_view dim : {"time", "weather", "maneuver"}) {
    for (const auto& value : dimension_values(dim)) {
      std::size_t c = 0;
      for (const auto& r : records) c += stratum_value(r, dim) == value;
      rows.push_back({std::string(dim), value, c, format_count_percent(c, records.size())});
    }
  }
  return rows;
}

inline std::string balance_table_text(const std::vector<BalanceRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-9s %-9s %s\n", r.dimension.c_str(), r.value.c_str(), r.cell.c_str());
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

struct DatasetManifest {
  std::size_t size = 0;
  std::map<std::string, std::size_t> stratum_counts;  // joint key over time/weather/maneuver
  std::map<std::string, std::map<std::string, std::size_t>> dimension_counts;
  std::map<std::string, std::size_t> provenance;
  std::vector<std::uint64_t> seeds;
  std::string toolkit_version = std::string(kToolkitVersion);

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline DatasetManifest make_manifest(const std::vector<EpisodeRecord>& records, std::vector<std::uint64_t> seeds) {
  DatasetManifest m;
  m.size = records.size();
  const std::vector<std::string> joint = {"time", "weather", "maneuver"};
  for (const auto& r : records) {
    ++m.stratum_counts[stratum_key(r, joint)];
    for (std::string_view d : kStratumDimensions) ++m.dimension_counts[std::string(d)][stratum_value(r, d)];
    ++m.provenance[to_string(r.provenance)];
  }
  m.seeds = std::move(seeds);
  return m;
}

}  // namespace sim2real
